#pragma once

#include <map>
#include <optional>
#include <vector>

#include "rhg/matrix.hpp"
#include "rhg/numerics.hpp"

namespace rhg {

class MonotonicityError : public std::runtime_error {
 public:
  MonotonicityError(const std::string& what, double lambda_min)
      : std::runtime_error(what), lambda_min(lambda_min) {}
  double lambda_min;
};

class InfeasibilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentDynamics {
  Matrix A;  // in decoupled mode: the agent's own square state map
  Matrix B;  // n_x x n_u^v (global rows in coupled mode, local rows in decoupled mode)
};

/// Quadratic stage cost pieces for one agent:
///   state part  x' W x + w' x
///   input part  0.5 u^v' Q_self u^v + sum_{j != v} u^v' Q_cross[j] u^j + q' u^v
/// so that grad_{u^v} = Q_self u^v + sum_j Q_cross[j] u^j + q.
/// q may be given per stage (size K * n_u^v) instead of constant (size n_u^v).
struct StageCost {
  Matrix W;
  Vector w;
  Matrix Q_self;
  std::map<std::size_t, Matrix> Q_cross;
  Vector q;
};

/// Input cost of the aggregative family l_u^v = (sum_j R u^j)' u^v.
/// Populates Q_self = R + R', Q_cross[j] = R for all j != v.
StageCost aggregative_cost(const Matrix& R, std::size_t agent, std::size_t n_agents);

/// Per-agent, per-stage box bounds and per-stage affine coupling rows over the
/// stacked stage input u_k = col_v(u^v_k).
struct ConstraintSpec {
  // boxes[v] has either 1 (stage-invariant) or K entries of (lower, upper) pairs
  struct Box {
    Vector lower, upper;
  };
  std::vector<std::vector<Box>> boxes;  // [agent][stage or single]
  struct CouplingStage {
    Matrix C;  // rows x n_u_total
    Vector c;
  };
  std::vector<CouplingStage> coupling;  // one entry (replicated) or K entries
};

enum class GameMode { coupled, decoupled };

struct GameSpec {
  std::vector<AgentDynamics> dynamics;
  std::vector<StageCost> costs;
  std::size_t horizon = 2;  // K > 1
  ConstraintSpec constraints;
  GameMode mode = GameMode::coupled;

  std::size_t n_agents() const { return dynamics.size(); }
};

/// Stacked constraint polyhedron over the whole horizon, agent-major stage-major
/// layout u = col_v(u^v_0, ..., u^v_{K-1}).
struct StackedPolyhedron {
  Vector lower, upper;  // length K * n_u_total; +-inf allowed
  Matrix C;             // coupling rows lifted per stage
  Vector c;

  std::size_t coupling_rows() const { return c.size(); }
};

/// Condensed affine game: F(u, x) = G u + g + F_x x over the stacked input.
struct CondensedGame {
  Matrix A_tilde;               // (K+1) n_x x n_x free response
  std::vector<Matrix> B_tilde;  // per agent, strictly block-lower-triangular
  Matrix G;
  Vector g;
  Matrix Fx;
  double mu = 0.0;  // lambda_min of the symmetric part of G
  StackedPolyhedron Z;
  Matrix Xi;  // n_u_total x K n_u_total stage-0 selector
  Matrix A;   // global state map
  Matrix B;   // [B^1 ... B^M]
  Matrix Bhat;  // B * Xi

  std::size_t K = 0;
  std::size_t n_x = 0;
  std::vector<std::size_t> n_u;       // per agent
  std::vector<std::size_t> offsets;   // agent block offsets into the stacked input
  GameMode mode = GameMode::coupled;

  // decoupled-mode per-agent pieces for the local certificates
  std::vector<Matrix> A_local;    // A^v
  std::vector<Matrix> Bhat_local; // B^v Xi^v
  std::vector<Matrix> Fx_local;   // K n_u^v x n_x^v

  std::size_t n_u_total() const {
    std::size_t s = 0;
    for (auto n : n_u) s += n;
    return s;
  }
  std::size_t stacked_dim() const { return K * n_u_total(); }
};

struct CondenseConfig {
  double mu_threshold = 1e-10;      // Assumption gate on lambda_min(sym G)
  double w_symmetry_tol = 1e-12;    // warn+symmetrize beyond this
  bool require_monotone = true;     // throw MonotonicityError when mu <= threshold
  NumericsConfig numerics;
};

/// Free-response and per-agent impulse-response matrices of the global dynamics.
/// A_tilde stacks (I, A, ..., A^K); B_tilde^v block (i,j) = A^{i-1-j} B^v for i > j.
std::pair<Matrix, std::vector<Matrix>> build_prediction_matrices(const Matrix& A,
                                                                 const std::vector<Matrix>& B,
                                                                 std::size_t K);

/// Stage-wise boxes replicated over the horizon, reordered to the stacked
/// agent-major layout; coupling rows lifted per stage.
StackedPolyhedron assemble_stacked_constraints(const GameSpec& spec);

/// Condenses the game into the affine pseudo-gradient representation.
/// The exact analytic gradient is used on every block, and the state weight is
/// applied to all K+1 predicted states (see tests/oracles for the rollout this
/// matches). mu <= threshold raises MonotonicityError.
CondensedGame condense(const GameSpec& spec, const CondenseConfig& cfg = {});

/// Global (A, B list, W list) view of a spec: identity embedding in coupled
/// mode, block-diagonal embedding in decoupled mode.
struct GlobalView {
  Matrix A;
  std::vector<Matrix> B;   // global rows
  std::vector<Matrix> W;   // global state weights (symmetrized)
  std::vector<Vector> w;
  std::vector<std::size_t> state_offset;  // per agent (decoupled)
  std::size_t n_x = 0;
};
GlobalView global_view(const GameSpec& spec, double w_symmetry_tol = 1e-12);

}  // namespace rhg
