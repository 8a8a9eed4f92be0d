#include <doctest.h>

#include "oracles.hpp"
#include "rhg/game.hpp"

using namespace rhg;

namespace {

// the published two-agent example data (state maps and weight pattern)
const Matrix kA1(2, 2, {0.6, 0.3, 0.3, 0.7});
const Matrix kA2(2, 2, {0.6, 0.1, 0.8, 0.1});
const Matrix kB1(2, 2, {10.0, 5.5, 11.0, 4.0});
const Matrix kB2(2, 2, {13.0, 19.0, 6.5, 10.0});
const Matrix kR1 = Matrix::diag({10.0, 0.01});
const Matrix kR2 = Matrix::diag({0.01, 20.0});

GameSpec two_agent_spec(double w_big) {
  GameSpec spec;
  spec.mode = GameMode::decoupled;
  spec.horizon = 10;
  spec.dynamics.push_back({kA1, kB1});
  spec.dynamics.push_back({kA2, kB2});
  StageCost c1 = aggregative_cost(kR1, 0, 2);
  c1.W = Matrix::diag({w_big, 0.05});
  c1.w = Vector(2, 0.0);
  StageCost c2 = aggregative_cost(kR2, 1, 2);
  c2.W = Matrix::diag({0.05, w_big});
  c2.w = Vector(2, 0.0);
  spec.costs = {c1, c2};
  spec.constraints.boxes.resize(2);
  return spec;
}

GameSpec random_spec(std::uint64_t seed, bool with_linear = true) {
  SplitMix64 rng(seed);
  GameSpec spec;
  spec.mode = GameMode::coupled;
  spec.horizon = 2 + static_cast<std::size_t>(rng.next_u64() % 3);
  const std::size_t M = 2;
  const std::size_t nx = 2 + static_cast<std::size_t>(rng.next_u64() % 2);
  Matrix A(nx, nx);
  for (auto& v : A.data()) v = rng.uniform(-0.4, 0.4);
  std::vector<std::size_t> nus{1 + static_cast<std::size_t>(rng.next_u64() % 2), 1};
  for (std::size_t v = 0; v < M; ++v) {
    Matrix B(nx, nus[v]);
    for (auto& b : B.data()) b = rng.uniform(-1.5, 1.5);
    spec.dynamics.push_back({A, B});
  }
  for (std::size_t v = 0; v < M; ++v) {
    StageCost c;
    Matrix q(nx, nx);
    for (auto& x : q.data()) x = rng.uniform(-1.0, 1.0);
    c.W = 0.2 * (q * q.transposed());
    c.w = Vector(nx, 0.0);
    if (with_linear)
      for (auto& x : c.w) x = rng.uniform(-0.5, 0.5);
    Matrix s(nus[v], nus[v]);
    for (auto& x : s.data()) x = rng.uniform(-0.6, 0.6);
    c.Q_self = s * s.transposed() + Matrix::identity(nus[v]);
    for (std::size_t j = 0; j < M; ++j) {
      if (j == v) continue;
      Matrix cr(nus[v], nus[j]);
      for (auto& x : cr.data()) x = rng.uniform(-0.3, 0.3);
      c.Q_cross[j] = cr;
    }
    c.q = Vector(nus[v], 0.0);
    if (with_linear)
      for (auto& x : c.q) x = rng.uniform(-0.5, 0.5);
    spec.costs.push_back(c);
  }
  spec.constraints.boxes.resize(M);
  return spec;
}

}  // namespace

TEST_CASE("prediction matrices: scalar expansion") {
  Matrix A(1, 1, {0.5});
  Matrix B(1, 1, {1.0});
  auto [At, Bts] = build_prediction_matrices(A, {B}, 3);
  REQUIRE(At.rows() == 4);
  CHECK(At(0, 0) == doctest::Approx(1.0));
  CHECK(At(1, 0) == doctest::Approx(0.5));
  CHECK(At(2, 0) == doctest::Approx(0.25));
  CHECK(At(3, 0) == doctest::Approx(0.125));
  const Matrix& Bt = Bts[0];
  REQUIRE(Bt.rows() == 4);
  REQUIRE(Bt.cols() == 3);
  // rows (0;  1,0,0;  0.5,1,0;  0.25,0.5,1)
  CHECK(Bt(0, 0) == 0.0);
  CHECK(Bt(1, 0) == doctest::Approx(1.0));
  CHECK(Bt(2, 0) == doctest::Approx(0.5));
  CHECK(Bt(2, 1) == doctest::Approx(1.0));
  CHECK(Bt(3, 0) == doctest::Approx(0.25));
  CHECK(Bt(3, 1) == doctest::Approx(0.5));
  CHECK(Bt(3, 2) == doctest::Approx(1.0));
}

TEST_CASE("prediction matrices: K=1 and nilpotent A") {
  Matrix A(2, 2, {0.3, 0.0, 0.5, 0.2});
  Matrix B(2, 1, {1.0, 2.0});
  auto [At, Bts] = build_prediction_matrices(A, {B}, 1);
  CHECK(frobenius_norm(At.block(0, 0, 2, 2) - Matrix::identity(2)) == doctest::Approx(0.0));
  CHECK(frobenius_norm(At.block(2, 0, 2, 2) - A) == doctest::Approx(0.0));
  CHECK(frobenius_norm(Bts[0].block(0, 0, 2, 1)) == doctest::Approx(0.0));
  CHECK(frobenius_norm(Bts[0].block(2, 0, 2, 1) - B) == doctest::Approx(0.0));

  Matrix N(2, 2, {0.0, 0.0, 1.0, 0.0});  // nilpotent
  auto [At2, Bts2] = build_prediction_matrices(N, {B}, 4);
  for (std::size_t k = 2; k <= 4; ++k)
    CHECK(frobenius_norm(At2.block(2 * k, 0, 2, 2)) == doctest::Approx(0.0));
}

TEST_CASE("B_tilde is strictly block-lower-triangular") {
  GameSpec spec = random_spec(404);
  CondensedGame g = condense(spec, [] {
    CondenseConfig c;
    c.require_monotone = false;
    return c;
  }());
  const std::size_t nx = g.n_x;
  for (std::size_t v = 0; v < spec.n_agents(); ++v) {
    const Matrix& Bt = g.B_tilde[v];
    const std::size_t nu = g.n_u[v];
    for (std::size_t i = 0; i <= g.K; ++i)
      for (std::size_t j = i; j < g.K; ++j)
        CHECK(frobenius_norm(Bt.block(i * nx, j * nu, nx, nu)) == doctest::Approx(0.0));
  }
}

TEST_CASE("condense: scalar single-agent with zero state cost") {
  GameSpec spec;
  spec.mode = GameMode::coupled;
  spec.horizon = 2;
  spec.dynamics.push_back({Matrix(1, 1, {0.0}), Matrix(1, 1, {1.0})});
  StageCost c;
  c.W = Matrix(1, 1, {0.0});
  c.w = {0.0};
  c.Q_self = Matrix(1, 1, {2.0});
  c.q = {0.0};
  spec.costs.push_back(c);
  spec.constraints.boxes.resize(1);
  CondensedGame g = condense(spec);
  CHECK(g.G(0, 0) == doctest::Approx(2.0));
  CHECK(g.G(1, 1) == doctest::Approx(2.0));
  CHECK(g.G(0, 1) == doctest::Approx(0.0));
  CHECK(norm2(g.g) == doctest::Approx(0.0));
  CHECK(frobenius_norm(g.Fx) == doctest::Approx(0.0));
  CHECK(g.mu == doctest::Approx(2.0));
}

TEST_CASE("condense: published two-agent game, frozen monotonicity constants") {
  // The reference source reports mu = 0.498 and mu = 0.125 for these weights.
  // No condensation convention we tested reproduces those two values at once;
  // the exact-gradient convention validated by the finite-difference oracle
  // below gives the constants frozen here (the W = 20 game is only monotone
  // when the terminal predicted state is weighted, which fixes the convention).
  CondensedGame ga = condense(two_agent_spec(20.0));
  CHECK(ga.mu == doctest::Approx(0.4731).epsilon(2e-3));
  CondensedGame gb = condense(two_agent_spec(1.0));
  CHECK(gb.mu == doctest::Approx(0.0507).epsilon(2e-3));
}

TEST_CASE("aggregative_cost: gradient structure and rejection") {
  StageCost c = aggregative_cost(Matrix::diag({10.0, 0.01}), 0, 2);
  // own gradient at u = (1,1), others zero: (R + R') u = (20, 0.02)
  Vector gself = c.Q_self * Vector{1.0, 1.0};
  CHECK(gself[0] == doctest::Approx(20.0));
  CHECK(gself[1] == doctest::Approx(0.02));
  CHECK(frobenius_norm(c.Q_cross.at(1) - Matrix::diag({10.0, 0.01})) == doctest::Approx(0.0));

  // two scalar agents, R = 1 each: input part [[2,1],[1,2]], lambda_min = 1
  GameSpec spec;
  spec.mode = GameMode::coupled;
  spec.horizon = 2;
  Matrix A(1, 1, {0.0});
  spec.dynamics.push_back({A, Matrix(1, 1, {1.0})});
  spec.dynamics.push_back({A, Matrix(1, 1, {1.0})});
  for (std::size_t v = 0; v < 2; ++v) {
    StageCost cc = aggregative_cost(Matrix(1, 1, {1.0}), v, 2);
    cc.W = Matrix(1, 1, {0.0});
    cc.w = {0.0};
    spec.costs.push_back(cc);
  }
  spec.constraints.boxes.resize(2);
  CondensedGame g = condense(spec);
  // hand-check oracle: eigenvalues of [[2,1],[1,2]] are 1 and 3
  CHECK(g.mu == doctest::Approx(1.0).epsilon(1e-9));

  // R + R' singular: [[1,2],[0,1]] gives Q_self = [[2,2],[2,2]]
  CHECK_THROWS_AS(aggregative_cost(Matrix(2, 2, {1.0, 2.0, 0.0, 1.0}), 0, 2), MonotonicityError);
}

TEST_CASE("assemble_stacked_constraints: counting and layout") {
  GameSpec spec;
  spec.mode = GameMode::coupled;
  spec.horizon = 2;
  Matrix A(1, 1, {0.5});
  for (int v = 0; v < 2; ++v) {
    spec.dynamics.push_back({A, Matrix(1, 1, {1.0})});
    StageCost c;
    c.W = Matrix(1, 1, {0.0});
    c.w = {0.0};
    c.Q_self = Matrix(1, 1, {1.0});
    c.q = {0.0};
    spec.costs.push_back(c);
  }
  spec.constraints.boxes.resize(2);
  for (int v = 0; v < 2; ++v) spec.constraints.boxes[v].push_back({{-1.0}, {1.0}});
  CondensedGame g = condense(spec);
  // 2 agents x K=2 stages of [-1, 1], zero coupling rows
  for (double lo : g.Z.lower) CHECK(lo == doctest::Approx(-1.0));
  for (double hi : g.Z.upper) CHECK(hi == doctest::Approx(1.0));
  CHECK(g.Z.coupling_rows() == 0);

  // battery-style aggregate band: 2 rows per stage over M = 3 agents, K = 2
  GameSpec bat;
  bat.mode = GameMode::coupled;
  bat.horizon = 2;
  for (int v = 0; v < 3; ++v) {
    bat.dynamics.push_back({A, Matrix(1, 1, {1.0})});
    StageCost c;
    c.W = Matrix(1, 1, {0.0});
    c.w = {0.0};
    c.Q_self = Matrix(1, 1, {1.0});
    c.q = {0.0};
    bat.costs.push_back(c);
  }
  bat.constraints.boxes.resize(3);
  ConstraintSpec::CouplingStage cs;
  cs.C = Matrix(2, 3, {1, 1, 1, -1, -1, -1});
  cs.c = {5.0, 1.0};
  bat.constraints.coupling.push_back(cs);
  CondensedGame gb = condense(bat);
  CHECK(gb.Z.coupling_rows() == 4);
  // stacked layout: the stage-k row touches column (agent offset + k)
  CHECK(gb.Z.C(0, 0) == doctest::Approx(1.0));   // agent 0 stage 0
  CHECK(gb.Z.C(2, 1) == doctest::Approx(1.0));   // agent 0 stage 1
  CHECK(gb.Z.C(2, 3) == doctest::Approx(1.0));   // agent 1 stage 1

  // empty box rejected
  GameSpec bad = spec;
  bad.constraints.boxes[0][0] = {{2.0}, {-2.0}};
  CHECK_THROWS_AS(assemble_stacked_constraints(bad), InfeasibilityError);

  // coupling row unreachable over the box: feasibility probe fires
  GameSpec bad2 = bat;
  bad2.constraints.boxes.assign(3, {{{-1.0}, {1.0}}});
  bad2.constraints.coupling[0].c = {5.0, -4.0};  // requires sum u >= 4 but sum u <= 3
  CHECK_THROWS_AS(assemble_stacked_constraints(bad2), InfeasibilityError);
}

TEST_CASE("gradient consistency: condensed F matches rolled-out finite differences") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
    GameSpec spec = random_spec(seed);
    CondenseConfig cfg;
    cfg.require_monotone = false;
    CondensedGame g = condense(spec, cfg);
    SplitMix64 rng(seed * 17 + 1);
    Vector u(g.stacked_dim()), x0(g.n_x);
    for (auto& v : u) v = rng.uniform(-2.0, 2.0);
    for (auto& v : x0) v = rng.uniform(-2.0, 2.0);
    Vector F = g.G * u + g.g + g.Fx * x0;
    Vector Ffd = test::fd_pseudogradient(spec, u, x0);
    CHECK(norm2(F - Ffd) <= 1e-6 * std::max(1.0, norm2(Ffd)));
  }
}

TEST_CASE("strong monotonicity property of the condensed map") {
  GameSpec spec = two_agent_spec(20.0);
  CondensedGame g = condense(spec);
  SplitMix64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Vector u1(g.stacked_dim()), u2(g.stacked_dim());
    for (auto& v : u1) v = rng.uniform(-3.0, 3.0);
    for (auto& v : u2) v = rng.uniform(-3.0, 3.0);
    Vector d = u1 - u2;
    Vector Fd = g.G * d;  // F(u1,x) - F(u2,x) for affine F
    CHECK(dot(d, Fd) >= g.mu * dot(d, d) - 1e-9);
  }
}

TEST_CASE("decoupled-mode condensation agrees with the coupled embedding") {
  GameSpec dec = two_agent_spec(1.0);
  CondensedGame gd = condense(dec);

  GameSpec cou;
  cou.mode = GameMode::coupled;
  cou.horizon = dec.horizon;
  GlobalView gv = global_view(dec);
  for (std::size_t v = 0; v < 2; ++v) {
    cou.dynamics.push_back({gv.A, gv.B[v]});
    StageCost c = dec.costs[v];
    c.W = gv.W[v];
    c.w = gv.w[v];
    cou.costs.push_back(c);
  }
  cou.constraints.boxes.resize(2);
  CondensedGame gc = condense(cou);
  CHECK(frobenius_norm(gd.G - gc.G) <= 1e-12 * frobenius_norm(gc.G));
  CHECK(norm2(gd.g - gc.g) <= 1e-12);
  CHECK(frobenius_norm(gd.Fx - gc.Fx) <= 1e-12 * std::max(1.0, frobenius_norm(gc.Fx)));
  // local Fx blocks equal the global restriction to the agent's state columns
  for (std::size_t v = 0; v < 2; ++v) {
    Matrix global_blk = gd.Fx.block(gd.offsets[v], 2 * v, gd.K * gd.n_u[v], 2);
    CHECK(frobenius_norm(global_blk - gd.Fx_local[v]) <= 1e-12 * std::max(1.0, frobenius_norm(global_blk)));
  }
}

TEST_CASE("condense: monotonicity gate raises with lambda_min attached") {
  // dropping the terminal weight makes the W = 20 game non-monotone; emulate
  // that degeneracy directly with an indefinite input coupling
  GameSpec spec;
  spec.mode = GameMode::coupled;
  spec.horizon = 2;
  Matrix A(1, 1, {0.5});
  spec.dynamics.push_back({A, Matrix(1, 1, {1.0})});
  spec.dynamics.push_back({A, Matrix(1, 1, {1.0})});
  for (std::size_t v = 0; v < 2; ++v) {
    StageCost c;
    c.W = Matrix(1, 1, {0.0});
    c.w = {0.0};
    c.Q_self = Matrix(1, 1, {1.0});
    c.Q_cross[1 - v] = Matrix(1, 1, {3.0});  // cross dominates
    c.q = {0.0};
    spec.costs.push_back(c);
  }
  spec.constraints.boxes.resize(2);
  try {
    condense(spec);
    FAIL("expected MonotonicityError");
  } catch (const MonotonicityError& e) {
    CHECK(e.lambda_min < 0.0);
  }
}

TEST_CASE("condense: asymmetric W is symmetrized") {
  GameSpec spec;
  spec.mode = GameMode::coupled;
  spec.horizon = 2;
  spec.dynamics.push_back({Matrix(1, 1, {0.5}), Matrix(1, 1, {1.0})});
  StageCost c;
  c.W = Matrix(1, 1, {1.0});
  c.w = {0.0};
  c.Q_self = Matrix(1, 1, {2.0});
  c.q = {0.0};
  spec.costs.push_back(c);
  spec.constraints.boxes.resize(1);
  CondensedGame g1 = condense(spec);

  GameSpec spec2;
  spec2.mode = GameMode::coupled;
  spec2.horizon = 2;
  Matrix A2(2, 2, {0.5, 0.0, 0.0, 0.5});
  spec2.dynamics.push_back({A2, Matrix(2, 1, {1.0, 1.0})});
  StageCost c2;
  c2.W = Matrix(2, 2, {1.0, 0.3, 0.1, 1.0});  // asymmetric
  c2.w = Vector(2, 0.0);
  c2.Q_self = Matrix(1, 1, {2.0});
  c2.q = {0.0};
  spec2.costs.push_back(c2);
  spec2.constraints.boxes.resize(1);
  CondensedGame g2 = condense(spec2);

  StageCost c3 = c2;
  c3.W = symmetric_part(c2.W);
  GameSpec spec3 = spec2;
  spec3.costs = {c3};
  CondensedGame g3 = condense(spec3);
  CHECK(frobenius_norm(g2.G - g3.G) == doctest::Approx(0.0));
  (void)g1;
}

TEST_CASE("condense: K must exceed 1") {
  GameSpec spec;
  spec.mode = GameMode::coupled;
  spec.horizon = 1;
  spec.dynamics.push_back({Matrix(1, 1, {0.5}), Matrix(1, 1, {1.0})});
  StageCost c;
  c.W = Matrix(1, 1, {0.0});
  c.w = {0.0};
  c.Q_self = Matrix(1, 1, {1.0});
  c.q = {0.0};
  spec.costs.push_back(c);
  spec.constraints.boxes.resize(1);
  CHECK_THROWS_AS(condense(spec), DimensionError);
}
