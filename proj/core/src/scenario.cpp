#include "rhg/scenario.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace rhg {

using nlohmann::json;

namespace {

// ---- frozen builtin data ----

// Two agents steering a shared four-state plant (two stable two-state blocks)
// through cross-injecting scalar actuators; aggregative input prices. The large
// state-weight variant destabilizes the closed loop, the small one does not.
const Matrix kToyA1(2, 2, {0.6, 0.3, 0.3, 0.7});
const Matrix kToyA2(2, 2, {0.6, 0.1, 0.8, 0.1});
const double kToyB1[4] = {-2.6, 0.5, 2.3, 1.0};
const double kToyB2[4] = {-1.0, 1.8, 2.0, -2.6};
const double kToyR1 = 0.7;
const double kToyR2 = 0.04;
const double kToyWSmall = 0.05;

// Battery charging game literals (deterministic draw, documented default seed 1).
const double kBatA[3] = {0.9578328078758613, 0.9587289087863134, 0.9598550137679339};
const double kBatB[3] = {0.7133307765116731, 0.7133279410247907, 0.7228868317573528};
const double kBatG1[3] = {0.049386743433820865, 0.04761533589925491, 0.04642754342198483};
const double kBatG2[3] = {0.08969983028311529, 0.0702071084525113, 0.08027101844876647};
const double kBatG3[3] = {0.010227468953735145, 0.010265039498750794, 0.010217982699912363};
const double kBatXref[3] = {15.835174945702756, 18.22667320109753, 19.076752916840498};
const double kBatDemand[3] = {1.3, 1.5, 1.7};
constexpr double kBatUMax = 7.0, kBatLMax = 10.0, kBatAggLMax = 8.0;
constexpr std::size_t kBatHorizon = 2, kBatSteps = 48;
constexpr std::size_t kBatShockStart = 21, kBatShockEnd = 25;
constexpr double kBatShockFactor = 2.0;

Scenario make_illustrative(bool unstable) {
  Scenario sc;
  sc.name = unstable ? "illustrative_unstable" : "illustrative_stable";
  GameSpec spec;
  spec.mode = GameMode::coupled;
  spec.horizon = 10;
  Matrix A(4, 4);
  A.set_block(0, 0, kToyA1);
  A.set_block(2, 2, kToyA2);
  Matrix B1(4, 1), B2(4, 1);
  for (int i = 0; i < 4; ++i) {
    B1(i, 0) = kToyB1[i];
    B2(i, 0) = kToyB2[i];
  }
  spec.dynamics.push_back({A, B1});
  spec.dynamics.push_back({A, B2});
  const double wbig = unstable ? 20.0 : 1.0;
  Matrix W1(4, 4), W2(4, 4);
  W1(0, 0) = wbig;
  W1(1, 1) = kToyWSmall;
  W2(2, 2) = kToyWSmall;
  W2(3, 3) = wbig;
  StageCost c1 = aggregative_cost(Matrix(1, 1, {kToyR1}), 0, 2);
  StageCost c2 = aggregative_cost(Matrix(1, 1, {kToyR2}), 1, 2);
  c1.W = W1;
  c1.w = Vector(4, 0.0);
  c2.W = W2;
  c2.w = Vector(4, 0.0);
  spec.costs = {c1, c2};
  spec.constraints.boxes.resize(2);  // unbounded Z: certificate preconditions unverified
  sc.spec = spec;
  sc.x0 = {8.0, -4.0, 6.0, -2.0};
  sc.steps = unstable ? 200 : 100;
  return sc;
}

struct BatteryParams {
  Vector A, B, g1, g2, g3, xref, dbar;
};

BatteryParams battery_params(std::uint64_t seed_override) {
  BatteryParams p;
  if (seed_override == 0) {
    for (int v = 0; v < 3; ++v) {
      p.A.push_back(kBatA[v]);
      p.B.push_back(kBatB[v]);
      p.g1.push_back(kBatG1[v]);
      p.g2.push_back(kBatG2[v]);
      p.g3.push_back(kBatG3[v]);
      p.xref.push_back(kBatXref[v]);
      p.dbar.push_back(kBatDemand[v]);
    }
    return p;
  }
  // re-draw across the full published ranges; certificates may then be
  // infeasible, which the certify command reports rather than hides
  SplitMix64 rng(seed_override);
  for (int v = 0; v < 3; ++v) p.A.push_back(rng.uniform(0.955, 0.98));
  for (int v = 0; v < 3; ++v) p.B.push_back(rng.uniform(0.7, 0.9));
  for (int v = 0; v < 3; ++v) p.g1.push_back(rng.uniform(0.03, 0.05));
  for (int v = 0; v < 3; ++v) p.g2.push_back(rng.uniform(0.01, 0.2));
  for (int v = 0; v < 3; ++v) p.g3.push_back(rng.uniform(0.01, 0.02));
  for (int v = 0; v < 3; ++v) p.xref.push_back(rng.uniform(15.0, 20.0));
  for (int v = 0; v < 3; ++v) p.dbar.push_back(rng.uniform(1.0, 2.0));
  return p;
}

Scenario make_battery(std::uint64_t seed_override) {
  BatteryParams p = battery_params(seed_override);
  ScheduledScenario sch;
  sch.gamma1 = p.g1;
  sch.gamma2 = p.g2;
  sch.gamma3 = p.g3;
  sch.x_ref = p.xref;
  sch.u_min = -kBatUMax;
  sch.u_max = kBatUMax;
  sch.l_max = kBatLMax;
  sch.L_max = kBatAggLMax;
  sch.steps = kBatSteps;
  sch.x0 = {0.0, 0.0, 0.0};
  sch.demand.base = p.dbar;
  sch.demand.amplitude = 0.0;  // averaged profile
  sch.demand.shock_factor = kBatShockFactor;
  sch.demand.shock_start = kBatShockStart;
  sch.demand.shock_end = kBatShockEnd;

  GameSpec spec;
  spec.mode = GameMode::decoupled;
  spec.horizon = kBatHorizon;
  for (std::size_t v = 0; v < 3; ++v) {
    spec.dynamics.push_back({Matrix(1, 1, {p.A[v]}), Matrix(1, 1, {p.B[v]})});
    StageCost c = aggregative_cost(Matrix(1, 1, {p.g1[v]}), v, 3);
    c.W = Matrix(1, 1, {p.g3[v]});
    c.w = {-2.0 * p.g3[v] * p.xref[v]};
    // nominal linear term at the base demand
    double dsum = 0.0;
    for (double d : p.dbar) dsum += d;
    c.q = {2.0 * p.g1[v] * p.dbar[v] + p.g1[v] * (dsum - p.dbar[v]) + p.g2[v]};
    spec.costs.push_back(c);
  }
  spec.constraints.boxes.resize(3);
  for (std::size_t v = 0; v < 3; ++v) {
    ConstraintSpec::Box b;
    b.lower = {std::max(sch.u_min, -p.dbar[v])};
    b.upper = {std::min(sch.u_max, sch.l_max - p.dbar[v])};
    spec.constraints.boxes[v].push_back(b);
  }
  {
    double dsum = 0.0;
    for (double d : p.dbar) dsum += d;
    ConstraintSpec::CouplingStage cs;
    cs.C = Matrix(2, 3, {1, 1, 1, -1, -1, -1});
    cs.c = {sch.L_max - dsum, dsum};
    spec.constraints.coupling.push_back(cs);
  }
  sch.nominal = spec;

  Scenario sc;
  sc.name = "battery_charging";
  sc.spec = spec;
  sc.x0 = sch.x0;
  sc.steps = sch.steps;
  sc.seed = seed_override;
  sc.schedule = sch;
  return sc;
}

// ---- json helpers with field-path diagnostics ----

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ScenarioError("scenario: field '" + path + "': " + what);
}

Matrix parse_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) fail(path, "expected a non-empty array of rows");
  const std::size_t rows = j.size();
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      fail(path, "row " + std::to_string(i) + " length " + std::to_string(j[i].size()) +
                     " != " + std::to_string(cols));
    }
    for (std::size_t k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) fail(path, "non-numeric entry in row " + std::to_string(i));
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

Vector parse_vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  Vector v;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(path, "non-numeric entry " + std::to_string(i));
    v.push_back(j[i].get<double>());
  }
  return v;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

double DemandModel::base_at(std::size_t t, std::size_t v) const {
  if (!profile.empty()) return profile[t % profile.size()][v];
  double scale = 1.0;
  if (amplitude != 0.0) {
    const double h = static_cast<double>(t % 24);
    const double morning = std::exp(-((h - 8.0) / 3.0) * ((h - 8.0) / 3.0));
    const double evening = std::exp(-((h - 19.0) / 3.0) * ((h - 19.0) / 3.0));
    scale += amplitude * (0.6 * morning + evening);
  }
  return base[v] * scale;
}

double DemandModel::actual_at(std::size_t t, std::size_t v) const {
  const double d = base_at(t, v);
  return (t >= shock_start && t < shock_end) ? d * shock_factor : d;
}

GameSpec ScheduledScenario::game_at(std::size_t t) const {
  GameSpec spec = nominal;
  const std::size_t M = spec.n_agents();
  const std::size_t K = spec.horizon;
  // stage demands: realized now, base preview later
  std::vector<Vector> d(K, Vector(M, 0.0));
  for (std::size_t v = 0; v < M; ++v) {
    d[0][v] = demand.actual_at(t, v);
    for (std::size_t k = 1; k < K; ++k) d[k][v] = demand.base_at(t + k, v);
  }
  for (std::size_t v = 0; v < M; ++v) {
    Vector q(K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      double dsum = 0.0;
      for (double dj : d[k]) dsum += dj;
      q[k] = 2.0 * gamma1[v] * d[k][v] + gamma1[v] * (dsum - d[k][v]) + gamma2[v];
    }
    spec.costs[v].q = q;
    spec.constraints.boxes[v].clear();
    for (std::size_t k = 0; k < K; ++k) {
      ConstraintSpec::Box b;
      b.lower = {std::max(u_min, -d[k][v])};
      b.upper = {std::min(u_max, l_max - d[k][v])};
      spec.constraints.boxes[v].push_back(b);
    }
  }
  spec.constraints.coupling.clear();
  for (std::size_t k = 0; k < K; ++k) {
    double dsum = 0.0;
    for (double dj : d[k]) dsum += dj;
    ConstraintSpec::CouplingStage cs;
    cs.C = Matrix(2, M);
    for (std::size_t v = 0; v < M; ++v) {
      cs.C(0, v) = 1.0;
      cs.C(1, v) = -1.0;
    }
    cs.c = {L_max - dsum, dsum};
    spec.constraints.coupling.push_back(cs);
  }
  return spec;
}

bool is_builtin(const std::string& name) {
  return name == "illustrative_unstable" || name == "illustrative_stable" ||
         name == "battery_charging";
}

std::vector<std::string> builtin_names() {
  return {"illustrative_unstable", "illustrative_stable", "battery_charging"};
}

Scenario load_builtin(const std::string& name, std::uint64_t seed_override) {
  if (name == "illustrative_unstable") return make_illustrative(true);
  if (name == "illustrative_stable") return make_illustrative(false);
  if (name == "battery_charging") return make_battery(seed_override);
  std::string names;
  for (const auto& n : builtin_names()) names += " " + n;
  throw ScenarioError("unknown builtin '" + name + "'; available:" + names);
}

Scenario parse_scenario_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError(std::string("scenario: JSON parse error: ") + e.what());
  }
  Scenario sc;
  sc.name = j.value("name", "scenario");
  if (!j.contains("agents") || !j["agents"].is_array() || j["agents"].empty())
    fail("agents", "required non-empty array");
  if (!j.contains("horizon") || !j["horizon"].is_number_unsigned())
    fail("horizon", "required unsigned integer");
  GameSpec spec;
  spec.horizon = j["horizon"].get<std::size_t>();
  if (spec.horizon < 2) fail("horizon", "K must exceed 1");
  const std::string mode = j.value("mode", "coupled");
  if (mode == "coupled") {
    spec.mode = GameMode::coupled;
  } else if (mode == "decoupled") {
    spec.mode = GameMode::decoupled;
  } else {
    fail("mode", "must be 'coupled' or 'decoupled'");
  }
  const std::size_t M = j["agents"].size();
  spec.constraints.boxes.resize(M);
  for (std::size_t v = 0; v < M; ++v) {
    const json& a = j["agents"][v];
    const std::string p = "agents[" + std::to_string(v) + "]";
    if (!a.contains("A")) fail(p + ".A", "required");
    if (!a.contains("B")) fail(p + ".B", "required");
    AgentDynamics dyn{parse_matrix(a["A"], p + ".A"), parse_matrix(a["B"], p + ".B")};
    if (dyn.A.rows() != dyn.A.cols()) fail(p + ".A", "must be square");
    if (dyn.B.rows() != dyn.A.rows()) fail(p + ".B", "row count must match A");
    spec.dynamics.push_back(dyn);

    StageCost cost;
    if (!a.contains("cost")) fail(p + ".cost", "required");
    const json& c = a["cost"];
    const std::string ctype = c.value("type", "");
    if (ctype == "aggregative") {
      if (!c.contains("R")) fail(p + ".cost.R", "required for aggregative costs");
      cost = aggregative_cost(parse_matrix(c["R"], p + ".cost.R"), v, M);
    } else if (ctype == "quadratic") {
      if (!c.contains("Q_self")) fail(p + ".cost.Q_self", "required for quadratic costs");
      cost.Q_self = parse_matrix(c["Q_self"], p + ".cost.Q_self");
      if (c.contains("Q_cross")) {
        for (auto it = c["Q_cross"].begin(); it != c["Q_cross"].end(); ++it) {
          cost.Q_cross[std::stoul(it.key())] = parse_matrix(it.value(), p + ".cost.Q_cross." + it.key());
        }
      }
      if (c.contains("q")) cost.q = parse_vector(c["q"], p + ".cost.q");
    } else {
      fail(p + ".cost.type", "must be 'aggregative' or 'quadratic'");
    }
    if (!a.contains("W")) fail(p + ".W", "required");
    cost.W = parse_matrix(a["W"], p + ".W");
    cost.w = a.contains("w") ? parse_vector(a["w"], p + ".w") : Vector(cost.W.rows(), 0.0);
    if (cost.w.size() != cost.W.rows()) fail(p + ".w", "length must match W");
    if (cost.q.empty()) cost.q = Vector(dyn.B.cols(), 0.0);
    spec.costs.push_back(cost);

    if (a.contains("box")) {
      ConstraintSpec::Box b;
      b.lower = parse_vector(a["box"]["lower"], p + ".box.lower");
      b.upper = parse_vector(a["box"]["upper"], p + ".box.upper");
      if (b.lower.size() != dyn.B.cols() || b.upper.size() != dyn.B.cols())
        fail(p + ".box", "bound length must match the agent input size");
      spec.constraints.boxes[v].push_back(b);
    }
  }
  if (j.contains("coupling")) {
    for (std::size_t r = 0; r < j["coupling"].size(); ++r) {
      const std::string p = "coupling[" + std::to_string(r) + "]";
      ConstraintSpec::CouplingStage cs;
      cs.C = parse_matrix(j["coupling"][r]["C"], p + ".C");
      cs.c = parse_vector(j["coupling"][r]["c"], p + ".c");
      if (cs.C.rows() != cs.c.size()) fail(p, "C row count must match c length");
      spec.constraints.coupling.push_back(cs);
    }
  }
  if (j.contains("simulation")) {
    const json& s = j["simulation"];
    if (s.contains("x0")) sc.x0 = parse_vector(s["x0"], "simulation.x0");
    sc.steps = s.value("steps", std::size_t{100});
    sc.seed = s.value("seed", std::uint64_t{0});
  }
  if (j.contains("certificate")) {
    sc.certificate_delta = j["certificate"].value("delta", 1e-6);
    sc.certificate_budget = j["certificate"].value("budget", 50000);
  }
  sc.spec = spec;
  // dimension cross-checks happen in condense; probe early for clear errors
  try {
    global_view(spec);
  } catch (const DimensionError& e) {
    throw ScenarioError(std::string("scenario: inconsistent dimensions: ") + e.what());
  }
  return sc;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario_json(ss.str());
}

std::string scenario_to_json(const Scenario& sc) {
  json j;
  j["name"] = sc.name;
  j["horizon"] = sc.spec.horizon;
  j["mode"] = sc.spec.mode == GameMode::coupled ? "coupled" : "decoupled";
  json agents = json::array();
  for (std::size_t v = 0; v < sc.spec.n_agents(); ++v) {
    json a;
    a["A"] = matrix_to_json(sc.spec.dynamics[v].A);
    a["B"] = matrix_to_json(sc.spec.dynamics[v].B);
    a["W"] = matrix_to_json(sc.spec.costs[v].W);
    a["w"] = sc.spec.costs[v].w;
    json c;
    c["type"] = "quadratic";
    c["Q_self"] = matrix_to_json(sc.spec.costs[v].Q_self);
    json qc = json::object();
    for (const auto& [k, m] : sc.spec.costs[v].Q_cross) qc[std::to_string(k)] = matrix_to_json(m);
    c["Q_cross"] = qc;
    c["q"] = sc.spec.costs[v].q;
    a["cost"] = c;
    if (v < sc.spec.constraints.boxes.size() && !sc.spec.constraints.boxes[v].empty()) {
      a["box"] = {{"lower", sc.spec.constraints.boxes[v][0].lower},
                  {"upper", sc.spec.constraints.boxes[v][0].upper}};
    }
    agents.push_back(a);
  }
  j["agents"] = agents;
  if (!sc.spec.constraints.coupling.empty()) {
    json cj = json::array();
    for (const auto& cs : sc.spec.constraints.coupling) {
      cj.push_back({{"C", matrix_to_json(cs.C)}, {"c", cs.c}});
    }
    j["coupling"] = cj;
  }
  j["simulation"] = {{"x0", sc.x0}, {"steps", sc.steps}, {"seed", sc.seed}};
  j["certificate"] = {{"delta", sc.certificate_delta}, {"budget", sc.certificate_budget}};
  return j.dump(2);
}

Scenario load_scenario(const std::string& path_or_builtin, std::uint64_t seed_override) {
  if (is_builtin(path_or_builtin)) return load_builtin(path_or_builtin, seed_override);
  std::ifstream probe(path_or_builtin);
  if (!probe) {
    std::string names;
    for (const auto& n : builtin_names()) names += " " + n;
    throw ScenarioError("'" + path_or_builtin + "' is neither a readable file nor a builtin; builtins:" + names);
  }
  return load_scenario_file(path_or_builtin);
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot open output file '" + path + "'");
  const std::size_t nx = traj.states.empty() ? 0 : traj.states[0].size();
  const std::size_t nu = traj.inputs.empty() ? 0 : traj.inputs[0].size();
  out << "t";
  for (std::size_t i = 0; i < nx; ++i) out << ",x" << i;
  for (std::size_t i = 0; i < nu; ++i) out << ",u" << i;
  out << ",residual,min_slack,V\n";
  out.precision(17);
  for (std::size_t t = 0; t < traj.states.size(); ++t) {
    out << t;
    for (std::size_t i = 0; i < nx; ++i) out << "," << traj.states[t][i];
    const bool has_step = t < traj.inputs.size();
    for (std::size_t i = 0; i < nu; ++i) {
      out << ",";
      if (has_step) out << traj.inputs[t][i];
      else out << "nan";
    }
    out << "," << (has_step ? traj.residuals[t] : std::nan("")) << ","
        << (has_step ? traj.min_slacks[t] : std::nan("")) << ","
        << (t < traj.lyapunov.size() ? traj.lyapunov[t] : std::nan("")) << "\n";
  }
}

void write_region_csv(const std::string& path, const RegionGrid& grid) {
  std::ofstream out(path);
  if (!out) throw ScenarioError("cannot open output file '" + path + "'");
  out << "A,W,feasible\n";
  out.precision(17);
  for (std::size_t ia = 0; ia < grid.A_values.size(); ++ia)
    for (std::size_t iw = 0; iw < grid.W_values.size(); ++iw)
      out << grid.A_values[ia] << "," << grid.W_values[iw] << "," << grid.feasible[ia][iw] << "\n";
}

std::string certificate_to_json(const std::vector<CertificateResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    json j;
    j["feasible"] = r.feasible;
    j["P"] = matrix_to_json(r.P);
    j["lambda1"] = r.lambda1;
    j["lambda2"] = r.lambda2;
    j["epsilon"] = r.epsilon;
    j["achieved_max_eig"] = r.achieved_max_eig;
    j["iterations"] = r.iterations;
    j["subgradient_norm"] = r.subgradient_norm;
    if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
    arr.push_back(j);
  }
  return arr.dump(2);
}

std::string summary_to_json(const SimulationSummary& s) {
  json j;
  j["diverged"] = s.diverged;
  j["final_norm"] = s.final_norm;
  j["max_constraint_violation"] = s.max_constraint_violation;
  if (s.distance_to_xs >= 0.0) j["distance_to_xs"] = s.distance_to_xs;
  return j.dump(2);
}

}  // namespace rhg
