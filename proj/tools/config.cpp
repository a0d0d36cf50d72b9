#include "config.hpp"

#include <cmath>
#include <limits>
#include <set>

namespace shapedyn::cli {

namespace {

using nlohmann::json;

constexpr double kRequired = std::numeric_limits<double>::quiet_NaN();

struct KindInfo {
  ExperimentKind kind;
  const char* name;
  int d;  // default system
  int n;
};

const KindInfo kKinds[] = {
    {ExperimentKind::ClassicalGeodesic, "classical-geodesic", 3, 4},
    {ExperimentKind::NewtonGauge, "newton-gauge", 3, 4},
    {ExperimentKind::ConformalInvariance, "conformal-invariance", 3, 4},
    {ExperimentKind::QuantumEvolve, "quantum-evolve", 1, 3},
    {ExperimentKind::Equilibrium, "equilibrium", 1, 3},
    {ExperimentKind::GaugeInvariance, "gauge-invariance", 3, 3},
    {ExperimentKind::Potentials, "potentials", 3, 3},
    {ExperimentKind::ConditionalCheck, "conditional-check", 1, 2},
    {ExperimentKind::FiberCheck, "fiber-check", 3, 3},
};

const KindInfo& info(ExperimentKind kind) {
  for (const KindInfo& k : kKinds)
    if (k.kind == kind) return k;
  throw Error(ErrorKind::InvalidArgument, "unknown experiment kind");
}

bool is_integer(double x) { return std::isfinite(x) && std::floor(x) == x; }

std::optional<ConformalKind> parse_conformal_name(const std::string& s) {
  if (s == "A" || s == "a") return ConformalKind::A;
  if (s == "B" || s == "b") return ConformalKind::B;
  if (s == "C" || s == "c") return ConformalKind::C;
  if (s == "D" || s == "d") return ConformalKind::D;
  if (s == "G" || s == "g") return ConformalKind::G;
  return std::nullopt;
}

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& known,
                    std::vector<std::string>& out) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) out.push_back((path.empty() ? "" : path + ".") + key + ": unknown key");
  }
}

// Reads a d x N matrix given as N rows of d numbers.
std::optional<Configuration> read_matrix(const json& j, int d, int n, const std::string& path,
                                         std::vector<std::string>& out) {
  if (!j.is_array() || static_cast<int>(j.size()) != n) {
    out.push_back(path + ": expected " + std::to_string(n) + " particle rows");
    return std::nullopt;
  }
  Configuration q(d, n);
  for (int a = 0; a < n; ++a) {
    if (!j[a].is_array() || static_cast<int>(j[a].size()) != d) {
      out.push_back(path + "[" + std::to_string(a) + "]: expected " + std::to_string(d) + " coordinates");
      return std::nullopt;
    }
    for (int i = 0; i < d; ++i) {
      if (!j[a][i].is_number()) {
        out.push_back(path + "[" + std::to_string(a) + "]: coordinates must be numbers");
        return std::nullopt;
      }
      q(i, a) = j[a][i].get<double>();
    }
  }
  return q;
}

struct Parsed {
  ExperimentConfig config;
  std::vector<std::string> diagnostics;
};

void read_block(const json& doc, const char* name, const std::vector<FieldSpec>& fields,
                std::map<std::string, double>& values, std::vector<std::string>& out) {
  for (const FieldSpec& f : fields)
    if (!std::isnan(f.fallback)) values[f.key] = f.fallback;
  if (!doc.contains(name)) {
    for (const FieldSpec& f : fields)
      if (std::isnan(f.fallback)) out.push_back(std::string(name) + "." + f.key + ": required field is missing");
    return;
  }
  const json& block = doc[name];
  if (!block.is_object()) {
    out.push_back(std::string(name) + ": expected an object");
    return;
  }
  std::set<std::string> known;
  for (const FieldSpec& f : fields) known.insert(f.key);
  reject_unknown(block, name, known, out);
  for (const FieldSpec& f : fields) {
    const std::string path = std::string(name) + "." + f.key;
    if (!block.contains(f.key)) {
      if (std::isnan(f.fallback)) out.push_back(path + ": required field is missing");
      continue;
    }
    const json& v = block[f.key];
    if (!v.is_number()) {
      out.push_back(path + ": expected a number");
      continue;
    }
    const double x = v.get<double>();
    if (!(x > 0.0) || !std::isfinite(x)) {
      out.push_back(path + ": must be positive");
      continue;
    }
    if (f.integer && !is_integer(x)) {
      out.push_back(path + ": must be an integer");
      continue;
    }
    values[f.key] = x;
  }
}

Parsed parse(const json& doc) {
  Parsed p;
  auto& out = p.diagnostics;
  ExperimentConfig& c = p.config;
  if (!doc.is_object()) {
    out.push_back("experiment: expected an object");
    return p;
  }
  reject_unknown(doc, "", {"kind", "seed", "system", "conformal", "initial", "numerics", "tolerances", "output"},
                 out);

  if (!doc.contains("kind") || !doc["kind"].is_string()) {
    out.push_back("kind: required, one of the experiment kinds");
    return p;
  }
  const auto kind = parse_kind(doc["kind"].get<std::string>());
  if (!kind) {
    out.push_back("kind: unknown experiment kind '" + doc["kind"].get<std::string>() + "'");
    return p;
  }
  c.kind = *kind;
  c.dimension = info(c.kind).d;
  c.particles = info(c.kind).n;

  if (doc.contains("seed")) {
    const json& seed = doc["seed"];
    if (seed.is_number_unsigned() || (seed.is_number_integer() && seed.get<long long>() >= 0)) {
      c.seed = seed.get<std::uint64_t>();
    } else {
      out.push_back("seed: expected a nonnegative integer");
    }
  }

  if (doc.contains("system")) {
    const json& s = doc["system"];
    if (!s.is_object()) {
      out.push_back("system: expected an object");
    } else {
      reject_unknown(s, "system", {"d", "N", "masses", "mass_range"}, out);
      if (s.contains("d")) {
        if (s["d"].is_number_integer() && s["d"].get<int>() >= 1 && s["d"].get<int>() <= 3) c.dimension = s["d"];
        else out.push_back("system.d: must be 1, 2 or 3");
      }
      if (s.contains("N")) {
        if (s["N"].is_number_integer() && s["N"].get<int>() >= 2) c.particles = s["N"];
        else out.push_back("system.N: must be an integer >= 2");
      }
      if (s.contains("masses") && s.contains("mass_range")) {
        out.push_back("system.masses: give either masses or mass_range, not both");
      }
      if (s.contains("masses")) {
        const json& m = s["masses"];
        if (!m.is_array() || static_cast<int>(m.size()) != c.particles) {
          out.push_back("system.masses: expected " + std::to_string(c.particles) + " values");
        } else {
          Eigen::VectorXd masses(c.particles);
          bool ok = true;
          for (int a = 0; a < c.particles; ++a) {
            ok = ok && m[a].is_number() && m[a].get<double>() > 0.0 && std::isfinite(m[a].get<double>());
            if (ok) masses(a) = m[a].get<double>();
          }
          if (ok) c.masses = masses;
          else out.push_back("system.masses: every mass must be a positive number");
        }
      }
      if (s.contains("mass_range")) {
        const json& r = s["mass_range"];
        if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number() ||
            !(r[0].get<double>() > 0.0) || !(r[1].get<double>() >= r[0].get<double>())) {
          out.push_back("system.mass_range: expected [lo, hi] with 0 < lo <= hi");
        } else {
          c.mass_range = {r[0].get<double>(), r[1].get<double>()};
        }
      }
    }
  }

  if (doc.contains("conformal")) {
    const json& f = doc["conformal"];
    if (f.is_string()) {
      const auto k = parse_conformal_name(f.get<std::string>());
      if (k) c.conformal = ConformalFactorSpec::of(*k);
      else out.push_back("conformal: expected one of A, B, C, D, G or {\"constant\": c}");
    } else if (f.is_object() && f.size() == 1 && f.contains("constant") && f["constant"].is_number() &&
               f["constant"].get<double>() > 0.0) {
      c.conformal = ConformalFactorSpec::constant_value(f["constant"].get<double>());
    } else {
      out.push_back("conformal: expected one of A, B, C, D, G or {\"constant\": c} with c > 0");
    }
  }
  if (c.conformal.kind == ConformalKind::C && c.dimension != 3) out.push_back("conformal: f_c requires d=3");

  // Kind-specific restrictions on the system.
  switch (c.kind) {
    case ExperimentKind::QuantumEvolve:
    case ExperimentKind::Equilibrium:
      if (c.dimension != 1 || c.particles != 3) {
        out.push_back("system: " + std::string(to_string(c.kind)) + " runs on the N=3, d=1 circle chart");
      }
      if (c.conformal.kind != ConformalKind::B && c.conformal.kind != ConformalKind::Constant) {
        out.push_back("conformal: the circle of three bodies on a line passes through collisions; use B or a constant");
      }
      break;
    case ExperimentKind::GaugeInvariance:
    case ExperimentKind::FiberCheck:
      if (c.dimension == 1 || c.particles != 3) {
        out.push_back("system: " + std::string(to_string(c.kind)) + " runs on the N=3 triangle chart (d=2 or 3)");
      }
      break;
    case ExperimentKind::Potentials:
      if (c.dimension != 3 || c.particles != 3) out.push_back("system: potentials runs on N=3, d=3");
      break;
    case ExperimentKind::ConformalInvariance:
      if (c.dimension != 3) out.push_back("system: conformal-invariance covers all five kinds and needs d=3");
      break;
    default: break;
  }

  if (doc.contains("initial")) {
    const json& init = doc["initial"];
    const bool classical = c.kind == ExperimentKind::ClassicalGeodesic || c.kind == ExperimentKind::NewtonGauge;
    if (!classical) {
      out.push_back("initial: only classical-geodesic and newton-gauge take initial data");
    } else if (!init.is_object()) {
      out.push_back("initial: expected an object");
    } else {
      reject_unknown(init, "initial", {"preset", "q", "v"}, out);
      if (init.contains("preset")) {
        if (init["preset"].is_string()) c.initial.preset = init["preset"].get<std::string>();
        else out.push_back("initial.preset: expected a string");
      }
      const std::string& preset = c.initial.preset;
      if (preset != "random" && preset != "equilateral-triangle" && preset != "explicit") {
        out.push_back("initial.preset: expected random, equilateral-triangle or explicit");
      }
      if (preset == "equilateral-triangle" && (c.particles != 3 || c.dimension < 2)) {
        out.push_back("initial.preset: equilateral-triangle needs N=3 and d >= 2");
      }
      if (preset == "explicit" && !init.contains("q")) out.push_back("initial.q: required by the explicit preset");
      if (init.contains("q")) {
        if (preset != "explicit") out.push_back("initial.q: only used by the explicit preset");
        else c.initial.q = read_matrix(init["q"], c.dimension, c.particles, "initial.q", out);
      }
      if (init.contains("v")) c.initial.v = read_matrix(init["v"], c.dimension, c.particles, "initial.v", out);
    }
  }

  read_block(doc, "numerics", numeric_fields(c.kind), c.numerics, out);
  read_block(doc, "tolerances", tolerance_fields(c.kind), c.tolerances, out);

  if (c.kind == ExperimentKind::Equilibrium && c.numerics.count("grid") && c.numerics.count("bins")) {
    const int grid = c.count("grid"), bins = c.count("bins");
    if (grid % bins != 0) out.push_back("numerics.bins: must divide numerics.grid");
  }
  if (c.kind == ExperimentKind::Equilibrium && c.numerics.count("T") && c.numerics.count("frame_dt")) {
    // The RK4 step is two frames, so T must be a whole number of steps.
    const double steps = c.num("T") / (2.0 * c.num("frame_dt"));
    if (std::abs(steps - std::round(steps)) > 1e-9 * steps) {
      out.push_back("numerics.T: must be a multiple of 2 * numerics.frame_dt");
    }
  }

  if (doc.contains("output")) {
    const json& o = doc["output"];
    if (!o.is_object()) {
      out.push_back("output: expected an object");
    } else {
      reject_unknown(o, "output", {"format", "stride"}, out);
      if (o.contains("format")) {
        if (o["format"] == "csv") c.format = OutputFormat::Csv;
        else if (o["format"] == "jsonl") c.format = OutputFormat::JsonLines;
        else out.push_back("output.format: expected csv or jsonl");
      }
      if (o.contains("stride")) {
        if (o["stride"].is_number_integer() && o["stride"].get<int>() >= 1) c.stride = o["stride"];
        else out.push_back("output.stride: must be a positive integer");
      }
    }
  }
  return p;
}

}  // namespace

const char* to_string(ExperimentKind kind) { return info(kind).name; }

std::optional<ExperimentKind> parse_kind(const std::string& name) {
  for (const KindInfo& k : kKinds)
    if (name == k.name) return k.kind;
  return std::nullopt;
}

std::vector<std::string> kind_names() {
  std::vector<std::string> out;
  for (const KindInfo& k : kKinds) out.emplace_back(k.name);
  return out;
}

const std::vector<FieldSpec>& numeric_fields(ExperimentKind kind) {
  static const std::map<ExperimentKind, std::vector<FieldSpec>> table = {
      {ExperimentKind::ClassicalGeodesic,
       {{"T", 1.0, false, "integration time"}, {"h", 1e-3, false, "RK4 step"}}},
      {ExperimentKind::NewtonGauge,
       {{"T", 1.0, false, "geodesic integration time"},
        {"h", 1e-3, false, "geodesic RK4 step"},
        {"newton_h", 1e-3, false, "velocity-Verlet step in Newton time"}}},
      {ExperimentKind::ConformalInvariance,
       {{"trials", 1000, true, "random (configuration, transform) pairs per kind"}}},
      {ExperimentKind::QuantumEvolve,
       {{"grid", kRequired, true, "circle chart points"},
        {"dt", 1e-3, false, "Crank-Nicolson step"},
        {"steps", 1000, true, "steps per norm-drift window"},
        {"windows", 1, true, "number of windows"},
        {"modes", 4, true, "largest |k| in the spectrum check"},
        {"hbar", 1.0, false, "reduced Planck constant"}}},
      {ExperimentKind::Equilibrium,
       {{"grid", 256, true, "circle chart points"},
        {"samples", 100000, true, "ensemble size"},
        {"T", 1.0, false, "evolution time"},
        {"frame_dt", 5e-3, false, "wave-function frame spacing (RK4 step is twice this)"},
        {"bins", 64, true, "histogram bins for the TV distance"}}},
      {ExperimentKind::GaugeInvariance,
       {{"points", 1000, true, "sample configurations"}, {"grid", 16, true, "triangle chart points per axis"}}},
      {ExperimentKind::Potentials,
       {{"configs", 100, true, "random configurations"},
        {"fd_step", 4e-3, false, "relative step of the finite-difference V2"},
        {"curvature_step", 1e-3, false, "relative step of the finite-difference curvature"},
        {"residual_step", 1e-2, false, "reference step of the stationary residual"},
        {"residual_samples", 20, true, "shape samples per residual"}}},
      {ExperimentKind::ConditionalCheck,
       {{"grid", 64, true, "points per axis of the product grid"},
        {"samples", 100000, true, "draws from |Psi|^2"},
        {"min_count", 1000, true, "draws an environment value needs to be checked"},
        {"half_width", 12.0, false, "grid covers [-half_width, half_width]^2"}}},
      {ExperimentKind::FiberCheck,
       {{"transforms", 100, true, "random fiber directions"}}},
  };
  return table.at(kind);
}

const std::vector<FieldSpec>& tolerance_fields(ExperimentKind kind) {
  static const std::map<ExperimentKind, std::vector<FieldSpec>> table = {
      {ExperimentKind::ClassicalGeodesic,
       {{"momentum", 1e-6, false, "max normalized |P|, |J|, |D|"},
        {"speed_drift", 1e-8, false, "relative g-speed drift"}}},
      {ExperimentKind::NewtonGauge,
       {{"energy", 1e-8, false, "max |E| along the reparametrized geodesic"},
        {"path", 1e-4, false, "shape-path discrepancy to the Newtonian run"}}},
      {ExperimentKind::ConformalInvariance,
       {{"invariance", 1e-10, false, "line-element invariance, relative"},
        {"homogeneity", 1e-10, false, "f(lambda q) = lambda^-2 f(q), relative"},
        {"det_scaling", 1e-10, false, "det M(lambda q) = lambda^6 det M(q), relative"}}},
      {ExperimentKind::QuantumEvolve,
       {{"norm_drift", 1e-8, false, "norm drift per window"},
        {"spectrum", 1e-4, false, "relative eigenvalue error (absolute for k = 0)"}}},
      {ExperimentKind::Equilibrium,
       {{"tv", 0.02, false, "TV distance to |psi_T|^2"}, {"node_loss", 1e-3, false, "fraction of lost points"}}},
      {ExperimentKind::GaugeInvariance, {{"velocity", 1e-10, false, "max velocity deviation under F Psi and c Psi"}}},
      {ExperimentKind::Potentials,
       {{"v2", 1e-4, false, "V2 dual agreement, relative"},
        {"curvature", 1e-3, false, "R_g dual agreement, relative"},
        {"constant", 1e-10, false, "V2 and R_g for constant f"},
        {"residual", 1e-3, false, "stationary residual at the reference step"},
        {"order_low", 3.5, false, "lower bound of the residual halving ratio"},
        {"order_high", 4.5, false, "upper bound of the residual halving ratio"}}},
      {ExperimentKind::ConditionalCheck,
       {{"tv", 0.05, false, "worst-bin TV on the entangled pair"},
        {"control_sigma", 3.0, false, "product control, pooled sampling-noise deviations"}}},
      {ExperimentKind::FiberCheck,
       {{"variation", 1e-10, false, "max relative variation of |Psi1|^2"},
        {"control_min", 0.1, false, "smallest variation the control must show"}}},
  };
  return table.at(kind);
}

std::vector<std::string> validate(const nlohmann::json& doc) { return parse(doc).diagnostics; }

ExperimentConfig parse_config(const nlohmann::json& doc) {
  Parsed p = parse(doc);
  if (!p.diagnostics.empty()) {
    std::string msg;
    for (const auto& d : p.diagnostics) msg += (msg.empty() ? "" : "; ") + d;
    throw Error(ErrorKind::ConfigInvalid, msg);
  }
  return p.config;
}

}  // namespace shapedyn::cli
