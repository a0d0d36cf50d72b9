#include "presets.hpp"

namespace shapedyn::cli {

namespace {

using nlohmann::json;

std::vector<Preset> build() {
  const json four_bodies = {{"d", 3}, {"N", 4}, {"mass_range", {0.5, 2.0}}};
  const json triangle = {{"d", 3}, {"N", 3}, {"mass_range", {0.5, 2.0}}};
  return {
      {"criterion-1", "acceptance criterion 1: horizontal geodesic keeps P, J, D at zero",
       {{"kind", "classical-geodesic"},
        {"seed", 1},
        {"system", four_bodies},
        {"conformal", "B"},
        {"initial", {{"preset", "random"}}},
        {"numerics", {{"T", 1.0}, {"h", 1e-3}}},
        {"output", {{"format", "csv"}, {"stride", 10}}}}},
      {"criterion-2", "acceptance criterion 2: Newton gauge has zero energy and the same shape path",
       {{"kind", "newton-gauge"},
        {"seed", 1},
        {"system", four_bodies},
        {"conformal", "B"},
        {"numerics", {{"T", 1.0}, {"h", 1e-3}, {"newton_h", 1e-3}}},
        {"output", {{"format", "csv"}, {"stride", 10}}}}},
      {"criterion-3", "acceptance criterion 3: similarity invariance of all five conformal factors",
       {{"kind", "conformal-invariance"},
        {"seed", 3},
        {"system", four_bodies},
        {"numerics", {{"trials", 1000}}}}},
      {"criterion-4", "acceptance criterion 4: Crank-Nicolson unitarity and the circle spectrum",
       {{"kind", "quantum-evolve"},
        {"seed", 4},
        {"system", {{"d", 1}, {"N", 3}}},
        {"conformal", "B"},
        {"numerics", {{"grid", 256}, {"dt", 1e-3}, {"steps", 1000}, {"modes", 4}}}}},
      {"criterion-5", "acceptance criterion 5: equivariance of |psi|^2 under the guidance flow",
       {{"kind", "equilibrium"},
        {"seed", 2024},
        {"system", {{"d", 1}, {"N", 3}}},
        {"conformal", "B"},
        {"numerics", {{"grid", 256}, {"samples", 100000}, {"T", 1.0}, {"frame_dt", 5e-3}, {"bins", 64}}}}},
      {"criterion-6", "acceptance criterion 6: velocities unchanged by positive factors and constants",
       {{"kind", "gauge-invariance"}, {"seed", 6}, {"system", triangle}, {"conformal", "B"}, {"numerics", {{"points", 1000}}}}},
      {"criterion-7", "acceptance criterion 7: emergent potentials, curvature and stationary residuals",
       {{"kind", "potentials"}, {"seed", 7}, {"system", triangle}, {"conformal", "B"}, {"numerics", {{"configs", 100}}}}},
      {"criterion-8", "acceptance criterion 8: conditional wave function gives the conditional statistics",
       {{"kind", "conditional-check"},
        {"seed", 2718},
        {"numerics", {{"grid", 64}, {"samples", 100000}, {"min_count", 1000}}}}},
      {"criterion-9", "acceptance criterion 9: the gauge-1 lift is constant along fibers",
       {{"kind", "fiber-check"}, {"seed", 9}, {"system", triangle}, {"conformal", "B"}, {"numerics", {{"transforms", 100}}}}},
  };
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = build();
  return all;
}

const Preset* find_preset(const std::string& name) {
  for (const Preset& p : presets())
    if (p.name == name) return &p;
  return nullptr;
}

}  // namespace shapedyn::cli
