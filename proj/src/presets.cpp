#include "semiflex/presets.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace semiflex {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

json window_pi10() { return {{"kind", "so2-window"}, {"a", -kPi / 10}, {"b", kPi / 10}}; }

json iid_pm45() {
  return {{"kind", "iid"}, {"law", {{"kind", "so2-atoms"}, {"angles", {-kPi / 4, kPi / 4}}, {"weights", {0.5, 0.5}}}}};
}

json constant_identity(int d) { return {{"kind", "constant"}, {"d", d}}; }

json ci_law(double c) {
  return {{"kind", "so3-conjugation-invariant"}, {"angle", {{"type", "uniform"}, {"lo", 0.0}, {"hi", ci_window_for(c)}}}};
}

json so3_uniform_angle() {
  return {{"kind", "so3-conjugation-invariant"}, {"angle", {{"type", "uniform"}, {"lo", 0.0}, {"hi", kPi}}}};
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> out;
  for (int k = lo; k <= hi; ++k) out.push_back(k);
  return out;
}

json base(json law, json disorder, int d) {
  json v0 = json::array();
  for (int i = 0; i < d; ++i) v0.push_back(i == d - 1 ? 1.0 : 0.0);
  return {{"law", std::move(law)},
          {"disorder", std::move(disorder)},
          {"v0", v0},
          {"n", 10000},
          {"replicas", 10000},
          {"seed", 1},
          {"checkpoints", {100, 1000, 10000}},
          {"tolerance", 1e-10},
          {"L", 10000},
          {"cutoff", 4096},
          {"ks", {1, 2, 3, 5, 10, 20, 50, 100}}};
}

}  // namespace

double ci_window_for(double c) {
  const double target = (3.0 * c - 1.0) / 2.0;
  if (!(target > 0.0 && target < 1.0)) throw std::domain_error("ci_window_for: need 1/3 < c < 1");
  auto f = [target](double a) { return std::sin(a) / a - target; };
  boost::math::tools::eps_tolerance<double> tol(52);
  const auto [lo, hi] = boost::math::tools::bisect(f, 1e-8, kPi, tol);
  return 0.5 * (lo + hi);
}

std::vector<std::string> preset_names() {
  return {"figure-1", "haar-d2", "haar-d3", "cI-half-d3", "window-iid-pm45", "cube-group", "so3-uniform-angle",
          "straight-rod"};
}

json preset(const std::string& name) {
  json cfg;
  if (name == "figure-1") {
    cfg = base(window_pi10(), constant_identity(2), 2);
    cfg["v0"] = {1.0, 0.0};
    cfg["ks"] = range(1, 500);
  } else if (name == "haar-d2") {
    cfg = base({{"kind", "haar"}, {"d", 2}}, constant_identity(2), 2);
  } else if (name == "haar-d3") {
    cfg = base({{"kind", "haar"}, {"d", 3}}, constant_identity(3), 3);
  } else if (name == "cI-half-d3") {
    cfg = base(ci_law(0.5), constant_identity(3), 3);
  } else if (name == "window-iid-pm45") {
    cfg = base(window_pi10(), iid_pm45(), 2);
    cfg["ks"] = range(1, 500);
  } else if (name == "cube-group") {
    cfg = base({{"kind", "cube-group"}}, constant_identity(3), 3);
  } else if (name == "so3-uniform-angle") {
    cfg = base(so3_uniform_angle(), constant_identity(3), 3);
    cfg["cutoff"] = 65536;
    cfg["ks"] = {2, 3, 5, 10, 20, 50};
  } else if (name == "straight-rod") {
    cfg = base({{"kind", "dirac"}, {"d", 2}}, constant_identity(2), 2);
    // Nominal reference: the rod has no diffusive limit.
    cfg["sigma2_reference"] = 1.0;
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown preset '" + name + "' (known: " + known + ")");
  }
  cfg["preset"] = name;
  return cfg;
}

json law_shorthand(const std::string& name, std::optional<int> dim) {
  const int d = dim.value_or(2);
  if (name == "haar") return {{"kind", "haar"}, {"d", d}};
  if (name == "dirac-identity") return {{"kind", "dirac"}, {"d", d}};
  if (name == "window-pi10") return window_pi10();
  if (name == "cube-group") return {{"kind", "cube-group"}};
  if (name == "so3-uniform-angle") return so3_uniform_angle();
  if (name == "cI-half") return ci_law(0.5);
  throw std::invalid_argument("unknown law shorthand '" + name +
                              "' (known: haar, dirac-identity, window-pi10, cube-group, so3-uniform-angle, cI-half)");
}

json disorder_shorthand(const std::string& name, std::optional<int> dim) {
  if (name == "constant-identity") return constant_identity(dim.value_or(2));
  if (name == "iid-pm45") return iid_pm45();
  throw std::invalid_argument("unknown disorder shorthand '" + name + "' (known: constant-identity, iid-pm45)");
}

}  // namespace semiflex
