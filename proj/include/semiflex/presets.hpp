#pragma once

// Named experiment configs and the --law / --disorder shorthands.

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace semiflex {

/// Config document for a preset name; throws std::invalid_argument listing
/// the known names otherwise.
nlohmann::json preset(const std::string& name);
std::vector<std::string> preset_names();

/// Law spec for a shorthand (haar, dirac-identity, window-pi10, window-pm45,
/// cube-group, so3-uniform-angle, cI-half). `dim` applies where the law
/// does not fix it; default 2.
nlohmann::json law_shorthand(const std::string& name, std::optional<int> dim = std::nullopt);
/// Disorder spec for a shorthand (constant-identity, iid-pm45).
nlohmann::json disorder_shorthand(const std::string& name, std::optional<int> dim = std::nullopt);

/// Right end a of [0, a] such that the conjugation-invariant SO(3) law with
/// angle uniform on [0, a] has r_bar = c I, i.e. sin(a) / a = (3c - 1) / 2.
double ci_window_for(double c);

}  // namespace semiflex
