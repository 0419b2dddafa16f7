#pragma once

// Diffusion constant sigma^2 = 1/d + (2/d) sum_k E <e^d, w_1 r_bar ... w_k r_bar e^d>
// and numeric certification of the contraction hypothesis.

#include "semiflex/disorder.hpp"
#include "semiflex/rotgroup.hpp"
#include "semiflex/tensor.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace semiflex {

struct DiffusionEstimate {
  double sigma2 = 0.0;
  int K = 0;                     // number of series terms summed
  double tail_bound = 0.0;       // certified bound on the omitted terms
  std::optional<double> mc_se;   // ergodic-averaging standard error
  std::size_t L = 1;             // number of shifted windows averaged
  double rho = 0.0;              // ||r_bar||_op
};

struct Sigma2Options {
  std::optional<int> K;          // fixed truncation; otherwise chosen from `tolerance`
  double tolerance = 1e-8;       // target tail bound
  std::size_t L = 10000;         // ergodic window count (ignored for constant disorder)
  int threads = 1;
};

/// Series evaluation with thermal expectations taken exactly (r_i -> r_bar)
/// and the disorder expectation replaced by an average over L shifts of the
/// quenched realization. Throws "series not certified" when ||r_bar||_op >= 1.
DiffusionEstimate sigma2_series(const Matrix& rbar, const DisorderModel& omega, const Sigma2Options& opt = {});
DiffusionEstimate sigma2_series(const RotationLaw& q, const DisorderModel& omega, const Sigma2Options& opt = {});

/// 1/d + (2/d) <e^d, w_bar r_bar (1 - w_bar r_bar)^{-1} e^d> for iid disorder.
double sigma2_iid_closed(const Matrix& rbar, const Matrix& omega_bar);

/// 1/d + 2c / (d (1 - c)) for r_bar = c I and constant identity disorder.
double sigma2_cI(double c, int d);

/// (2/d) rho^{K+1} / (1 - rho).
double tail_bound(double rho, int d, int K);

/// Smallest K with tail_bound(rho, d, K) < tol.
int truncation_for(double rho, int d, double tol);

enum class Verdict { pass, fail, inconclusive };
std::string to_string(Verdict v);

struct PowerProbe {
  int m = 0;
  double rbar_root_norm = 0.0;  // ||r_bar^m||_op^{1/m}
  double hs0_root_norm = 0.0;   // ||(E[r (x) r]|_{Hs0})^m||_op^{1/m}
};

struct HypothesisReport {
  double rho1 = 0.0;            // ||r_bar||_op
  double rho2 = 0.0;            // ||E[r (x) r] restricted to Hs0||_op
  std::vector<PowerProbe> generalized;
  SpectralRadius rbar_radius;
  SpectralRadius hs0_radius;
  double margin = 1e-9;
  bool monotone = true;         // root norms non-increasing along doubling m
  bool from_mc = false;
  double mc_se = 0.0;           // HS norm of the entrywise SE (MC moments only)
  double hs0_leakage = 0.0;
  Verdict verdict = Verdict::fail;
};

/// Both contraction quantities. Exact moments give pass/fail; Monte Carlo
/// moments give inconclusive when the 3-SE interval straddles 1 - margin.
HypothesisReport check_hypothesis(const Moments& m, int max_power = 64, double margin = 1e-9);
HypothesisReport check_hypothesis(const MomentEstimate& m, int max_power = 64, double margin = 1e-9);
HypothesisReport check_hypothesis(const RotationLaw& q, int max_power = 64, double margin = 1e-9);

nlohmann::json to_json(const DiffusionEstimate& e);
nlohmann::json to_json(const HypothesisReport& r);

}  // namespace semiflex
