#pragma once

// Fourier analysis of noise laws: spectra on SO(2), character spectra of
// conjugation-invariant laws on SO(3), the mixing constant h, the L^2 bound
// on the TV distance to Haar, explicit TV on SO(2), and the 2D sigma^2 oracle.

#include "semiflex/disorder.hpp"
#include "semiflex/rotgroup.hpp"

#include <nlohmann/json.hpp>

#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace semiflex {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// q_hat_m = E e^{i m theta} for m = -M..M.
struct CircleSpectrum {
  int m_max = 0;
  std::vector<std::complex<double>> coeffs;  // index m + m_max
  Envelope envelope;                         // |q_hat_m| <= envelope.at(m)
  double l2_norm_sq = kInf;                  // ||f||_2^2 w.r.t. Haar; inf without an L^2 density

  std::complex<double> at(int m) const;
  nlohmann::json to_json() const;
};

/// c_l = E chi_l(theta) / (2l + 1) for l = 0..L, with
/// chi_l(theta) = sin((2l+1) theta / 2) / sin(theta / 2).
struct CharacterSpectrum {
  int l_max = 0;
  std::vector<double> c;
  bool exact_zero = false;     // c_l = 0 for every l >= 1 (Haar)
  // For l > l_max: |E chi_l| <= head + 2 C S(l), with S(l) = ln(l / l_max)
  // (power 1) or l_max^{1-p} / (p - 1) (power p >= 2). Unavailable when
  // the angle law has no decaying envelope.
  double head = 1.0;
  Envelope angle_envelope;

  /// Certified upper bound on |c_l| for l > l_max.
  double tail_envelope(double l) const;
  nlohmann::json to_json() const;
};

CircleSpectrum so2_spectrum(const RotationLaw& q, int m_max);
CharacterSpectrum so3_char_spectrum(const RotationLaw& q, int l_max);

struct MixingH {
  double h = 1.0;               // sup over computed nontrivial representations
  double upper = 1.0;           // certified upper bound including the tail
  bool certified = false;
  std::string flag;             // reason when not certified
};

MixingH mixing_h(const CircleSpectrum& s);
MixingH mixing_h(const CharacterSpectrum& s);

struct BoundValue {
  double bound = 0.0;           // sqrt(partial + tail)
  double partial = 0.0;
  double tail = 0.0;
};

/// Square root of sum_{m != 0} |q_hat_m|^{2k} (SO(2)) or
/// sum_{l >= 1} (2l+1)^2 |c_l|^{2k} (SO(3)), with a certified tail.
/// Throws std::domain_error "no L2 density at horizon k" when the sum cannot
/// be shown to converge.
BoundValue mixing_bound_detail(const CircleSpectrum& s, int k);
BoundValue mixing_bound_detail(const CharacterSpectrum& s, int k);
double mixing_bound(const CircleSpectrum& s, int k);
double mixing_bound(const CharacterSpectrum& s, int k);

struct TvResult {
  double tv = 0.0;
  double truncation_bound = 0.0;  // bound on |tv - tv_exact| from the Fourier tail
  int m_used = 0;
  int grid = 0;
};

struct TvOptions {
  int grid = 1 << 16;
  double tolerance = 1e-6;        // target bound on the L^1 truncation error
};

/// TV distance between the law of w_1 r_1 ... w_k r_k and Haar on SO(2);
/// `omega_angles` are the k disorder angles. `s` must extend to grid/2 - 1
/// coefficients or be recomputed from the law.
TvResult tv_to_haar_so2(const CircleSpectrum& s, const std::vector<double>& omega_angles, int k,
                        const TvOptions& opt = {});
TvResult tv_to_haar_so2(const RotationLaw& q, const std::vector<double>& omega_angles, int k,
                        const TvOptions& opt = {});

struct OracleResult {
  double sigma2 = 0.0;
  int K = 0;
  double tail_bound = 0.0;
  std::optional<double> mc_se;
  std::string mode;               // "exact" or "monte-carlo"
};

/// sigma^2 = 1/2 + sum_{n>=1} |q_1|^n E cos(Gamma_n + n theta_bar), theta_bar = arg q_1.
/// The disorder expectation is exact for constant, iid, periodic and markov
/// models; mc_samples > 0 forces Monte Carlo over reseeded realizations.
OracleResult sigma2_oracle_2d(const CircleSpectrum& s, const DisorderModel& omega,
                              std::optional<int> K = std::nullopt, std::size_t mc_samples = 0,
                              std::uint64_t seed = 0, double tolerance = 1e-12);

/// |q_1| / (1 - |q_1|).
double drift_bound_2d(const CircleSpectrum& s);

struct MixingReport {
  int dim = 0;
  MixingH h;
  double l2_norm = kInf;
  std::vector<std::pair<int, std::optional<double>>> bounds;  // nullopt where the sum diverges
  nlohmann::json to_json() const;
};

MixingReport mixing_report(const RotationLaw& q, const std::vector<int>& ks, int cutoff);

/// E e^{i m gamma} for a law on SO(2) (any kind).
std::complex<double> circle_characteristic(const RotationLaw& q, int m);

}  // namespace semiflex
