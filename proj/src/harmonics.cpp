#include "semiflex/harmonics.hpp"

#include "semiflex/diffusion.hpp"
#include "semiflex/stats.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace semiflex {

using nlohmann::json;
using cplx = std::complex<double>;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

[[noreturn]] void no_l2(int k) {
  throw std::domain_error("no L2 density at horizon k = " + std::to_string(k) +
                          " (the spectral sum cannot be shown to converge)");
}

// Sup of a unimodal function on [lo, inf).
template <class F>
double unimodal_sup(F g, double lo) {
  double a = lo, b = lo;
  double gb = g(b);
  for (int i = 0; i < 200; ++i) {
    const double c = 2.0 * b;
    const double gc = g(c);
    if (gc <= gb) break;
    a = b;
    b = c;
    gb = gc;
  }
  double hi = 2.0 * b;
  double lo_ = a;
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int i = 0; i < 200 && hi - lo_ > 1e-9 * hi; ++i) {
    const double x1 = hi - phi * (hi - lo_), x2 = lo_ + phi * (hi - lo_);
    if (g(x1) < g(x2)) lo_ = x1; else hi = x2;
  }
  return std::max({g(lo), gb, g(0.5 * (lo_ + hi))}) * (1.0 + 1e-9);
}

// Certified bound on sum_{|m| > M} |q_hat_m|^{2k}.
double circle_tail(const CircleSpectrum& s, int k, int M, double partial1) {
  const Envelope& e = s.envelope;
  if (e.exact_zero) return 0.0;
  if (!e.available()) return kInf;
  double best = kInf;
  if (e.constant < M) {
    const double p2k = 2.0 * e.power * k;
    // In logs: C^{2k} alone overflows for large k.
    best = std::exp(std::log(2.0) + 2.0 * k * std::log(e.constant) + (1.0 - p2k) * std::log(static_cast<double>(M)) -
                    std::log(p2k - 1.0));
  }
  if (std::isfinite(s.l2_norm_sq)) {
    // Parseval: the k = 1 tail is exact; higher k contract by the tail sup.
    const double tail1 = std::max(0.0, s.l2_norm_sq - 1.0 - partial1) + 1e-12 * s.l2_norm_sq;
    const double sup = e.at(M + 1.0);
    best = std::min(best, std::pow(sup, 2.0 * (k - 1)) * tail1);
  }
  return best;
}

double circle_partial(const CircleSpectrum& s, int k, int M) {
  std::vector<double> t(M);
  for (int m = 1; m <= M; ++m) t[m - 1] = std::pow(std::norm(s.at(m)), k);
  return 2.0 * pairwise_sum(t);
}

}  // namespace

// ---------------------------------------------------------------------------

cplx CircleSpectrum::at(int m) const {
  if (std::abs(m) > m_max) throw std::out_of_range("CircleSpectrum: |m| exceeds m_max");
  return coeffs[m + m_max];
}

json CircleSpectrum::to_json() const {
  json c = json::array();
  for (const auto& z : coeffs) c.push_back({z.real(), z.imag()});
  json j{{"m_max", m_max}, {"coeffs", c}};
  j["l2_norm_sq"] = std::isfinite(l2_norm_sq) ? json(l2_norm_sq) : json(nullptr);
  return j;
}

double CharacterSpectrum::tail_envelope(double l) const {
  if (exact_zero) return 0.0;
  if (!angle_envelope.available() || angle_envelope.power <= 0) return 1.0;
  const double C = angle_envelope.constant;
  const double p = angle_envelope.power;
  const double extra = p == 1 ? std::log(l / l_max) : std::pow(static_cast<double>(l_max), 1.0 - p) / (p - 1.0);
  return std::min(1.0, (head + 2.0 * C * extra) / (2.0 * l + 1.0));
}

json CharacterSpectrum::to_json() const {
  json a = json::array();
  for (double x : c) a.push_back({x, 0.0});
  return {{"l_max", l_max}, {"coeffs", a}, {"exact_zero", exact_zero}};
}

std::complex<double> circle_characteristic(const RotationLaw& q, int m) {
  if (q.dim() != 2) throw std::invalid_argument("circle_characteristic: d = 2 laws only");
  switch (q.kind()) {
    case LawKind::haar: return m == 0 ? cplx(1.0) : cplx(0.0);
    case LawKind::so2_window:
    case LawKind::so2_atoms: return q.angle_law()->characteristic(m);
    default: {
      cplx acc = 0.0;
      for (std::size_t i = 0; i < q.support().size(); ++i) {
        acc += q.weights()[i] * std::polar(1.0, m * q.support()[i].angle());
      }
      return acc;
    }
  }
}

CircleSpectrum so2_spectrum(const RotationLaw& q, int m_max) {
  if (q.dim() != 2) throw std::invalid_argument("so2_spectrum: law must live on SO(2)");
  if (m_max < 1) throw std::invalid_argument("so2_spectrum: M must be >= 1");
  CircleSpectrum s;
  s.m_max = m_max;
  s.coeffs.resize(2 * m_max + 1);
  for (int m = 0; m <= m_max; ++m) {
    const cplx z = m == 0 ? cplx(1.0) : circle_characteristic(q, m);
    s.coeffs[m_max + m] = z;
    s.coeffs[m_max - m] = std::conj(z);
  }
  switch (q.kind()) {
    case LawKind::haar:
      s.envelope.exact_zero = true;
      s.l2_norm_sq = 1.0;
      break;
    case LawKind::so2_window: {
      const AngleLaw& a = *q.angle_law();
      s.envelope = a.envelope();
      s.l2_norm_sq = kTwoPi / (a.support_hi() - a.support_lo());
      break;
    }
    default: break;  // atoms: no density, no envelope
  }
  return s;
}

CharacterSpectrum so3_char_spectrum(const RotationLaw& q, int l_max) {
  if (q.dim() != 3) throw std::invalid_argument("so3_char_spectrum: law must live on SO(3)");
  if (l_max < 1) throw std::invalid_argument("so3_char_spectrum: L must be >= 1");
  CharacterSpectrum s;
  s.l_max = l_max;
  s.c.assign(l_max + 1, 0.0);
  s.c[0] = 1.0;
  if (q.kind() == LawKind::haar) {
    s.exact_zero = true;
    return s;
  }
  if (q.kind() == LawKind::dirac && q.conjugation_invariant()) {
    std::fill(s.c.begin(), s.c.end(), 1.0);
    s.head = 2.0 * l_max + 1.0;
    return s;
  }
  if (q.kind() != LawKind::so3_conjugation_invariant) {
    throw std::invalid_argument(
        "so3_char_spectrum: law is not conjugation invariant; use the d = 2 path or Monte Carlo moments");
  }
  const AngleLaw& a = *q.angle_law();
  // E chi_l = 1 + 2 sum_{m=1}^{l} E cos(m theta).
  KahanSum chi;
  chi.add(1.0);
  for (int l = 1; l <= l_max; ++l) {
    chi.add(2.0 * a.characteristic(l).real());
    s.c[l] = chi.value() / (2.0 * l + 1.0);
  }
  s.head = std::abs(chi.value());
  s.angle_envelope = a.envelope();
  if (s.angle_envelope.exact_zero) s.exact_zero = true;
  return s;
}

// ---------------------------------------------------------------------------

MixingH mixing_h(const CircleSpectrum& s) {
  MixingH r;
  double h = 0.0;
  for (int m = 1; m <= s.m_max; ++m) h = std::max(h, std::abs(s.at(m)));
  if (s.envelope.exact_zero) {
    r.h = r.upper = 0.0;
    r.certified = true;
    return r;
  }
  if (!s.envelope.available()) {
    r.h = r.upper = 1.0;
    r.flag = "no decaying envelope (atomic law): sup over all m is 1; max over computed m = " + std::to_string(h);
    return r;
  }
  const double tail = s.envelope.at(s.m_max + 1.0);
  r.h = h;
  r.upper = std::max(h, tail);
  r.certified = tail <= h;
  if (!r.certified) r.flag = "envelope tail exceeds the computed maximum; increase M";
  return r;
}

MixingH mixing_h(const CharacterSpectrum& s) {
  MixingH r;
  if (s.exact_zero) {
    r.h = r.upper = 0.0;
    r.certified = true;
    return r;
  }
  double h = 0.0;
  for (int l = 1; l <= s.l_max; ++l) h = std::max(h, std::abs(s.c[l]));
  if (!s.angle_envelope.available()) {
    r.h = r.upper = 1.0;
    r.flag = "no decaying envelope (atomic angle law); max over computed l = " + std::to_string(h);
    return r;
  }
  const double tail = unimodal_sup([&](double l) { return s.tail_envelope(l); }, s.l_max + 1.0);
  r.h = h;
  r.upper = std::max(h, tail);
  r.certified = tail <= h;
  if (!r.certified) r.flag = "envelope tail exceeds the computed maximum; increase L";
  return r;
}

BoundValue mixing_bound_detail(const CircleSpectrum& s, int k) {
  if (k < 1) throw std::invalid_argument("mixing_bound: k must be >= 1");
  BoundValue b;
  if (s.envelope.exact_zero) return b;
  if (!s.envelope.available()) no_l2(k);
  const int M = s.m_max;
  b.partial = circle_partial(s, k, M);
  const double p1 = k == 1 ? b.partial : circle_partial(s, 1, M);
  b.tail = circle_tail(s, k, M, p1);
  if (!std::isfinite(b.tail)) no_l2(k);
  b.bound = std::sqrt(b.partial + b.tail);
  return b;
}

BoundValue mixing_bound_detail(const CharacterSpectrum& s, int k) {
  if (k < 1) throw std::invalid_argument("mixing_bound: k must be >= 1");
  BoundValue b;
  if (s.exact_zero) return b;
  if (!s.angle_envelope.available() || k < 2) no_l2(k);
  std::vector<double> t(s.l_max);
  for (int l = 1; l <= s.l_max; ++l) t[l - 1] = (2.0 * l + 1) * (2.0 * l + 1) * std::pow(std::abs(s.c[l]), 2.0 * k);
  b.partial = pairwise_sum(t);
  // Summand envelope g is unimodal on [L, inf): sum_{l > L} g(l) <= int_L^inf g + sup g.
  auto g = [&](double x) { return (2.0 * x + 1) * (2.0 * x + 1) * std::pow(s.tail_envelope(x), 2.0 * k); };
  boost::math::quadrature::exp_sinh<double> integrator;
  double err = 0.0;
  const double L = s.l_max;
  const double integral = integrator.integrate([&](double u) { return g(L + u); }, 0.0,
                                               std::numeric_limits<double>::infinity(), 1e-10, &err);
  b.tail = integral + 2.0 * err + unimodal_sup(g, L);
  b.bound = std::sqrt(b.partial + b.tail);
  return b;
}

double mixing_bound(const CircleSpectrum& s, int k) { return mixing_bound_detail(s, k).bound; }
double mixing_bound(const CharacterSpectrum& s, int k) { return mixing_bound_detail(s, k).bound; }

// ---------------------------------------------------------------------------

TvResult tv_to_haar_so2(const CircleSpectrum& s, const std::vector<double>& omega_angles, int k,
                        const TvOptions& opt) {
  if (k < 1) throw std::invalid_argument("tv_to_haar_so2: k must be >= 1");
  if (omega_angles.size() != static_cast<std::size_t>(k)) {
    throw std::invalid_argument("tv_to_haar_so2: need exactly k disorder angles");
  }
  const int n = opt.grid;
  if (n < 16 || (n & (n - 1)) != 0) throw std::invalid_argument("tv_to_haar_so2: grid must be a power of 2");
  TvResult r;
  r.grid = n;
  if (s.envelope.exact_zero) return r;
  if (!s.envelope.available()) throw std::domain_error("tv_to_haar_so2: non-convergent Fourier series (atomic law)");

  const int m_cap = std::min(n / 2 - 1, s.m_max);
  std::vector<double> prefix1(m_cap + 1, 0.0);  // 2 sum_{m<=M} |q_hat_m|^2
  {
    KahanSum acc;
    for (int m = 1; m <= m_cap; ++m) {
      acc.add(2.0 * std::norm(s.at(m)));
      prefix1[m] = acc.value();
    }
  }
  auto tail_at = [&](int M) { return circle_tail(s, k, M, prefix1[M]); };
  int M = m_cap;
  for (int cand = 15; cand < m_cap; cand = 2 * cand + 1) {
    if (std::sqrt(tail_at(cand)) <= opt.tolerance) {
      M = cand;
      break;
    }
  }
  const double tail = tail_at(M);
  if (!std::isfinite(tail)) throw std::domain_error("tv_to_haar_so2: non-convergent Fourier series");
  r.m_used = M;
  r.truncation_bound = 0.5 * std::sqrt(tail);

  double gamma = 0.0;
  for (double a : omega_angles) gamma += a;
  std::vector<cplx> in(n, cplx(0.0)), out;
  in[0] = 1.0;
  for (int m = 1; m <= M; ++m) {
    const cplx c = std::polar(1.0, m * gamma) * std::pow(s.at(m), k);
    in[m] = c;
    in[n - m] = std::conj(c);
  }
  Eigen::FFT<double> fft;
  fft.fwd(out, in);
  std::vector<double> dev(n);
  for (int j = 0; j < n; ++j) dev[j] = std::abs(out[j].real() - 1.0);
  r.tv = 0.5 * pairwise_sum(dev) / n;
  return r;
}

TvResult tv_to_haar_so2(const RotationLaw& q, const std::vector<double>& omega_angles, int k,
                        const TvOptions& opt) {
  return tv_to_haar_so2(so2_spectrum(q, opt.grid / 2 - 1), omega_angles, k, opt);
}

// ---------------------------------------------------------------------------

OracleResult sigma2_oracle_2d(const CircleSpectrum& s, const DisorderModel& omega, std::optional<int> K,
                              std::size_t mc_samples, std::uint64_t seed, double tolerance) {
  if (omega.dim() != 2) throw std::invalid_argument("sigma2_oracle_2d: disorder must live on SO(2)");
  const cplx q1 = s.at(1);
  const double a = std::abs(q1);
  if (!(a < 1.0)) throw std::domain_error("sigma2_oracle_2d: requires |q_hat_1| < 1");
  OracleResult r;
  r.K = K ? *K : truncation_for(a, 2, tolerance);
  r.tail_bound = a == 0.0 ? 0.0 : std::pow(a, r.K + 1) / (1.0 - a);
  const int n_terms = r.K;

  // terms[n-1] = E e^{i Gamma_n}; the summand is Re(q1^n E e^{i Gamma_n}).
  auto series = [&](const std::vector<cplx>& eg) {
    KahanSum acc;
    cplx qn = 1.0;
    for (int n = 1; n <= n_terms; ++n) {
      qn *= q1;
      acc.add((qn * eg[n - 1]).real());
    }
    return 0.5 + acc.value();
  };

  if (mc_samples > 0) {
    r.mode = "monte-carlo";
    std::vector<double> vals(mc_samples);
    for (std::size_t i = 0; i < mc_samples; ++i) {
      const auto model = omega.reseeded(hash_pair(seed, i));
      const auto g = model.angles(1, n_terms);
      std::vector<cplx> eg(n_terms);
      double cum = 0.0;
      for (int n = 0; n < n_terms; ++n) {
        cum += g[n];
        eg[n] = std::polar(1.0, cum);
      }
      vals[i] = series(eg);
    }
    const double mean = pairwise_sum(vals) / mc_samples;
    double ss = 0.0;
    for (double v : vals) ss += (v - mean) * (v - mean);
    r.sigma2 = mean;
    r.mc_se = mc_samples > 1 ? std::sqrt(ss / (mc_samples - 1) / mc_samples) : kInf;
    return r;
  }

  r.mode = "exact";
  std::vector<cplx> eg(n_terms);
  switch (omega.kind()) {
    case DisorderKind::constant: {
      const double g = omega.states().front().angle();
      for (int n = 1; n <= n_terms; ++n) eg[n - 1] = std::polar(1.0, n * g);
      break;
    }
    case DisorderKind::iid: {
      const cplx phi = circle_characteristic(*omega.iid_law(), 1);
      cplx p = 1.0;
      for (int n = 1; n <= n_terms; ++n) eg[n - 1] = (p *= phi);
      break;
    }
    case DisorderKind::periodic: {
      // Average over the phase (the random phase is uniform; a fixed phase is
      // read from the model itself).
      const auto& st = omega.states();
      const std::size_t period = st.size();
      const bool random_phase = omega.to_json().value("random_phase", false);
      std::vector<std::size_t> phases;
      if (random_phase) {
        for (std::size_t p = 0; p < period; ++p) phases.push_back(p);
      }
      std::fill(eg.begin(), eg.end(), cplx(0.0));
      if (random_phase) {
        for (std::size_t p : phases) {
          double cum = 0.0;
          for (int n = 1; n <= n_terms; ++n) {
            cum += st[(n - 1 + p) % period].angle();
            eg[n - 1] += std::polar(1.0 / period, cum);
          }
        }
      } else {
        const auto g = omega.angles(1, n_terms);
        double cum = 0.0;
        for (int n = 1; n <= n_terms; ++n) {
          cum += g[n - 1];
          eg[n - 1] = std::polar(1.0, cum);
        }
      }
      break;
    }
    case DisorderKind::markov: {
      // Transfer operator: v_{n+1}(s') = sum_s v_n(s) P(s, s') e^{i gamma_{s'}}.
      const auto& st = omega.states();
      const auto spec = omega.to_json();
      const Matrix p = matrix_from_json(spec.at("transition"));
      const std::size_t ns = st.size();
      std::vector<cplx> v(ns), next(ns);
      const auto pi = omega.stationary();
      const bool stationary = spec.value("stationary_start", true);
      if (omega.offset() != 0 && !stationary) {
        throw std::domain_error("sigma2_oracle_2d: shifted non-stationary markov model needs Monte Carlo");
      }
      for (std::size_t i = 0; i < ns; ++i) {
        const double w = stationary ? pi[i] : (i == 0 ? 1.0 : 0.0);
        v[i] = std::polar(w, st[i].angle());
      }
      for (int n = 1; n <= n_terms; ++n) {
        cplx tot = 0.0;
        for (const auto& z : v) tot += z;
        eg[n - 1] = tot;
        for (std::size_t j = 0; j < ns; ++j) {
          cplx acc = 0.0;
          for (std::size_t i = 0; i < ns; ++i) acc += v[i] * p(i, j);
          next[j] = acc * std::polar(1.0, st[j].angle());
        }
        v.swap(next);
      }
      break;
    }
  }
  r.sigma2 = series(eg);
  return r;
}

double drift_bound_2d(const CircleSpectrum& s) {
  const double a = std::abs(s.at(1));
  if (!(a < 1.0)) throw std::domain_error("drift_bound_2d: requires |q_hat_1| < 1");
  return a / (1.0 - a);
}

// ---------------------------------------------------------------------------

json MixingReport::to_json() const {
  json b = json::array();
  for (const auto& [k, v] : bounds) b.push_back({k, v ? json(*v) : json(nullptr)});
  json j{{"d", dim}, {"h", h.h}, {"h_upper", h.upper}, {"h_certified", h.certified}, {"bounds", b}};
  j["l2_norm"] = std::isfinite(l2_norm) ? json(l2_norm) : json("inf");
  if (!h.flag.empty()) j["flag"] = h.flag;
  return j;
}

MixingReport mixing_report(const RotationLaw& q, const std::vector<int>& ks, int cutoff) {
  MixingReport rep;
  rep.dim = q.dim();
  auto fill = [&](const auto& spec) {
    rep.h = mixing_h(spec);
    for (int k : ks) {
      try {
        rep.bounds.emplace_back(k, mixing_bound(spec, k));
      } catch (const std::domain_error&) {
        rep.bounds.emplace_back(k, std::nullopt);
      }
    }
  };
  if (q.dim() == 2) {
    const auto s = so2_spectrum(q, cutoff);
    rep.l2_norm = std::sqrt(s.l2_norm_sq);
    fill(s);
  } else if (q.dim() == 3) {
    CharacterSpectrum s;
    try {
      s = so3_char_spectrum(q, cutoff);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(std::string("mixing: unsupported law; only d = 2 laws and conjugation-invariant "
                                              "d = 3 laws (character case) are covered: ") + e.what());
    }
    if (s.exact_zero) {
      rep.l2_norm = 1.0;
    } else {
      try {
        rep.l2_norm = std::sqrt(1.0 + mixing_bound_detail(s, 1).bound * mixing_bound_detail(s, 1).bound);
      } catch (const std::domain_error&) {
        rep.l2_norm = kInf;
      }
    }
    fill(s);
  } else {
    throw std::invalid_argument("mixing: only d = 2 and conjugation-invariant d = 3 laws are covered");
  }
  return rep;
}

}  // namespace semiflex
