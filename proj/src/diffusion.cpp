#include "semiflex/diffusion.hpp"

#include "semiflex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace semiflex {

using nlohmann::json;

double tail_bound(double rho, int d, int K) {
  if (!(rho >= 0.0) || !(rho < 1.0)) throw std::domain_error("tail_bound: requires 0 <= rho < 1");
  if (d < 1 || K < 0) throw std::invalid_argument("tail_bound: bad d or K");
  if (rho == 0.0) return 0.0;
  return (2.0 / d) * std::pow(rho, K + 1) / (1.0 - rho);
}

int truncation_for(double rho, int d, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("truncation_for: tolerance must be positive");
  if (rho == 0.0) return 0;
  double guess = std::log(tol * (1.0 - rho) * d / 2.0) / std::log(rho) - 1.0;
  int K = std::max(0, static_cast<int>(std::ceil(guess)));
  while (tail_bound(rho, d, K) >= tol) ++K;
  while (K > 0 && tail_bound(rho, d, K - 1) < tol) --K;
  return K;
}

double sigma2_cI(double c, int d) {
  if (!(std::abs(c) < 1.0)) throw std::domain_error("sigma2_cI: requires |c| < 1");
  if (d < 2) throw std::invalid_argument("sigma2_cI: d must be >= 2");
  return 1.0 / d + 2.0 * c / (d * (1.0 - c));
}

double sigma2_iid_closed(const Matrix& rbar, const Matrix& omega_bar) {
  const auto d = rbar.rows();
  if (rbar.cols() != d || omega_bar.rows() != d || omega_bar.cols() != d) {
    throw std::invalid_argument("sigma2_iid_closed: dimension mismatch");
  }
  if (!(op_norm(rbar) < 1.0)) throw std::domain_error("sigma2_iid_closed: requires ||r_bar||_op < 1");
  const Matrix a = omega_bar * rbar;
  const Matrix m = Matrix::Identity(d, d) - a;
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible() || std::abs(lu.rcond()) < 1e-14) {
    throw std::runtime_error("sigma2_iid_closed: I - w_bar r_bar is numerically singular");
  }
  const Vector e = Vector::Unit(d, d - 1);
  const Vector x = lu.solve(Vector(a * e));
  return 1.0 / d + (2.0 / d) * x(d - 1);
}

DiffusionEstimate sigma2_series(const Matrix& rbar, const DisorderModel& omega, const Sigma2Options& opt) {
  const int d = static_cast<int>(rbar.rows());
  if (omega.dim() != d) throw std::invalid_argument("sigma2_series: dimension mismatch");
  const double rho = op_norm(rbar);
  if (!(rho < 1.0)) {
    std::ostringstream os;
    os << "sigma2_series: series not certified (||r_bar||_op = " << rho << ")";
    throw std::domain_error(os.str());
  }
  if (opt.L < 1) throw std::invalid_argument("sigma2_series: L must be >= 1");

  DiffusionEstimate est;
  est.rho = rho;
  est.K = opt.K ? *opt.K : truncation_for(rho, d, opt.tolerance);
  if (est.K < 0) throw std::invalid_argument("sigma2_series: K must be >= 0");
  est.tail_bound = tail_bound(rho, d, est.K);
  const int K = est.K;

  const bool constant = omega.kind() == DisorderKind::constant;
  const std::size_t L = constant ? 1 : opt.L;
  est.L = L;

  // A_j = w_j r_bar for j = 1 .. L + K - 1.
  std::vector<Matrix> a;
  if (K > 0) {
    std::vector<Matrix> w;
    omega.window_into<Eigen::Dynamic>(1, L + K - 1, w);
    a.resize(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) a[j] = w[j] * rbar;
  }

  std::vector<double> partial(L, 0.0);
  parallel_for(L, opt.threads, [&](std::size_t begin, std::size_t end) {
    Eigen::RowVectorXd u(d), next(d);
    for (std::size_t l = begin; l < end; ++l) {
      u.setZero();
      u(d - 1) = 1.0;
      KahanSum s;
      double bound = 1.0;
      for (int k = 1; k <= K; ++k) {
        next.noalias() = u * a[l + k - 1];
        u = next;
        const double t = u(d - 1);
        bound *= rho;
        if (std::abs(t) > bound * (1.0 + 1e-9) + 1e-15) {
          throw std::logic_error("sigma2_series: term exceeds rho^k");
        }
        s.add(t);
      }
      partial[l] = s.value();
    }
  });

  const double mean = pairwise_sum(partial) / static_cast<double>(L);
  est.sigma2 = 1.0 / d + (2.0 / d) * mean;

  if (L >= 4) {
    // Batch means over contiguous shifts absorb the correlation between
    // overlapping windows.
    const std::size_t b = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(L))));
    const std::size_t len = L / b;
    std::vector<double> means(b);
    for (std::size_t i = 0; i < b; ++i) means[i] = pairwise_sum(partial.data() + i * len, len) / len;
    const double mb = pairwise_sum(means) / b;
    double ss = 0.0;
    for (double m : means) ss += (m - mb) * (m - mb);
    est.mc_se = (2.0 / d) * std::sqrt(ss / (b - 1) / b);
  }
  return est;
}

DiffusionEstimate sigma2_series(const RotationLaw& q, const DisorderModel& omega, const Sigma2Options& opt) {
  return sigma2_series(moments_exact(q).mean, omega, opt);
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

namespace {

// ||(A + E)^m|| <= ||A^m|| + (||A|| + s)^m - ||A||^m for ||E|| <= s.
double perturbed_upper(const SpectralRadius& sr, double s) {
  if (sr.root_norms.empty()) return 0.0;
  const double n1 = sr.root_norms.front();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sr.powers.size(); ++i) {
    const int m = sr.powers[i];
    const double pm = std::pow(sr.root_norms[i], m);
    best = std::min(best, std::pow(pm + std::pow(n1 + s, m) - std::pow(n1, m), 1.0 / m));
  }
  return best;
}

HypothesisReport build_report(const Matrix& rbar, const SuperOp& second, int max_power, double margin) {
  if (max_power < 1) throw std::invalid_argument("check_hypothesis: max power must be >= 1");
  HypothesisReport rep;
  rep.margin = margin;
  rep.hs0_leakage = leakage(second, Block::sym_traceless);
  const Matrix a = restrict(second, Block::sym_traceless, /*force=*/true);
  rep.rho1 = op_norm(rbar);
  rep.rho2 = op_norm(a);
  rep.rbar_radius = spectral_radius(rbar, max_power);
  rep.hs0_radius = spectral_radius(a, max_power);
  for (std::size_t i = 0; i < rep.rbar_radius.powers.size(); ++i) {
    rep.generalized.push_back({rep.rbar_radius.powers[i], rep.rbar_radius.root_norms[i], rep.hs0_radius.root_norms[i]});
    if (i > 0) {
      const auto& prev = rep.generalized[i - 1];
      const auto& cur = rep.generalized.back();
      if (cur.rbar_root_norm > prev.rbar_root_norm + 1e-10 || cur.hs0_root_norm > prev.hs0_root_norm + 1e-10) {
        rep.monotone = false;
      }
    }
  }
  return rep;
}

}  // namespace

HypothesisReport check_hypothesis(const Moments& m, int max_power, double margin) {
  HypothesisReport rep = build_report(m.mean, m.second, max_power, margin);
  const bool ok = rep.rbar_radius.certified_upper <= 1.0 - margin && rep.hs0_radius.certified_upper <= 1.0 - margin;
  rep.verdict = ok ? Verdict::pass : Verdict::fail;
  return rep;
}

HypothesisReport check_hypothesis(const MomentEstimate& m, int max_power, double margin) {
  HypothesisReport rep = build_report(m.value.mean, m.value.second, max_power, margin);
  rep.from_mc = true;
  rep.mc_se = std::max(m.mean_se.norm(), m.second_se.norm());
  const double s = 3.0 * rep.mc_se;
  const double up1 = perturbed_upper(rep.rbar_radius, s);
  const double up2 = perturbed_upper(rep.hs0_radius, s);
  if (up1 < 1.0 - margin && up2 < 1.0 - margin) {
    rep.verdict = Verdict::pass;
  } else if (rep.rbar_radius.radius - s >= 1.0 - margin || rep.hs0_radius.radius - s >= 1.0 - margin) {
    rep.verdict = Verdict::fail;
  } else {
    rep.verdict = Verdict::inconclusive;
  }
  return rep;
}

HypothesisReport check_hypothesis(const RotationLaw& q, int max_power, double margin) {
  return check_hypothesis(moments_exact(q), max_power, margin);
}

json to_json(const DiffusionEstimate& e) {
  json j{{"sigma2", e.sigma2}, {"K", e.K}, {"tail_bound", e.tail_bound}, {"L", e.L}, {"rho", e.rho}};
  j["mc_se"] = e.mc_se ? json(*e.mc_se) : json(nullptr);
  return j;
}

json to_json(const HypothesisReport& r) {
  json gen = json::array();
  for (const auto& p : r.generalized) gen.push_back({{"m", p.m}, {"rbar", p.rbar_root_norm}, {"hs0", p.hs0_root_norm}});
  json j{{"rho1", r.rho1},
         {"rho2", r.rho2},
         {"generalized", gen},
         {"spectral_radius", {{"rbar", r.rbar_radius.radius}, {"hs0", r.hs0_radius.radius}}},
         {"certified_upper", {{"rbar", r.rbar_radius.certified_upper}, {"hs0", r.hs0_radius.certified_upper}}},
         {"margin", r.margin},
         {"monotone", r.monotone},
         {"hs0_leakage", r.hs0_leakage},
         {"moments", r.from_mc ? "monte-carlo" : "exact"},
         {"verdict", to_string(r.verdict)},
         {"pass", r.verdict == Verdict::pass}};
  if (r.from_mc) j["mc_se"] = r.mc_se;
  return j;
}

}  // namespace semiflex
