// Acceptance checks, one line per criterion. `--criterion N` runs a single
// one and exits nonzero on failure.

#include "semiflex/chain.hpp"
#include "semiflex/diffusion.hpp"
#include "semiflex/disorder.hpp"
#include "semiflex/harmonics.hpp"
#include "semiflex/presets.hpp"
#include "semiflex/rotgroup.hpp"
#include "semiflex/stats.hpp"
#include "semiflex/tensor.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

using namespace semiflex;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kSeed = 20240611;
int g_threads = 0;

struct Result {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [FAILED: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RotationLaw window() { return RotationLaw::so2_window(-kPi / 10, kPi / 10); }

DisorderModel pm45(std::uint64_t seed) {
  return DisorderModel::iid(RotationLaw::so2_atoms({-kPi / 4, kPi / 4}, {0.5, 0.5}), seed);
}

DisorderModel none(int d) { return DisorderModel::constant(Rotation::identity(d)); }

// ---------------------------------------------------------------------------

Result crit1() {
  Result r;
  const auto t0 = std::chrono::steady_clock::now();
  for (int d : {2, 3}) {
    const auto s = sigma2_series(RotationLaw::haar(d), none(d));
    r.require(s.sigma2 == 1.0 / d && s.tail_bound == 0.0, "sigma2_series(haar(" + std::to_string(d) + ")) == 1/d");
    const auto cov = empirical_cov(RotationLaw::haar(d), none(d), UnitVector::basis(d, d), 10000, 10000, kSeed + d,
                                   g_threads);
    double zmax = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        const double target = i == j ? 1.0 / d : 0.0;
        zmax = std::max(zmax, std::abs(cov.matrix(i, j) - target) / cov.se(i, j));
      }
    r.detail << " d=" << d << ": sigma2=" << s.sigma2 << " Cov/n diag=" << cov.matrix(0, 0) << ".." << cov.matrix(d - 1, d - 1)
             << " max|z|=" << zmax << ";";
    r.require(zmax <= 3.0, "Cov/n within 3 SE of I/d (d=" + std::to_string(d) + ")");
  }
  const double secs = seconds_since(t0);
  r.detail << " runtime " << secs << " s on " << resolve_threads(g_threads) << " thread(s)";
  r.require(secs < 120.0, "runtime under 2 minutes");
  return r;
}

Result crit2() {
  Result r;
  const auto q = make_law(preset("cI-half-d3").at("law"));
  const auto m = moments_exact(q);
  r.require((m.mean - 0.5 * Matrix::Identity(3, 3)).norm() < 1e-14, "r_bar = 0.5 I");
  Sigma2Options opt;
  opt.tolerance = 1e-8;
  const auto s = sigma2_series(q, none(3), opt);
  const double closed = sigma2_cI(0.5, 3);
  r.detail << " series=" << s.sigma2 << " (tail " << s.tail_bound << ") closed=" << closed;
  r.require(std::abs(closed - 1.0) < 1e-15, "sigma2_cI(0.5, 3) = 1");
  r.require(s.tail_bound <= 1e-8 && std::abs(s.sigma2 - closed) <= s.tail_bound, "series = 1.0 within tail 1e-8");
  const auto cov = empirical_cov(q, none(3), UnitVector::basis(3, 3), 10000, 10000, kSeed, g_threads);
  double zmax = 0.0;
  for (int i = 0; i < 3; ++i) zmax = std::max(zmax, std::abs(cov.matrix(i, i) - 1.0) / cov.se(i, i));
  r.detail << "; MC diag=(" << cov.matrix(0, 0) << ", " << cov.matrix(1, 1) << ", " << cov.matrix(2, 2)
           << ") max|z|=" << zmax;
  r.require(zmax <= 3.0, "MC Cov/n diagonal within 3 SE of 1.0");
  return r;
}

Result crit3() {
  Result r;
  const auto q = window();
  const auto omega = pm45(kSeed);
  const Matrix rbar = moments_exact(q).mean;
  Sigma2Options opt;
  opt.L = 100000;
  opt.tolerance = 1e-10;
  opt.threads = resolve_threads(g_threads);
  const auto series = sigma2_series(q, omega, opt);
  const double closed = sigma2_iid_closed(rbar, *omega.mean());
  const auto oracle = sigma2_oracle_2d(so2_spectrum(q, 1), omega, std::nullopt, 0, 0, 1e-12);
  const double se = series.mc_se.value_or(0.0);
  r.detail << " series=" << series.sigma2 << " (tail " << series.tail_bound << ", mc_se " << se
           << ") closed=" << closed << " oracle=" << oracle.sigma2 << " (tail " << oracle.tail_bound << ")";
  r.require(std::abs(series.sigma2 - closed) <= series.tail_bound + 3 * se, "series vs closed");
  r.require(std::abs(series.sigma2 - oracle.sigma2) <= series.tail_bound + oracle.tail_bound + 3 * se,
            "series vs oracle");
  r.require(std::abs(closed - oracle.sigma2) <= oracle.tail_bound + 1e-12, "closed vs oracle");
  r.require(std::abs(closed - 2.7845) <= 1e-3 && std::abs(oracle.sigma2 - 2.7845) <= 1e-3, "common value 2.7845 +- 1e-3");
  r.require(std::abs(series.sigma2 - 2.7845) <= 1e-3 + series.tail_bound + 3 * se, "series near 2.7845 within its SE");
  const double homogeneous = sigma2_iid_closed(rbar, Matrix::Identity(2, 2));
  r.detail << "; homogeneous=" << homogeneous;
  r.require(closed < homogeneous, "disorder decreases sigma2");
  r.require(std::abs(homogeneous - 60.597) <= 1e-3, "homogeneous value 60.597 +- 1e-3");
  return r;
}

Result crit4() {
  Result r;
  auto monotone = [](const HypothesisReport& h) {
    for (std::size_t i = 1; i < h.generalized.size(); ++i) {
      if (h.generalized[i].rbar_root_norm > h.generalized[i - 1].rbar_root_norm + 1e-10) return false;
      if (h.generalized[i].hs0_root_norm > h.generalized[i - 1].hs0_root_norm + 1e-10) return false;
    }
    return true;
  };
  const auto w = check_hypothesis(window());
  const double s1 = std::sin(kPi / 10) / (kPi / 10), s2 = std::sin(kPi / 5) / (kPi / 5);
  r.detail << " window (rho1, rho2)=(" << w.rho1 << ", " << w.rho2 << ")";
  r.require(std::abs(w.rho1 - s1) <= 1e-9 && std::abs(w.rho2 - s2) <= 1e-9, "window matches sinc oracle within 1e-9");
  r.require(std::abs(w.rho1 - 0.983632) <= 5e-7 && std::abs(w.rho2 - 0.935489) <= 5e-7,
            "window matches the quoted 6-decimal values");
  r.require(w.verdict == Verdict::pass && monotone(w), "window pass + monotone");

  // Cube group, brute force over the 24 elements.
  Matrix avg = Matrix::Zero(9, 9);
  Matrix mean = Matrix::Zero(3, 3);
  for (const auto& g : cube_group()) {
    avg += kron_superop(g.matrix(), g.matrix()).entries() / 24.0;
    mean += g.matrix() / 24.0;
  }
  const double brute2 = spectral_radius(restrict(SuperOp(3, avg), Block::sym_traceless)).radius;
  const double brute1 = op_norm(mean);
  const auto cube = check_hypothesis(make_law({{"kind", "cube-group"}}));
  r.detail << "; cube (" << cube.rho1 << ", " << cube.rho2 << ") brute (" << brute1 << ", " << brute2 << ")";
  r.require(cube.rho1 <= 1e-9 && cube.rho2 <= 1e-9 && brute1 <= 1e-9 && brute2 <= 1e-9, "cube group (0, 0)");
  r.require(cube.verdict == Verdict::pass && monotone(cube), "cube pass + monotone");

  for (int d : {2, 3}) {
    const auto h = check_hypothesis(RotationLaw::haar(d));
    r.detail << "; haar" << d << " (" << h.rho1 << ", " << h.rho2 << ")";
    r.require(h.rho1 <= 1e-9 && h.rho2 <= 1e-9 && h.verdict == Verdict::pass && monotone(h), "haar (0, 0)");
  }
  for (const auto& q : {RotationLaw::dirac(Rotation::identity(2)), RotationLaw::dirac(Rotation::identity(3)),
                        RotationLaw::dirac(Rotation::planar(0.7))}) {
    const auto h = check_hypothesis(q);
    r.require(h.verdict == Verdict::fail && monotone(h), "dirac fails");
  }
  r.detail << "; dirac laws fail";
  return r;
}

Result crit5() {
  Result r;
  const auto t0 = std::chrono::steady_clock::now();
  const auto q = window();
  const auto spec = so2_spectrum(q, 4096);
  const auto big = so2_spectrum(q, (1 << 16) / 2 - 1);
  int worst_k = 0;
  double worst_ratio = 0.0, tv1 = 0.0, tv1_err = 0.0;
  // Several quenched windows: two iid realizations, an offset window, and none.
  const std::vector<DisorderModel> omegas{pm45(kSeed), pm45(kSeed + 1).shift(1000), none(2)};
  for (const auto& omega : omegas) {
    const auto ang = omega.angles(1, 500);
    for (int k = 1; k <= 500; ++k) {
      const double b = mixing_bound(spec, k);
      const auto tv = tv_to_haar_so2(big, std::vector<double>(ang.begin(), ang.begin() + k), k);
      if (tv.tv / (0.5 * b) > worst_ratio) {
        worst_ratio = tv.tv / (0.5 * b);
        worst_k = k;
      }
      r.require(tv.tv <= 0.5 * b, "TV <= bound/2 at k=" + std::to_string(k));
      r.require(b <= 3 * std::pow(0.983632, k - 1) * (1 + 1e-9), "bound(k) <= 3 * 0.983632^(k-1) at k=" + std::to_string(k));
      if (k == 1) {
        tv1 = tv.tv;
        tv1_err = tv.truncation_bound;
        r.require(std::abs(tv.tv - 0.9) <= tv.truncation_bound, "TV(k=1) = 0.9 within truncation bound");
      }
    }
  }
  const double secs = seconds_since(t0);
  r.detail << " bound(1)=" << mixing_bound(spec, 1) << " TV(1)=" << tv1 << " (+-" << tv1_err << ")"
           << " max TV/(bound/2)=" << worst_ratio << " at k=" << worst_k << "; runtime " << secs << " s";
  r.require(secs < 60.0, "runtime under 1 minute");
  return r;
}

Result crit6() {
  Result r;
  struct Case {
    std::string name;
    RotationLaw q;
    DisorderModel omega;
    double sigma2;
    std::optional<bool> expect_pass;  // nullopt: reported, not gated
  };
  const auto w = window();
  const auto omega = pm45(kSeed);
  const Matrix rbar = moments_exact(w).mean;
  const std::vector<Case> cases{
      {"haar-d2", RotationLaw::haar(2), none(2), 0.5, true},
      {"haar-d3", RotationLaw::haar(3), none(3), 1.0 / 3, true},
      {"figure-1", w, none(2), sigma2_iid_closed(rbar, Matrix::Identity(2, 2)), true},
      {"straight-rod", RotationLaw::dirac(Rotation::identity(2)), none(2), 1.0, false},
      // One quenched realization at n = 1e4 still carries a few percent of
      // covariance error, which 1e4 replicas can resolve.
      {"window-iid-pm45 (info)", w, omega, sigma2_iid_closed(rbar, *omega.mean()), std::nullopt},
  };
  for (const auto& c : cases) {
    const int d = c.q.dim();
    const auto rep = clt_test(c.q, c.omega, UnitVector::basis(d, d), 10000, 10000, c.sigma2, kSeed, g_threads, 0.01);
    double pmin = 1.0;
    for (double p : rep.p_values) pmin = std::min(pmin, p);
    r.detail << " " << c.name << ": min p=" << pmin << (rep.degenerate ? " degenerate" : "")
             << (rep.pass ? " pass;" : " fail;");
    if (c.expect_pass) r.require(rep.pass == *c.expect_pass, c.name + (*c.expect_pass ? " passes" : " fails"));
  }
  return r;
}

Result crit7() {
  Result r;
  const auto cfg = preset("figure-1");
  const auto q = make_law(cfg.at("law"));
  const auto v = cfg.at("v0").get<std::vector<double>>();
  const UnitVector v0(Eigen::Map<const Vector>(v.data(), 2));
  const std::size_t N = 10000;
  const auto ep = simulate_endpoints(q, none(2), frame_from_direction(v0), {N}, 10000, kSeed, g_threads);
  Matrix z = ep.at(N);
  z.rowwise() -= v0.coords().transpose();
  const auto cov = empirical_cov(z, N);
  const double norm = cov.mean.norm();
  const double se = cov.mean_se.norm();
  const double bound = drift_bound_2d(so2_spectrum(q, 1));
  r.detail << " |mean Z_N|=" << norm << " SE=" << se << " |q1|/(1-|q1|)=" << bound;
  r.require(bound <= 60.10, "drift bound <= 60.10");
  r.require(norm <= 60.10 + 3 * se, "|mean Z_N| <= 60.10 + 3 SE");
  return r;
}

Result crit8() {
  Result r;
  const auto t0 = std::chrono::steady_clock::now();
  RngStream rng(kSeed);
  double worst = 0.0;
  auto track = [&](double err) { worst = std::max(worst, err); };
  auto rand_matrix = [&](int d) {
    Matrix m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = rng.normal();
    return m;
  };
  auto rand_unit = [&](int d) {
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = rng.normal();
    return Vector(v.normalized());
  };
  int instances = 0;
  for (int d : {2, 3, 4}) {
    const SuperOp gam = gamma(d), p = pi(d);
    for (int t = 0; t < 1000; ++t, ++instances) {
      // Composition of Kronecker products.
      const Matrix g1 = rand_matrix(d), h1 = rand_matrix(d), g2 = rand_matrix(d), h2 = rand_matrix(d);
      track(hs_norm(superop_compose(kron_superop(g1, h1), kron_superop(g2, h2)) - kron_superop(g1 * g2, h1 * h2)) /
            (1.0 + hs_norm(kron_superop(g1 * g2, h1 * h2))));
      // Projector algebra, and commutation with g (x) g.
      const Matrix g = sample(RotationLaw::haar(d), rng).matrix();
      const SuperOp gg = kron_superop(g, g);
      track(hs_norm(gam * gam - gam));
      track(hs_norm(p * p - p));
      track(hs_norm(p * gam - p));
      track(hs_norm(gam * p - p));
      track((gam.entries() - gam.entries().transpose()).norm());
      track((p.entries() - p.entries().transpose()).norm());
      track(hs_norm(gg * gam - gam * gg));
      // Invariant subspaces.
      for (Block b : {Block::identity_line, Block::sym_traceless, Block::antisym}) track(leakage(gg, b));
      // Linear forms.
      const Vector v = rand_unit(d), w = rand_unit(d);
      const SuperOp m(d, [&] {
        Matrix e(d * d, d * d);
        for (int i = 0; i < d * d; ++i)
          for (int j = 0; j < d * d; ++j) e(i, j) = rng.normal();
        return e;
      }());
      const double s = linear_form_square(m, v, w);
      track(std::abs(s - linear_form_square(gam * m, v, w)));
      track(std::abs(s - linear_form_square(m * gam, v, w)));
      track(std::abs(s - linear_form_square(gam * m * gam, v, w)));
      track(std::max(0.0, std::abs(s) - op_norm(m)));
    }
  }
  const double secs = seconds_since(t0);
  r.detail << " " << instances << " instances, worst deviation " << worst << ", runtime " << secs << " s";
  r.require(worst <= 1e-11, "identities within 1e-11");
  r.require(secs < 30.0, "runtime under 30 s");
  return r;
}

const std::vector<std::pair<std::string, std::function<Result()>>> kCriteria{
    {"Haar baseline: sigma2 = 1/d and Cov/n within 3 SE", crit1},
    {"cI closed form: sigma2 = 1.0 (series, closed, MC)", crit2},
    {"three-way sigma2 agreement, 2D window + iid +-pi/4", crit3},
    {"hypothesis certification (window, Haar, cube group, dirac)", crit4},
    {"mixing chain: TV <= bound/2, bound <= 3*0.983632^(k-1), TV(1) = 0.9", crit5},
    {"CLT: KS at 1% for Haar/window, straight rod fails", crit6},
    {"drift bound: |mean Z_N| <= 60.10 + 3 SE", crit7},
    {"tensor-calculus property suite", crit8},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--criterion") && i + 1 < argc) only = std::atoi(argv[++i]);
    else if (!std::strcmp(argv[i], "--threads") && i + 1 < argc) g_threads = std::atoi(argv[++i]);
  }
  bool all = true;
  for (std::size_t c = 0; c < kCriteria.size(); ++c) {
    if (only && static_cast<int>(c + 1) != only) continue;
    Result res;
    try {
      res = kCriteria[c].second();
    } catch (const std::exception& e) {
      res.pass = false;
      res.detail << " exception: " << e.what();
    }
    std::printf("criterion %zu %s: %s |%s\n", c + 1, res.pass ? "PASS" : "FAIL", kCriteria[c].first.c_str(),
                res.detail.str().c_str());
    std::fflush(stdout);
    all = all && res.pass;
  }
  return all ? 0 : 1;
}
