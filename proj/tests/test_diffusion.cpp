#include <doctest.h>

#include "support.hpp"

#include "semiflex/diffusion.hpp"
#include "semiflex/presets.hpp"

using namespace semiflex;
using namespace testing;

namespace {

RotationLaw window() { return RotationLaw::so2_window(-kPi / 10, kPi / 10); }
DisorderModel none(int d) { return DisorderModel::constant(Rotation::identity(d)); }

}  // namespace

TEST_CASE("tail bound and truncation") {
  double prev = tail_bound(0.9, 2, 0);
  for (int k = 1; k < 100; ++k) {
    const double t = tail_bound(0.9, 2, k);
    CHECK(t < prev);
    CHECK(t >= 0.0);
    prev = t;
  }
  const int K = truncation_for(0.9, 3, 1e-8);
  CHECK(tail_bound(0.9, 3, K) < 1e-8);
  CHECK(tail_bound(0.9, 3, K - 1) >= 1e-8);
  CHECK(truncation_for(0.0, 2, 1e-8) == 0);
  CHECK_THROWS_AS(tail_bound(1.0, 2, 3), std::domain_error);
}

TEST_CASE("closed forms") {
  CHECK(sigma2_cI(0.5, 3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(sigma2_cI(0.0, 2) == 0.5);
  const double c = sinc(kPi / 10);
  CHECK(sigma2_iid_closed(c * Matrix::Identity(2, 2), Matrix::Identity(2, 2)) ==
        doctest::Approx(0.5 + c / (1 - c)).epsilon(1e-12));
  CHECK_THROWS_AS(sigma2_cI(1.0, 3), std::domain_error);
  CHECK_THROWS_AS(sigma2_iid_closed(Matrix::Identity(2, 2), Matrix::Identity(2, 2)), std::domain_error);
  CHECK_THROWS_AS(sigma2_iid_closed(0.5 * Matrix::Identity(2, 2), Matrix::Identity(3, 3)), std::invalid_argument);
}

TEST_CASE("haar gives 1/d with zero tail") {
  for (int d : {2, 3, 4}) {
    const auto e = sigma2_series(RotationLaw::haar(d), DisorderModel::iid(RotationLaw::haar(d), 1));
    CHECK(e.sigma2 == 1.0 / d);
    CHECK(e.tail_bound == 0.0);
    CHECK(e.K == 0);
  }
}

TEST_CASE("series equals the linear solve for constant disorder") {
  // Constant omega = g: E over omega is trivial, so the series must match the
  // resolvent formula to within the tail.
  RngStream rng(3);
  for (int t = 0; t < 10; ++t) {
    const auto g = random_rotation(3, rng);
    const auto q = RotationLaw::so3_conjugation_invariant(AngleLaw::uniform(0, 1.0 + rng.uniform()));
    Sigma2Options opt;
    opt.tolerance = 1e-12;
    const auto e = sigma2_series(q, DisorderModel::constant(g), opt);
    CHECK(e.L == 1);
    CHECK_FALSE(e.mc_se.has_value());
    const double closed = sigma2_iid_closed(moments_exact(q).mean, g.matrix());
    CHECK(std::abs(e.sigma2 - closed) <= e.tail_bound + 1e-12);
  }
  const auto ci = sigma2_series(make_law(preset("cI-half-d3").at("law")), none(3));
  CHECK(std::abs(ci.sigma2 - 1.0) <= ci.tail_bound + 1e-12);
  CHECK(ci.tail_bound < 1e-8);
}

TEST_CASE("ergodic average approaches the iid closed form") {
  const auto omega = DisorderModel::iid(RotationLaw::so2_atoms({-kPi / 4, kPi / 4}, {0.5, 0.5}), 8);
  Sigma2Options opt;
  opt.L = 40000;
  opt.tolerance = 1e-9;
  const auto e = sigma2_series(window(), omega, opt);
  const double closed = sigma2_iid_closed(moments_exact(window()).mean, *omega.mean());
  CHECK(closed == doctest::Approx(2.7844239365792562).epsilon(1e-12));
  REQUIRE(e.mc_se.has_value());
  CHECK(std::abs(e.sigma2 - closed) <= e.tail_bound + 3 * *e.mc_se);
  // Thread count never changes the result.
  opt.threads = 3;
  CHECK(sigma2_series(window(), omega, opt).sigma2 == e.sigma2);
}

TEST_CASE("series refuses uncertified laws") {
  CHECK_THROWS_AS(sigma2_series(RotationLaw::dirac(Rotation::identity(2)), none(2)), std::domain_error);
  CHECK_THROWS_AS(sigma2_series(RotationLaw::haar(3), none(2)), std::invalid_argument);
}

TEST_CASE("hypothesis check") {
  const auto w = check_hypothesis(window());
  CHECK(w.verdict == Verdict::pass);
  CHECK(w.rho1 == doctest::Approx(sinc(kPi / 10)).epsilon(1e-13));
  CHECK(w.rho2 == doctest::Approx(sinc(kPi / 5)).epsilon(1e-13));
  CHECK(w.monotone);

  for (const auto& q : {RotationLaw::haar(2), RotationLaw::haar(3), make_law({{"kind", "cube-group"}})}) {
    const auto r = check_hypothesis(q);
    CHECK(r.verdict == Verdict::pass);
    CHECK(r.rho1 < 1e-12);
    CHECK(r.rho2 < 1e-12);
  }
  for (const auto& q : {RotationLaw::dirac(Rotation::identity(2)), RotationLaw::dirac(Rotation::planar(0.4)),
                        RotationLaw::dirac(Rotation::identity(3))}) {
    CHECK(check_hypothesis(q).verdict == Verdict::fail);
  }
  // A fixed-axis SO(3) law never contracts along its axis.
  const auto axis = RotationLaw::so3_axis_angle(Eigen::Vector3d(0, 0, 1), AngleLaw::uniform(-1, 1));
  CHECK(check_hypothesis(axis).verdict == Verdict::fail);
}

TEST_CASE("Monte Carlo moments give pass, fail or inconclusive") {
  RngStream rng(5);
  const auto haar = moments_mc(RotationLaw::haar(3), 100000, rng);
  const auto rep = check_hypothesis(haar);
  CHECK(rep.from_mc);
  CHECK(rep.verdict == Verdict::pass);
  const auto rod = moments_mc(RotationLaw::dirac(Rotation::identity(2)), 1000, rng);
  CHECK(check_hypothesis(rod).verdict == Verdict::fail);
  // Very narrow window: radius ~ 1 - 1e-6, invisible at this sample size.
  const auto narrow = moments_mc(RotationLaw::so2_window(-0.002, 0.002), 1000, rng);
  CHECK(check_hypothesis(narrow).verdict == Verdict::inconclusive);
}

TEST_CASE("report JSON") {
  const auto j = to_json(check_hypothesis(window()));
  CHECK(j.at("verdict") == "pass");
  CHECK(j.at("generalized").size() == 7);
  const auto s = to_json(sigma2_series(RotationLaw::haar(2), none(2)));
  CHECK(s.at("tail_bound") == 0.0);
  CHECK(s.at("mc_se").is_null());
}
