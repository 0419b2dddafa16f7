#include <doctest.h>

#include "support.hpp"

#include "semiflex/chain.hpp"
#include "semiflex/stats.hpp"

using namespace semiflex;
using namespace testing;

namespace {

RotationLaw window() { return RotationLaw::so2_window(-kPi / 10, kPi / 10); }

DisorderModel pm45(std::uint64_t seed) {
  return DisorderModel::iid(RotationLaw::so2_atoms({-kPi / 4, kPi / 4}, {0.5, 0.5}), seed);
}

DisorderModel none(int d) { return DisorderModel::constant(Rotation::identity(d)); }

}  // namespace

TEST_CASE("straight rod") {
  RngStream rng(1);
  const UnitVector v0(Vector::Unit(3, 0));
  const auto t = simulate_chain(RotationLaw::dirac(Rotation::identity(3)), none(3), v0, 10, rng);
  CHECK(t.positions.size() == 11);
  for (std::size_t n = 0; n <= 10; ++n) CHECK((t.positions[n] - (n + 1.0) * v0.coords()).norm() < 1e-14);
}

TEST_CASE("bonds are unit and positions telescope") {
  RngStream rng(2);
  for (int d : {2, 3, 4}) {
    const auto q = d == 2 ? window() : RotationLaw::haar(d);
    const auto omega = DisorderModel::iid(RotationLaw::haar(d), 7);
    const auto t = simulate_chain(q, omega, UnitVector::basis(d, d), 5000, rng);
    for (std::size_t j = 0; j < t.bonds.size(); ++j) {
      CHECK(std::abs(t.bonds[j].norm() - 1.0) < 1e-10);
      CHECK((t.positions[j + 1] - t.positions[j] - t.bonds[j]).norm() < 1e-10);
    }
  }
}

TEST_CASE("long chains keep the frame orthogonal") {
  RngStream rng(3);
  const auto t = simulate_chain(RotationLaw::haar(3), none(3), UnitVector::basis(3, 3), 200000, rng);
  double worst = 0.0;
  for (const auto& b : t.bonds) worst = std::max(worst, std::abs(b.norm() - 1.0));
  CHECK(worst < 1e-10);
}

TEST_CASE("frame covariance") {
  RngStream pick(4);
  for (int d : {2, 3}) {
    const auto q = d == 2 ? window() : RotationLaw::so3_conjugation_invariant(AngleLaw::uniform(0, 0.5));
    const auto omega = DisorderModel::iid(RotationLaw::haar(d), 9);
    const auto r = frame_from_direction(UnitVector(random_unit(d, pick)));
    const auto g = random_rotation(d, pick);
    RngStream a(100), b(100);
    const auto base = simulate_chain(q, omega, r, 3000, a);
    const auto moved = simulate_chain(q, omega, compose(g, r), 3000, b);
    for (std::size_t n = 0; n < base.positions.size(); n += 37) {
      CHECK((moved.positions[n] - g.matrix() * base.positions[n]).norm() < 1e-10 * (1.0 + n));
    }
  }
}

TEST_CASE("stream overload consumes the disorder") {
  const auto omega = pm45(11);
  DisorderStream s(omega);
  RngStream a(5), b(5);
  const auto t1 = simulate_chain(window(), s, UnitVector::basis(2, 2), 100, a);
  CHECK(s.cursor() == 101);
  const auto t2 = simulate_chain(window(), omega, UnitVector::basis(2, 2), 100, b);
  CHECK((t1.positions.back() - t2.positions.back()).norm() == 0.0);
}

TEST_CASE("rescaled path") {
  RngStream rng(6);
  const auto t = simulate_chain(window(), none(2), UnitVector::basis(2, 2), 100, rng);
  const auto p = rescale(t, 100);
  CHECK(p.knots.size() == 101);
  CHECK((p.at(0.5) - t.positions[50] / 10.0).norm() < 1e-14);
  CHECK((p.at(0.505) - 0.5 * (t.positions[50] + t.positions[51]) / 10.0).norm() < 1e-12);
  CHECK_THROWS(p.at(1.5));
}

TEST_CASE("endpoints are reproducible and thread independent") {
  const auto omega = pm45(3);
  const auto r = frame_from_direction(UnitVector::basis(2, 2));
  const auto a = simulate_endpoints(window(), omega, r, {10, 200}, 300, 77, 1);
  const auto b = simulate_endpoints(window(), omega, r, {10, 200}, 300, 77, 3);
  CHECK((a.at(200) - b.at(200)).norm() == 0.0);
  CHECK((a.at(10) - b.at(10)).norm() == 0.0);
  // Replica i equals a direct simulation with keyed(seed, i).
  RngStream rng = RngStream::keyed(77, 5);
  const auto t = simulate_chain(window(), omega, r, 200, rng);
  CHECK((a.at(200).row(5).transpose() - t.positions[200]).norm() < 1e-12);
  CHECK_THROWS(a.at(11));
}

TEST_CASE("thermal mean matches the exact r_bar recursion") {
  const auto q = window();
  const auto omega = pm45(21);
  const auto r = frame_from_direction(UnitVector::basis(2, 2));
  const auto ep = simulate_endpoints(q, omega, r, {50}, 20000, 5, 1);
  const auto mu = expected_positions(moments_exact(q).mean, omega, r, {50})[0];
  const auto cov = empirical_cov(ep.at(50), 50);
  for (int i = 0; i < 2; ++i) CHECK(std::abs(cov.mean(i) - mu(i)) < 5 * cov.mean_se(i));
}

TEST_CASE("persistence") {
  const double c = sinc(kPi / 10);
  CHECK(persistence_length(window()) == doctest::Approx(-1.0 / std::log(c)).epsilon(1e-13));
  CHECK(persistence_length(window()) == doctest::Approx(60.592).epsilon(1e-5));
  CHECK(persistence_correlation(window(), std::nullopt, 25) == doctest::Approx(std::pow(c, 25)).epsilon(1e-13));
  const auto omega = DisorderModel::constant(Rotation::planar(0.3));
  CHECK(persistence_correlation(window(), omega, 4) == doctest::Approx(std::pow(c, 4) * std::cos(1.2)).epsilon(1e-12));
  CHECK_THROWS(persistence_length(RotationLaw::haar(3)));
}

TEST_CASE("empirical covariance on synthetic data") {
  RngStream rng(8);
  const int n = 50000;
  Matrix x(n, 2);
  for (int i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.normal();
    x(i, 0) = 2 * a;
    x(i, 1) = a + b;
  }
  const auto c = empirical_cov(x, 4);
  Matrix want(2, 2);
  want << 1.0, 0.5, 0.5, 0.5;  // Cov / 4
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(std::abs(c.matrix(i, j) - want(i, j)) < 5 * c.se(i, j));
}

TEST_CASE("CLT report") {
  const auto r2 = frame_from_direction(UnitVector::basis(2, 2));
  const auto haar = simulate_endpoints(RotationLaw::haar(2), none(2), r2, {1000}, 3000, 12, 1);
  const auto rep = clt_from_endpoints(haar.at(1000), 1000, 0.5);
  CHECK(rep.pass);
  CHECK_FALSE(rep.degenerate);
  // Wrong variance is rejected.
  CHECK_FALSE(clt_from_endpoints(haar.at(1000), 1000, 1.0).pass);

  const auto rod = simulate_endpoints(RotationLaw::dirac(Rotation::identity(2)), none(2), r2, {100}, 200, 1, 1);
  const auto bad = clt_from_endpoints(rod.at(100), 100, 1.0);
  CHECK(bad.degenerate);
  CHECK_FALSE(bad.pass);
}
