#include <doctest.h>

#include "support.hpp"

#include "semiflex/tensor.hpp"

using namespace semiflex;
using namespace testing;

TEST_CASE("flatten is row-major and round-trips") {
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  const Vector v = flatten(m);
  CHECK(v(1) == 2);
  CHECK(v(2) == 3);
  CHECK(unflatten(v, 2) == m);
  CHECK_THROWS_AS(unflatten(Vector::Zero(5), 2), std::invalid_argument);
}

TEST_CASE("kron entries and action") {
  RngStream rng(11);
  const Matrix g = random_matrix(3, 3, rng), h = random_matrix(3, 3, rng), m = random_matrix(3, 3, rng);
  const SuperOp a = kron_superop(g, h);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) CHECK(a(i, j, k, l) == doctest::Approx(g(i, k) * h(j, l)));
  CHECK((a.apply(m) - g * m * h.transpose()).norm() < 1e-12);
}

TEST_CASE("composition of Kronecker squares") {
  RngStream rng(12);
  for (int d : {2, 3, 4}) {
    for (int t = 0; t < 50; ++t) {
      const Matrix g1 = random_matrix(d, d, rng), h1 = random_matrix(d, d, rng);
      const Matrix g2 = random_matrix(d, d, rng), h2 = random_matrix(d, d, rng);
      const SuperOp lhs = superop_compose(kron_superop(g1, h1), kron_superop(g2, h2));
      CHECK(hs_norm(lhs - kron_superop(g1 * g2, h1 * h2)) < 1e-11);
    }
  }
  const SuperOp a = random_superop(2, rng);
  CHECK(hs_norm(a * SuperOp::identity(2) - a) == 0.0);
  CHECK_THROWS(superop_compose(SuperOp::identity(2), SuperOp::identity(3)));
}

TEST_CASE("gamma and pi") {
  Matrix e12(2, 2);
  e12 << 0, 1, 0, 0;
  Matrix want(2, 2);
  want << 0, 0.5, 0.5, 0;
  CHECK((gamma(2).apply(e12) - want).norm() < 1e-15);
  CHECK((pi(3).apply(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm() < 1e-15);
  Matrix diag(2, 2);
  diag << 1, 0, 0, -1;
  CHECK(pi(2).apply(diag).norm() < 1e-15);

  RngStream rng(13);
  for (int d : {2, 3, 5}) {
    const SuperOp g = gamma(d), p = pi(d);
    CHECK(hs_norm(g * g - g) < 1e-14);
    CHECK(hs_norm(p * p - p) < 1e-14);
    CHECK(hs_norm(p * g - p) < 1e-14);
    CHECK(hs_norm(g * p - p) < 1e-14);
    const Matrix u = random_matrix(d, d, rng), w = random_matrix(d, d, rng);
    CHECK(hs_inner(g.apply(u), w) == doctest::Approx(hs_inner(u, g.apply(w))).epsilon(1e-12));
    const Matrix s = u + u.transpose();
    CHECK((g.apply(s) - s).norm() < 1e-14);
  }
}

TEST_CASE("norms") {
  RngStream rng(14);
  CHECK(op_norm(Rotation::planar(0.7).matrix()) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(op_norm(Matrix::Zero(3, 3)) == 0.0);
  CHECK(op_norm(sinc(kPi / 10) * Matrix::Identity(2, 2)) == doctest::Approx(0.983632).epsilon(1e-6));
  CHECK(hs_norm(Matrix::Identity(4, 4)) == doctest::Approx(2.0));
  CHECK(hs_norm(random_rotation(3, rng).matrix()) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-13));
  for (int t = 0; t < 100; ++t) {
    const Matrix a = random_matrix(4, 4, rng), b = random_matrix(4, 4, rng);
    CHECK(op_norm(a) <= hs_norm(a) * (1 + 1e-14));
    CHECK(op_norm(a * b) <= op_norm(a) * op_norm(b) * (1 + 1e-12));
    CHECK(hs_norm(a * b) <= op_norm(a) * hs_norm(b) * (1 + 1e-12));
    const Matrix g = random_rotation(3, rng).matrix(), h = random_rotation(3, rng).matrix();
    CHECK(op_norm(kron_superop(g, h)) == doctest::Approx(1.0).epsilon(1e-12));
    const Matrix x = random_matrix(3, 3, rng), y = random_matrix(3, 3, rng);
    CHECK(op_norm(kron_superop(x, y)) <= op_norm(x) * op_norm(y) * (1 + 1e-12));
  }
}

TEST_CASE("subspace bases") {
  auto b2 = subspace_basis(2);
  CHECK(b2.h1.cols() == 1);
  CHECK(b2.hs0.cols() == 2);
  CHECK(b2.ha.cols() == 1);
  auto b3 = subspace_basis(3);
  CHECK(b3.hs0.cols() == 5);
  CHECK(b3.ha.cols() == 3);
  for (int d : {2, 3, 4}) {
    const Matrix all = subspace_basis(d).all();
    CHECK((all.transpose() * all - Matrix::Identity(d * d, d * d)).norm() < 1e-12);
  }
}

TEST_CASE("restrict and leakage") {
  RngStream rng(16);
  CHECK(restrict(pi(3), Block::sym_traceless).norm() < 1e-15);
  for (int t = 0; t < 20; ++t) {
    const Matrix g = random_rotation(3, rng).matrix();
    const SuperOp gg = kron_superop(g, g);
    CHECK(restrict(gg, Block::identity_line)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    for (Block b : {Block::identity_line, Block::sym_traceless, Block::antisym}) CHECK(leakage(gg, b) < 1e-11);
  }
  const SuperOp leaky = random_superop(2, rng);
  CHECK(leakage(leaky, Block::sym_traceless) > 1e-3);
  CHECK_THROWS_AS(restrict(leaky, Block::sym_traceless), std::domain_error);
  CHECK(restrict(leaky, Block::sym_traceless, true).rows() == 2);
}

TEST_CASE("spectral radius") {
  for (double th : {0.1, 1.0, 2.5}) {
    const auto sr = spectral_radius(Rotation::planar(th).matrix());
    CHECK(sr.radius == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sr.certified_upper >= sr.radius - 1e-12);
  }
  const auto c = spectral_radius(-0.4 * Matrix::Identity(3, 3));
  CHECK(c.radius == doctest::Approx(0.4));
  // Nilpotent: radius 0, and the certified bound drops to zero at m = 2.
  Matrix n(2, 2);
  n << 0, 5, 0, 0;
  const auto sn = spectral_radius(n);
  CHECK(sn.radius < 1e-12);
  CHECK(sn.certified_upper < 1e-12);
  // Non-normal: ||A|| overstates the radius; the power bound approaches it.
  Matrix j(2, 2);
  j << 0.5, 10, 0, 0.5;
  const auto sj = spectral_radius(j, 256);
  CHECK(sj.radius == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(sj.certified_upper < 0.6);
  CHECK(sj.root_norms.front() > 10);
}

TEST_CASE("linear form identities") {
  RngStream rng(17);
  for (int d : {2, 3}) {
    const SuperOp g = gamma(d);
    for (int t = 0; t < 50; ++t) {
      const Vector v = random_unit(d, rng), w = random_unit(d, rng);
      const SuperOp m = random_superop(d, rng);
      const double s = linear_form_square(m, v, w);
      CHECK(std::abs(s - linear_form_square(g * m, v, w)) < 1e-11);
      CHECK(std::abs(s - linear_form_square(m * g, v, w)) < 1e-11);
      CHECK(std::abs(s) <= op_norm(m) + 1e-12);
      const Matrix rot = random_rotation(d, rng).matrix();
      const double sg = v.dot(rot * w);
      CHECK(linear_form_square(kron_superop(rot, rot), v, w) == doctest::Approx(sg * sg).epsilon(1e-12));
    }
  }
}
