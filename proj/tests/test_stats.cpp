#include <doctest.h>

#include "semiflex/rng.hpp"
#include "semiflex/stats.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

using namespace semiflex;

TEST_CASE("parallel_for covers every index once") {
  for (int threads : {1, 2, 3, 8}) {
    std::vector<int> hits(1001, 0);
    parallel_for(hits.size(), threads, [&](std::size_t b, std::size_t e) {
      for (std::size_t i = b; i < e; ++i) ++hits[i];
    });
    for (int h : hits) CHECK(h == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 2, [](std::size_t, std::size_t) { throw std::runtime_error("x"); }),
                  std::runtime_error);
  CHECK(resolve_threads(0) >= 1);
  CHECK(resolve_threads(3) == 3);
}

TEST_CASE("pairwise and compensated sums") {
  std::vector<double> x(100000, 0.1);
  CHECK(pairwise_sum(x) == doctest::Approx(10000.0).epsilon(1e-14));
  KahanSum k;
  for (double v : x) k.add(v);
  CHECK(k.value() == doctest::Approx(10000.0).epsilon(1e-15));
  std::vector<double> ints{1, 2, 3, 4, 5, 6, 7};
  CHECK(pairwise_sum(ints) == 28.0);
  CHECK(pairwise_sum(ints.data(), 3, 2) == 1.0 + 3.0 + 5.0);
}

TEST_CASE("jackknife matches brute-force leave-one-out") {
  RngStream rng(1);
  const int n = 40;
  Eigen::MatrixXd x(n, 2);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = rng.normal();
    x(i, 1) = 0.5 * x(i, 0) + rng.normal();
  }
  const auto jk = covariance_jackknife(x);
  auto cov = [](const Eigen::MatrixXd& m) {
    const Eigen::RowVectorXd mu = m.colwise().mean();
    const Eigen::MatrixXd c = m.rowwise() - mu;
    return Eigen::MatrixXd(c.transpose() * c / double(m.rows() - 1));
  };
  CHECK((jk.cov - cov(x)).norm() < 1e-13);
  std::vector<Eigen::MatrixXd> loo;
  for (int i = 0; i < n; ++i) {
    Eigen::MatrixXd y(n - 1, 2);
    for (int r = 0, k = 0; r < n; ++r)
      if (r != i) y.row(k++) = x.row(r);
    loo.push_back(cov(y));
  }
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, 2);
  for (const auto& c : loo) mean += c / n;
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(2, 2);
  for (const auto& c : loo) var += (c - mean).cwiseAbs2();
  const Eigen::MatrixXd se = (var * double(n - 1) / n).cwiseSqrt();
  CHECK((jk.se - se).norm() < 1e-12);
  CHECK(jk.mean_se(0) == doctest::Approx(std::sqrt(jk.cov(0, 0) / n)).epsilon(1e-12));
}

TEST_CASE("normal cdf and KS") {
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(kolmogorov_survival(1.3580986393225505) == doctest::Approx(0.05).epsilon(1e-6));
  CHECK(kolmogorov_survival(1.6276236115189504) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(kolmogorov_survival(0.0) == 1.0);
  // One point at 0: D = 1/2.
  CHECK(ks_statistic_normal({0.0}) == doctest::Approx(0.5));
  CHECK(ks_statistic_two_sample({1, 2, 3}, {4, 5, 6}) == 1.0);
  CHECK(ks_statistic_two_sample({1, 2, 3}, {1, 2, 3}) == 0.0);
  CHECK(ks_two_sample_critical(100, 100, 0.05) ==
        doctest::Approx(std::sqrt(-std::log(0.025) / 2) * std::sqrt(0.02)).epsilon(1e-12));

  RngStream rng(2);
  std::vector<double> z(5000), shifted(5000);
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = rng.normal();
    shifted[i] = z[i] + 0.2;
  }
  CHECK(ks_pvalue(ks_statistic_normal(z), z.size()) > 0.01);
  CHECK(ks_pvalue(ks_statistic_normal(shifted), z.size()) < 1e-6);
}

TEST_CASE("KS p-values are uniform under the null") {
  RngStream rng(3);
  int below = 0;
  const int trials = 400;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> z(200);
    for (auto& v : z) v = rng.normal();
    below += ks_pvalue(ks_statistic_normal(z), z.size()) < 0.1;
  }
  CHECK(std::abs(below - 40) < 20);
}

TEST_CASE("keyed streams") {
  RngStream a = RngStream::keyed(5, 7), b = RngStream::keyed(5, 7), c = RngStream::keyed(5, 8);
  CHECK(a() == b());
  CHECK(a() != c());
  RngStream p(9);
  const auto child = p.split(3)();
  for (int i = 0; i < 100; ++i) p();
  CHECK(p.split(3)() == child);
  double m = 0;
  for (int i = 0; i < 100000; ++i) m += a.uniform();
  CHECK(m / 100000 == doctest::Approx(0.5).epsilon(0.01));
}
