#include "semiflex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

namespace semiflex {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t, std::size_t)>& body) {
  if (count == 0) return;
  const std::size_t workers = std::min<std::size_t>(std::max(1, threads), count);
  if (workers == 1) {
    body(0, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk, end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

double pairwise_sum(const double* x, std::size_t n, std::size_t stride) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i * stride];
    return s;
  }
  const std::size_t h = n / 2;
  return pairwise_sum(x, h, stride) + pairwise_sum(x + h * stride, n - h, stride);
}

Eigen::VectorXd column_means(const Eigen::MatrixXd& x) {
  Eigen::VectorXd m(x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) m(j) = pairwise_sum(x.col(j).data(), x.rows()) / x.rows();
  return m;
}

CovarianceJackknife covariance_jackknife(const Eigen::MatrixXd& x) {
  const auto r = x.rows(), p = x.cols();
  if (r < 3) throw std::invalid_argument("covariance_jackknife: need at least 3 samples");
  const double rn = static_cast<double>(r);
  CovarianceJackknife out;
  out.mean = column_means(x);
  const Eigen::MatrixXd c = x.rowwise() - out.mean.transpose();

  // Scatter S = sum_i c_i c_i^T, accumulated pairwise per entry.
  Eigen::MatrixXd s(p, p);
  std::vector<double> buf(r);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = a; b < p; ++b) {
      for (Eigen::Index i = 0; i < r; ++i) buf[i] = c(i, a) * c(i, b);
      s(a, b) = s(b, a) = pairwise_sum(buf);
    }
  out.cov = s / (rn - 1.0);

  // Leave-one-out: S_{-i} = S - (R / (R - 1)) c_i c_i^T, C_{-i} = S_{-i} / (R - 2).
  out.se.resize(p, p);
  const double f = rn / (rn - 1.0);
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = a; b < p; ++b) {
      for (Eigen::Index i = 0; i < r; ++i) buf[i] = (s(a, b) - f * c(i, a) * c(i, b)) / (rn - 2.0);
      const double mean_loo = pairwise_sum(buf) / rn;
      for (auto& v : buf) v = (v - mean_loo) * (v - mean_loo);
      out.se(a, b) = out.se(b, a) = std::sqrt((rn - 1.0) / rn * pairwise_sum(buf));
    }

  out.mean_se.resize(p);
  for (Eigen::Index a = 0; a < p; ++a) out.mean_se(a) = std::sqrt(std::max(out.cov(a, a), 0.0) / rn);
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_statistic_normal(std::vector<double> x) {
  if (x.empty()) throw std::invalid_argument("ks_statistic_normal: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  return d;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;  // the series converges slowly here and 1 - Q(0.2) < 1e-12
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 ? 1.0 : -1.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  return kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
}

double ks_two_sample_critical(std::size_t n, std::size_t m, double alpha) {
  const double c = std::sqrt(-std::log(alpha / 2.0) / 2.0);
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * m));
}

}  // namespace semiflex
