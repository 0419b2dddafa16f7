#pragma once

// Deterministic reductions, a minimal static-partition thread pool, and the
// Kolmogorov-Smirnov machinery used by the CLT checks.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <vector>

namespace semiflex {

/// Runs body(begin, end) over [0, count) split into contiguous blocks, one
/// per worker. Results must be written to disjoint slots indexed by the
/// loop variable, so the outcome never depends on `threads`.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t, std::size_t)>& body);

/// Resolves a --threads value: 0 means hardware concurrency.
int resolve_threads(int requested);

/// Pairwise (tree) summation in a fixed order.
double pairwise_sum(const double* x, std::size_t n, std::size_t stride = 1);
inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

/// Kahan-compensated accumulator.
class KahanSum {
 public:
  void add(double x) noexcept {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const noexcept { return s_; }

 private:
  double s_ = 0.0, c_ = 0.0;
};

/// Column means of an n x p sample matrix via pairwise sums.
Eigen::VectorXd column_means(const Eigen::MatrixXd& x);

/// Sample covariance (divisor n - 1) with closed-form delete-one jackknife
/// standard errors for each entry.
struct CovarianceJackknife {
  Eigen::MatrixXd cov;
  Eigen::MatrixXd se;
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_se;
};
CovarianceJackknife covariance_jackknife(const Eigen::MatrixXd& x);

/// Standard normal CDF.
double normal_cdf(double x);

/// One-sample KS statistic against the standard normal.
double ks_statistic_normal(std::vector<double> x);

/// Two-sample KS statistic.
double ks_statistic_two_sample(std::vector<double> a, std::vector<double> b);

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} e^{-2 k^2 lambda^2}.
double kolmogorov_survival(double lambda);

/// p-value of a one-sample KS statistic with Stephens' finite-n correction.
double ks_pvalue(double d, std::size_t n);

/// Two-sample critical value c(alpha) sqrt((n + m) / (n m)) with
/// c(alpha) = sqrt(-ln(alpha / 2) / 2).
double ks_two_sample_critical(std::size_t n, std::size_t m, double alpha);

}  // namespace semiflex
