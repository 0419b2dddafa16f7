#include "semiflex/chain.hpp"

#include "semiflex/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace semiflex {

namespace {

template <int D>
using Mat = Eigen::Matrix<double, D, D>;
template <int D>
using Vec = Eigen::Matrix<double, D, 1>;

constexpr std::size_t kPolarEvery = 256;
constexpr std::size_t kProbeEvery = 16;
constexpr double kDriftProbe = 1e-9;

template <int D>
void polar_in_place(Mat<D>& p) {
  Eigen::JacobiSVD<Mat<D>> svd(p, Eigen::ComputeFullU | Eigen::ComputeFullV);
  p = svd.matrixU() * svd.matrixV().transpose();
}

template <int D>
double defect(const Mat<D>& p) {
  return (p.transpose() * p - Mat<D>::Identity(p.rows(), p.cols())).norm();
}

// P_j = P_{j-1} w_j r_j, X_j = X_{j-1} + P_j e^d. `omega` is null for the
// identity backbone. on_step(j, X_j, v_j) is called for j = 1..n.
template <int D, class OnStep>
void run_chain(const RotationLaw& q, const std::vector<Mat<D>>* omega, const Mat<D>& frame, std::size_t n,
               RngStream& rng, OnStep&& on_step) {
  const int d = static_cast<int>(frame.rows());
  Mat<D> p = frame, r, tmp;
  Vec<D> x = p.col(d - 1);
  for (std::size_t j = 1; j <= n; ++j) {
    sample_into<D>(q, rng, r);
    if (omega) {
      tmp.noalias() = p * (*omega)[j - 1];
      p.noalias() = tmp * r;
    } else {
      tmp.noalias() = p * r;
      p = tmp;
    }
    if (j % kPolarEvery == 0 || (j % kProbeEvery == 0 && defect<D>(p) > kDriftProbe)) polar_in_place<D>(p);
    x += p.col(d - 1);
    on_step(j, x, p.col(d - 1));
  }
}

template <int D>
ChainTrajectory trajectory_impl(const RotationLaw& q, const DisorderModel& omega, std::uint64_t start,
                                const Rotation& frame, std::size_t n, RngStream& rng) {
  const int d = frame.dim();
  std::vector<Mat<D>> window;
  const bool identity = omega.is_identity();
  if (!identity) omega.window_into<D>(start, n, window);
  ChainTrajectory t;
  t.dim = d;
  t.frame = frame;
  t.positions.reserve(n + 1);
  t.bonds.reserve(n);
  t.positions.push_back(frame.matrix().col(d - 1));
  const Mat<D> f = frame.matrix();
  run_chain<D>(q, identity ? nullptr : &window, f, n, rng, [&](std::size_t, const Vec<D>& x, const auto& v) {
    t.positions.emplace_back(x);
    t.bonds.emplace_back(v);
  });
  return t;
}

ChainTrajectory dispatch_trajectory(const RotationLaw& q, const DisorderModel& omega, std::uint64_t start,
                                    const Rotation& frame, std::size_t n, RngStream& rng) {
  if (q.dim() != frame.dim() || omega.dim() != frame.dim()) {
    throw std::invalid_argument("simulate_chain: dimension mismatch between law, disorder and v0");
  }
  switch (frame.dim()) {
    case 2: return trajectory_impl<2>(q, omega, start, frame, n, rng);
    case 3: return trajectory_impl<3>(q, omega, start, frame, n, rng);
    default: return trajectory_impl<Eigen::Dynamic>(q, omega, start, frame, n, rng);
  }
}

template <int D>
void endpoints_impl(const RotationLaw& q, const DisorderModel& omega, const Rotation& frame,
                    EndpointSamples& out, std::size_t replicas, std::uint64_t seed, int threads) {
  const int d = frame.dim();
  const std::size_t n = out.checkpoints.back();
  std::vector<Mat<D>> window;
  const bool identity = omega.is_identity();
  if (!identity) omega.window_into<D>(1, n, window);
  const Mat<D> f = frame.matrix();
  const Vec<D> x0 = f.col(d - 1);
  parallel_for(replicas, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RngStream rng = RngStream::keyed(seed, i);
      std::size_t c = 0;
      while (c < out.checkpoints.size() && out.checkpoints[c] == 0) out.x[c++].row(i) = x0.transpose();
      run_chain<D>(q, identity ? nullptr : &window, f, n, rng, [&](std::size_t j, const Vec<D>& x, const auto&) {
        while (c < out.checkpoints.size() && out.checkpoints[c] == j) out.x[c++].row(i) = x.transpose();
      });
    }
  });
}

}  // namespace

Vector RescaledPath::at(double t) const {
  if (knots.empty()) throw std::logic_error("RescaledPath: empty");
  const double s = t * static_cast<double>(N);
  if (s < 0.0 || s > static_cast<double>(knots.size() - 1) + 1e-12) {
    throw std::out_of_range("RescaledPath::at: time outside the path");
  }
  const auto j = std::min<std::size_t>(static_cast<std::size_t>(std::floor(s)), knots.size() - 1);
  if (j + 1 >= knots.size()) return knots.back();
  const double w = s - static_cast<double>(j);
  return (1.0 - w) * knots[j] + w * knots[j + 1];
}

ChainTrajectory simulate_chain(const RotationLaw& q, const DisorderModel& omega, const Rotation& frame,
                               std::size_t n, RngStream& rng) {
  return dispatch_trajectory(q, omega, 1, frame, n, rng);
}

ChainTrajectory simulate_chain(const RotationLaw& q, const DisorderModel& omega, const UnitVector& v0,
                               std::size_t n, RngStream& rng) {
  return dispatch_trajectory(q, omega, 1, frame_from_direction(v0), n, rng);
}

ChainTrajectory simulate_chain(const RotationLaw& q, DisorderStream& omega, const UnitVector& v0,
                               std::size_t n, RngStream& rng) {
  auto t = dispatch_trajectory(q, omega.model(), omega.cursor(), frame_from_direction(v0), n, rng);
  for (std::size_t i = 0; i < n; ++i) omega.next();
  return t;
}

RescaledPath rescale(const ChainTrajectory& traj, long N) {
  if (N <= 0) throw std::invalid_argument("rescale: N must be positive");
  if (static_cast<std::size_t>(N) > traj.steps()) throw std::invalid_argument("rescale: N exceeds trajectory length");
  RescaledPath p;
  p.N = N;
  const double s = 1.0 / std::sqrt(static_cast<double>(N));
  p.knots.reserve(traj.positions.size());
  for (const auto& x : traj.positions) p.knots.push_back(s * x);
  return p;
}

const Matrix& EndpointSamples::at(std::size_t n) const {
  for (std::size_t c = 0; c < checkpoints.size(); ++c)
    if (checkpoints[c] == n) return x[c];
  throw std::out_of_range("EndpointSamples: n was not a checkpoint");
}

EndpointSamples simulate_endpoints(const RotationLaw& q, const DisorderModel& omega, const Rotation& frame,
                                   std::vector<std::size_t> checkpoints, std::size_t replicas,
                                   std::uint64_t master_seed, int threads) {
  if (checkpoints.empty()) throw std::invalid_argument("simulate_endpoints: no checkpoints");
  if (q.dim() != frame.dim() || omega.dim() != frame.dim()) {
    throw std::invalid_argument("simulate_endpoints: dimension mismatch");
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
  EndpointSamples out;
  out.dim = frame.dim();
  out.checkpoints = checkpoints;
  out.x.assign(checkpoints.size(), Matrix::Zero(replicas, frame.dim()));
  switch (frame.dim()) {
    case 2: endpoints_impl<2>(q, omega, frame, out, replicas, master_seed, threads); break;
    case 3: endpoints_impl<3>(q, omega, frame, out, replicas, master_seed, threads); break;
    default: endpoints_impl<Eigen::Dynamic>(q, omega, frame, out, replicas, master_seed, threads); break;
  }
  return out;
}

std::vector<Vector> expected_positions(const Matrix& rbar, const DisorderModel& omega, const Rotation& frame,
                                       const std::vector<std::size_t>& checkpoints) {
  const int d = frame.dim();
  const std::size_t n = checkpoints.empty() ? 0 : *std::max_element(checkpoints.begin(), checkpoints.end());
  std::vector<Matrix> window;
  const bool identity = omega.is_identity();
  if (!identity) omega.window_into<Eigen::Dynamic>(1, n, window);
  std::vector<Vector> by_step;
  by_step.reserve(n + 1);
  Matrix m = frame.matrix();
  Vector x = m.col(d - 1);
  by_step.push_back(x);
  for (std::size_t j = 1; j <= n; ++j) {
    m = identity ? Matrix(m * rbar) : Matrix(m * window[j - 1] * rbar);
    x += m.col(d - 1);
    by_step.push_back(x);
  }
  std::vector<Vector> out;
  for (std::size_t c : checkpoints) out.push_back(by_step[c]);
  return out;
}

double persistence_correlation(const RotationLaw& q, const std::optional<DisorderModel>& omega, std::size_t n) {
  const auto& e = q.exact_moments();
  if (!e) throw std::domain_error("persistence_correlation: law has no exact r_bar");
  const int d = q.dim();
  Eigen::RowVectorXd w = Eigen::RowVectorXd::Zero(d);
  w(d - 1) = 1.0;
  std::vector<Matrix> window;
  const bool homogeneous = !omega || omega->is_identity();
  if (!homogeneous) omega->window_into<Eigen::Dynamic>(1, n, window);
  for (std::size_t j = 0; j < n; ++j) w = homogeneous ? Eigen::RowVectorXd(w * e->mean) : Eigen::RowVectorXd(w * window[j] * e->mean);
  return w(d - 1);
}

double persistence_length(const RotationLaw& q) {
  const auto& e = q.exact_moments();
  if (!e) throw std::domain_error("persistence_length: law has no exact r_bar");
  const int d = q.dim();
  const double c = e->mean(d - 1, d - 1);
  if ((e->mean - c * Matrix::Identity(d, d)).norm() > 1e-12) {
    throw std::domain_error("persistence_length: r_bar is not a multiple of the identity");
  }
  if (!(std::abs(c) < 1.0) || c <= 0.0) throw std::domain_error("persistence_length: needs 0 < c < 1");
  return -1.0 / std::log(c);
}

CovarianceEstimate empirical_cov(const Matrix& endpoints, std::size_t n) {
  if (n == 0) throw std::invalid_argument("empirical_cov: n must be positive");
  const auto jk = covariance_jackknife(endpoints);
  CovarianceEstimate out;
  const double scale = 1.0 / static_cast<double>(n);
  out.matrix = jk.cov * scale;
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  out.se = jk.se * scale;
  out.mean = jk.mean;
  out.mean_se = jk.mean_se;
  out.replicas = static_cast<std::size_t>(endpoints.rows());
  out.n = n;
  return out;
}

CovarianceEstimate empirical_cov(const RotationLaw& q, const DisorderModel& omega, const UnitVector& v0,
                                 std::size_t n, std::size_t replicas, std::uint64_t master_seed, int threads) {
  if (replicas < 3) throw std::invalid_argument("empirical_cov: need at least 3 replicas");
  const auto s = simulate_endpoints(q, omega, frame_from_direction(v0), {n}, replicas, master_seed, threads);
  return empirical_cov(s.x.front(), n);
}

CltReport clt_from_endpoints(const Matrix& endpoints, std::size_t n, double sigma2,
                             const std::optional<Vector>& center, double alpha) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("clt_test: sigma2 reference must be positive");
  if (n == 0) throw std::invalid_argument("clt_test: n must be positive");
  const auto r = endpoints.rows(), d = endpoints.cols();
  CltReport rep;
  rep.n = n;
  rep.replicas = static_cast<std::size_t>(r);
  rep.sigma2 = sigma2;
  rep.alpha = alpha;
  rep.centered = center.has_value();
  const double scale = 1.0 / std::sqrt(static_cast<double>(n) * sigma2);
  rep.pass = true;
  for (Eigen::Index i = 0; i < d; ++i) {
    std::vector<double> z(r);
    const double c = center ? (*center)(i) : 0.0;
    for (Eigen::Index k = 0; k < r; ++k) z[k] = (endpoints(k, i) - c) * scale;
    const double ks = ks_statistic_normal(z);
    const double p = ks_pvalue(ks, z.size());
    rep.ks.push_back(ks);
    rep.p_values.push_back(p);
    if (p < alpha) rep.pass = false;
  }
  const auto jk = covariance_jackknife(endpoints);
  rep.correlation = Matrix::Identity(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double spread = 1e-12 * std::max(1.0, endpoints.col(i).cwiseAbs().maxCoeff());
    if (!(jk.cov(i, i) > spread * spread)) rep.degenerate = true;
  }
  if (rep.degenerate) {
    rep.pass = false;
  } else {
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j)
        if (i != j) rep.correlation(i, j) = jk.cov(i, j) / std::sqrt(jk.cov(i, i) * jk.cov(j, j));
  }
  return rep;
}

CltReport clt_test(const RotationLaw& q, const DisorderModel& omega, const UnitVector& v0, std::size_t n,
                   std::size_t replicas, double sigma2, std::uint64_t master_seed, int threads, double alpha) {
  const Rotation frame = frame_from_direction(v0);
  const auto s = simulate_endpoints(q, omega, frame, {n}, replicas, master_seed, threads);
  std::optional<Vector> center;
  if (q.exact_moments()) center = expected_positions(q.exact_moments()->mean, omega, frame, {n}).front();
  return clt_from_endpoints(s.x.front(), n, sigma2, center, alpha);
}

}  // namespace semiflex
