#pragma once

// Quenched chain X_n = v0 + sum_{j<=n} v_j with v_j = (R w_1 r_1 ... w_j r_j) e^d.

#include "semiflex/disorder.hpp"
#include "semiflex/rotgroup.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace semiflex {

struct ChainTrajectory {
  int dim = 0;
  Rotation frame;                 // R, with R e^d = v0
  std::vector<Vector> positions;  // X_0 = v0, ..., X_n
  std::vector<Vector> bonds;      // v_1, ..., v_n

  std::size_t steps() const noexcept { return bonds.size(); }
  const Vector& v0() const { return positions.front(); }
};

/// Knots X_j / sqrt(N) at times j / N, linearly interpolated.
struct RescaledPath {
  long N = 0;
  std::vector<Vector> knots;

  /// Value at time t in [0, (knots.size() - 1) / N].
  Vector at(double t) const;
};

/// Full trajectory. The frame R is recovered from v0 by frame_from_direction.
ChainTrajectory simulate_chain(const RotationLaw& q, const DisorderModel& omega, const UnitVector& v0,
                               std::size_t n, RngStream& rng);
ChainTrajectory simulate_chain(const RotationLaw& q, const DisorderModel& omega, const Rotation& frame,
                               std::size_t n, RngStream& rng);
/// Consumes omega from a stream (its cursor advances by n).
ChainTrajectory simulate_chain(const RotationLaw& q, DisorderStream& omega, const UnitVector& v0,
                               std::size_t n, RngStream& rng);

RescaledPath rescale(const ChainTrajectory& traj, long N);

/// Endpoints X_n of independent thermal replicas sharing one quenched omega.
/// Replica i draws from RngStream::keyed(master_seed, i). One matrix
/// (replicas x d) is returned per requested n (checkpoints, ascending).
struct EndpointSamples {
  int dim = 0;
  std::vector<std::size_t> checkpoints;
  std::vector<Matrix> x;  // x[c](i, :) = X_{checkpoints[c]} of replica i

  const Matrix& at(std::size_t n) const;
};

EndpointSamples simulate_endpoints(const RotationLaw& q, const DisorderModel& omega, const Rotation& frame,
                                   std::vector<std::size_t> checkpoints, std::size_t replicas,
                                   std::uint64_t master_seed, int threads = 1);

/// Thermal mean E X_n at each checkpoint, from the exact r_bar
/// (v0 + sum_j R w_1 r_bar ... w_j r_bar e^d).
std::vector<Vector> expected_positions(const Matrix& rbar, const DisorderModel& omega, const Rotation& frame,
                                       const std::vector<std::size_t>& checkpoints);

/// <e^d, r_bar^n e^d> (homogeneous) or <e^d, w_1 r_bar ... w_n r_bar e^d>
/// for the given quenched window. Throws if the law has no exact r_bar.
double persistence_correlation(const RotationLaw& q, const std::optional<DisorderModel>& omega, std::size_t n);

/// -1 / ln |c| for the homogeneous decay rate c = <e^d, r_bar e^d> when r_bar = c I.
double persistence_length(const RotationLaw& q);

struct CovarianceEstimate {
  Matrix matrix;  // Cov(X_n) / n
  Matrix se;      // jackknife standard errors of `matrix`
  Vector mean;    // replica mean of X_n
  Vector mean_se;
  std::size_t replicas = 0;
  std::size_t n = 0;
};

CovarianceEstimate empirical_cov(const Matrix& endpoints, std::size_t n);
CovarianceEstimate empirical_cov(const RotationLaw& q, const DisorderModel& omega, const UnitVector& v0,
                                 std::size_t n, std::size_t replicas, std::uint64_t master_seed,
                                 int threads = 1);

struct CltReport {
  std::size_t n = 0;
  std::size_t replicas = 0;
  double sigma2 = 0.0;
  double alpha = 0.01;
  bool centered = false;             // whether E X_n was subtracted
  std::vector<double> ks;            // per-component statistic
  std::vector<double> p_values;
  Matrix correlation;                // pairwise component correlations
  bool degenerate = false;           // some component has zero spread
  bool pass = false;
};

/// Per-component one-sample KS test of (X_n^i - center^i) / sqrt(n sigma2)
/// against N(0, 1); passes when every p-value is at least alpha.
CltReport clt_from_endpoints(const Matrix& endpoints, std::size_t n, double sigma2,
                             const std::optional<Vector>& center = std::nullopt, double alpha = 0.01);

/// Simulates the replicas and runs clt_from_endpoints, centering by the exact
/// thermal mean when r_bar is available in closed form.
CltReport clt_test(const RotationLaw& q, const DisorderModel& omega, const UnitVector& v0, std::size_t n,
                   std::size_t replicas, double sigma2, std::uint64_t master_seed, int threads = 1,
                   double alpha = 0.01);

}  // namespace semiflex
