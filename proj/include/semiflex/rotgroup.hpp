#pragma once

#include "semiflex/rng.hpp"
#include "semiflex/tensor.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <complex>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace semiflex {

inline constexpr double kRotationTol = 1e-10;

/// Element of SO(d), d >= 2. Invariants (orthogonality and det = +1) are
/// checked on construction.
class Rotation {
 public:
  Rotation() = default;

  static Rotation identity(int dim);
  /// Validates m against the SO(d) invariants within `tol`.
  static Rotation from_matrix(const Matrix& m, double tol = kRotationTol);
  /// Planar rotation by `angle` radians (d = 2).
  static Rotation planar(double angle);
  /// Rotation by `angle` in the (e^i, e^j) coordinate plane of R^d.
  static Rotation in_plane(int dim, int i, int j, double angle);
  /// Rodrigues rotation about a unit axis (d = 3).
  static Rotation axis_angle(const Eigen::Vector3d& axis, double angle);

  int dim() const noexcept { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const noexcept { return m_; }
  /// Angle of an SO(2) element in (-pi, pi].
  double angle() const;

  Rotation inverse() const;

  /// Row-major entries.
  std::vector<double> row_major() const;

 private:
  explicit Rotation(Matrix m) : m_(std::move(m)) {}
  friend Rotation reorthonormalize(const Matrix& m);
  friend Rotation compose(const Rotation& a, const Rotation& b);
  Matrix m_;
};

class UnitVector {
 public:
  UnitVector() = default;
  /// Throws unless |coords| = 1 within 1e-12.
  explicit UnitVector(Vector coords);
  /// Normalizes a nonzero vector.
  static UnitVector normalized(const Vector& v);
  /// Canonical basis vector e^k (1-based, as in e^1 ... e^d).
  static UnitVector basis(int dim, int k);

  int dim() const noexcept { return static_cast<int>(v_.size()); }
  const Vector& coords() const noexcept { return v_; }

 private:
  Vector v_;
};

/// Matrix product a * b; re-orthonormalized if fp drift exceeds 1e-10.
Rotation compose(const Rotation& a, const Rotation& b);

/// g v, renormalized if drift exceeds 1e-12.
UnitVector apply(const Rotation& g, const UnitVector& v);

/// Nearest rotation by polar decomposition. Requires det(m) > 0 and
/// ||m - O||_op <= 0.1 for some orthogonal O.
Rotation reorthonormalize(const Matrix& m);

/// ||m^T m - I||_hs.
double orthogonality_defect(const Matrix& m);

/// A rotation R with R e^d = v: the product of the Householder reflections
/// through e^d and through v + e^d, i.e. the rotation in the plane of e^d
/// and v. At v = -e^d the 180 degree rotation in the (e^1, e^d) plane is used.
Rotation frame_from_direction(const UnitVector& v);

// ---------------------------------------------------------------------------
// Angle laws: the one-parameter ingredient of SO(2) laws and of SO(3)
// axis-angle laws.

struct Envelope {
  // |E e^{i m theta}| <= constant / |m|^power for all m >= 1; power 0 means
  // no decaying envelope is available.
  double constant = 0.0;
  int power = 0;
  bool exact_zero = false;  // all nontrivial coefficients vanish

  bool available() const noexcept { return exact_zero || power > 0; }
  double at(double m) const;
};

class AngleLaw {
 public:
  enum class Kind { uniform, atoms, haar_so3, tabulated };

  static AngleLaw uniform(double lo, double hi);
  static AngleLaw atoms(std::vector<double> angles, std::vector<double> weights);
  static AngleLaw dirac(double at);
  /// Angle density (1 - cos t) / pi on [0, pi]: the rotation angle under Haar on SO(3).
  static AngleLaw haar_so3();
  /// Piecewise-linear density through (theta[i], density[i]); normalized on construction.
  static AngleLaw tabulated(std::vector<double> theta, std::vector<double> density);

  Kind kind() const noexcept { return kind_; }
  bool has_density() const noexcept { return kind_ != Kind::atoms; }
  double support_lo() const noexcept { return lo_; }
  double support_hi() const noexcept { return hi_; }
  const std::vector<double>& angles() const noexcept { return angles_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  /// E e^{i m theta}.
  std::complex<double> characteristic(int m) const;
  double pdf(double t) const;
  double sample(RngStream& rng) const;
  Envelope envelope() const;

  nlohmann::json to_json() const;

 private:
  Kind kind_ = Kind::uniform;
  double lo_ = 0.0, hi_ = 0.0;
  std::vector<double> angles_, weights_;  // atoms; tabulated grid and density
  std::vector<double> cumulative_;         // atoms
  std::shared_ptr<const std::vector<double>> cdf_table_;  // inverse-CDF grid
};

AngleLaw make_angle_law(const nlohmann::json& spec);

// ---------------------------------------------------------------------------

/// First and second moments (r_bar = E r, E[r (x) r]).
struct Moments {
  LinOp mean;
  SuperOp second;
};

/// Monte Carlo moments with per-entry standard errors.
struct MomentEstimate {
  Moments value;
  Matrix mean_se;    // d x d
  Matrix second_se;  // d^2 x d^2
  std::size_t samples = 0;
};

enum class LawKind {
  haar,
  so2_window,
  so2_atoms,
  so3_axis_angle,
  so3_conjugation_invariant,
  finite_support,
  dirac
};

std::string to_string(LawKind k);

/// Law Q of the thermal noise r_1 on SO(d). Immutable, cheap to copy.
class RotationLaw {
 public:
  static RotationLaw haar(int dim);
  static RotationLaw so2_window(double a, double b);
  static RotationLaw so2_atoms(std::vector<double> angles, std::vector<double> weights);
  /// Fixed axis (unit 3-vector) or, when `axis` is empty, uniform axis on S^2.
  static RotationLaw so3_axis_angle(std::optional<Eigen::Vector3d> axis, AngleLaw angle);
  /// Axis uniform on S^2, angle drawn from a law on [0, pi].
  static RotationLaw so3_conjugation_invariant(AngleLaw angle);
  static RotationLaw finite_support(std::vector<Rotation> rotations, std::vector<double> weights);
  static RotationLaw dirac(Rotation g);

  int dim() const;
  LawKind kind() const;
  /// Angle law for SO(2) and axis-angle kinds.
  const AngleLaw* angle_law() const;
  const std::optional<Eigen::Vector3d>& fixed_axis() const;
  const std::vector<Rotation>& support() const;
  const std::vector<double>& weights() const;
  /// True when the law is invariant under conjugation by all of SO(d).
  bool conjugation_invariant() const;

  const std::optional<Moments>& exact_moments() const;
  nlohmann::json to_json() const;

  struct Impl;

 private:
  explicit RotationLaw(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  friend const Impl& law_impl(const RotationLaw&);
  std::shared_ptr<const Impl> impl_;
};

/// Parse a law spec such as {"kind": "so2-window", "a": -0.314, "b": 0.314}.
RotationLaw make_law(const nlohmann::json& spec);

Rotation sample(const RotationLaw& law, RngStream& rng);

/// Fixed-size sampling used by the simulation kernels (D = 2, 3 or Eigen::Dynamic).
template <int D>
void sample_into(const RotationLaw& law, RngStream& rng, Eigen::Matrix<double, D, D>& out);

extern template void sample_into<2>(const RotationLaw&, RngStream&, Eigen::Matrix<double, 2, 2>&);
extern template void sample_into<3>(const RotationLaw&, RngStream&, Eigen::Matrix<double, 3, 3>&);
extern template void sample_into<Eigen::Dynamic>(const RotationLaw&, RngStream&, Matrix&);

/// Closed-form moments; throws std::domain_error when none exists for the law.
Moments moments_exact(const RotationLaw& law);

/// Monte Carlo moments from `samples` draws.
MomentEstimate moments_mc(const RotationLaw& law, std::size_t samples, RngStream& rng);

// JSON helpers for rotations (row-major arrays of d^2 numbers).
nlohmann::json rotation_to_json(const Rotation& g);
Rotation rotation_from_json(const nlohmann::json& j);
Matrix matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Matrix& m);

/// The 24 rotations of the cube (signed permutation matrices with det +1).
std::vector<Rotation> cube_group();

}  // namespace semiflex
