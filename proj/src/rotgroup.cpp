#include "semiflex/rotgroup.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <array>
#include <sstream>
#include <stdexcept>

namespace semiflex {

using nlohmann::json;
constexpr double kPi = std::numbers::pi;

namespace {

constexpr int kInverseCdfCells = 1 << 14;

Matrix planar_matrix(double t) {
  Matrix m(2, 2);
  const double c = std::cos(t), s = std::sin(t);
  m << c, -s, s, c;
  return m;
}

Matrix rodrigues(const Eigen::Vector3d& k, double t) {
  const double c = std::cos(t), s = std::sin(t);
  Eigen::Matrix3d kx;
  kx << 0, -k.z(), k.y(), k.z(), 0, -k.x(), -k.y(), k.x(), 0;
  Eigen::Matrix3d r = c * Eigen::Matrix3d::Identity() + s * kx + (1 - c) * (k * k.transpose());
  return r;
}

void check_weights(const std::vector<double>& w, std::size_t n, const char* what) {
  if (w.size() != n) throw std::invalid_argument(std::string(what) + ": weights length mismatch");
  double total = 0.0;
  for (double x : w) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument(std::string(what) + ": weights must be nonnegative");
    }
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw std::invalid_argument(std::string(what) + ": weights must sum to 1");
  }
}

std::vector<double> cumulative_of(const std::vector<double>& w) {
  std::vector<double> c(w.size());
  std::partial_sum(w.begin(), w.end(), c.begin());
  if (!c.empty()) c.back() = 1.0;
  return c;
}

std::size_t pick(const std::vector<double>& cumulative, double u) {
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                               cumulative.size() - 1);
}

// Inverse-CDF table: cdf values at lo + j * (hi - lo) / cells, j = 0..cells.
template <class Cdf>
std::shared_ptr<const std::vector<double>> make_cdf_table(double lo, double hi, Cdf cdf) {
  auto table = std::make_shared<std::vector<double>>(kInverseCdfCells + 1);
  for (int j = 0; j <= kInverseCdfCells; ++j) {
    (*table)[j] = cdf(lo + (hi - lo) * j / kInverseCdfCells);
  }
  const double total = table->back();
  for (double& x : *table) x /= total;
  table->back() = 1.0;
  return table;
}

double invert_table(const std::vector<double>& cdf, double lo, double hi, double u) {
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t j = static_cast<std::size_t>(it - cdf.begin());
  j = std::clamp<std::size_t>(j, 1, cdf.size() - 1);
  const double c0 = cdf[j - 1], c1 = cdf[j];
  const double frac = c1 > c0 ? (u - c0) / (c1 - c0) : 0.5;
  const double h = (hi - lo) / (cdf.size() - 1);
  return lo + h * (static_cast<double>(j - 1) + frac);
}

// Integral of (alpha + slope * t) * e^{i m t} over [a, b], m != 0.
std::complex<double> linear_times_exp(double a, double b, double alpha, double slope, int m) {
  const std::complex<double> im(0.0, static_cast<double>(m));
  auto prim = [&](double t) {
    const std::complex<double> e = std::exp(im * t);
    return (alpha + slope * t) * e / im - slope * e / (im * im);
  };
  return prim(b) - prim(a);
}

}  // namespace

// ---------------------------------------------------------------------------
// Rotation / UnitVector

double orthogonality_defect(const Matrix& m) {
  return (m.transpose() * m - Matrix::Identity(m.cols(), m.cols())).norm();
}

Rotation Rotation::identity(int dim) {
  if (dim < 2) throw std::invalid_argument("Rotation: d must be >= 2");
  return Rotation(Matrix::Identity(dim, dim));
}

Rotation Rotation::from_matrix(const Matrix& m, double tol) {
  if (m.rows() != m.cols() || m.rows() < 2) {
    throw std::invalid_argument("Rotation: expected a square matrix with d >= 2");
  }
  if (!m.allFinite()) throw std::invalid_argument("Rotation: non-finite entries");
  if (orthogonality_defect(m) > tol) throw std::invalid_argument("Rotation: matrix is not orthogonal");
  if (std::abs(m.determinant() - 1.0) > tol) {
    throw std::invalid_argument("Rotation: determinant is not +1");
  }
  return Rotation(m);
}

Rotation Rotation::planar(double angle) { return Rotation(planar_matrix(angle)); }

Rotation Rotation::in_plane(int dim, int i, int j, double angle) {
  if (dim < 2 || i == j || i < 0 || j < 0 || i >= dim || j >= dim) {
    throw std::invalid_argument("Rotation::in_plane: bad plane");
  }
  Matrix m = Matrix::Identity(dim, dim);
  const double c = std::cos(angle), s = std::sin(angle);
  m(i, i) = c;
  m(j, j) = c;
  m(i, j) = -s;
  m(j, i) = s;
  return Rotation(m);
}

Rotation Rotation::axis_angle(const Eigen::Vector3d& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0)) throw std::invalid_argument("Rotation::axis_angle: zero axis");
  return Rotation(rodrigues(axis / n, angle));
}

double Rotation::angle() const {
  if (dim() != 2) throw std::invalid_argument("Rotation::angle: only defined for d = 2");
  return std::atan2(m_(1, 0), m_(0, 0));
}

Rotation Rotation::inverse() const { return Rotation(m_.transpose()); }

std::vector<double> Rotation::row_major() const {
  std::vector<double> out;
  out.reserve(m_.size());
  for (Eigen::Index i = 0; i < m_.rows(); ++i)
    for (Eigen::Index j = 0; j < m_.cols(); ++j) out.push_back(m_(i, j));
  return out;
}

UnitVector::UnitVector(Vector coords) : v_(std::move(coords)) {
  if (v_.size() < 1 || !v_.allFinite() || std::abs(v_.norm() - 1.0) > 1e-12) {
    throw std::invalid_argument("UnitVector: norm must be 1");
  }
}

UnitVector UnitVector::normalized(const Vector& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::invalid_argument("UnitVector: zero vector");
  return UnitVector(Vector(v / n));
}

UnitVector UnitVector::basis(int dim, int k) {
  if (k < 1 || k > dim) throw std::invalid_argument("UnitVector::basis: index out of range");
  Vector v = Vector::Zero(dim);
  v(k - 1) = 1.0;
  return UnitVector(std::move(v));
}

Rotation compose(const Rotation& a, const Rotation& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("compose: dimension mismatch");
  Matrix p = a.matrix() * b.matrix();
  if (orthogonality_defect(p) > kRotationTol) return reorthonormalize(p);
  return Rotation(std::move(p));
}

UnitVector apply(const Rotation& g, const UnitVector& v) {
  if (g.dim() != v.dim()) throw std::invalid_argument("apply: dimension mismatch");
  Vector w = g.matrix() * v.coords();
  if (std::abs(w.norm() - 1.0) > 1e-12) w.normalize();
  return UnitVector(std::move(w));
}

Rotation reorthonormalize(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 2) {
    throw std::invalid_argument("reorthonormalize: square matrix with d >= 2 required");
  }
  if (!(m.determinant() > 0.0)) {
    throw std::invalid_argument("reorthonormalize: not in SO(d) component");
  }
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double dist = (s.array() - 1.0).abs().maxCoeff();
  if (dist > 0.1) {
    std::ostringstream os;
    os << "reorthonormalize: matrix too far from orthogonal (" << dist << ")";
    throw std::invalid_argument(os.str());
  }
  return Rotation(Matrix(svd.matrixU() * svd.matrixV().transpose()));
}

Rotation frame_from_direction(const UnitVector& v) {
  const int d = v.dim();
  if (d < 2) throw std::invalid_argument("frame_from_direction: d must be >= 2");
  const Vector e = UnitVector::basis(d, d).coords();
  const Vector w = v.coords() + e;
  if (w.norm() < 1e-12) return Rotation::in_plane(d, 0, d - 1, kPi);
  const Matrix he = Matrix::Identity(d, d) - 2.0 * e * e.transpose();
  const Matrix hw = Matrix::Identity(d, d) - 2.0 * w * w.transpose() / w.squaredNorm();
  const Matrix r = hw * he;
  if (orthogonality_defect(r) > 1e-13) return reorthonormalize(r);
  return Rotation::from_matrix(r);
}

// ---------------------------------------------------------------------------
// AngleLaw

double Envelope::at(double m) const {
  if (exact_zero) return 0.0;
  if (power <= 0) return 1.0;
  return std::min(1.0, constant / std::pow(std::abs(m), power));
}

AngleLaw AngleLaw::uniform(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw std::invalid_argument("AngleLaw::uniform: unnormalizable (need lo < hi)");
  }
  if (hi - lo > 2 * kPi + 1e-12) throw std::invalid_argument("AngleLaw::uniform: width exceeds 2 pi");
  AngleLaw a;
  a.kind_ = Kind::uniform;
  a.lo_ = lo;
  a.hi_ = hi;
  return a;
}

AngleLaw AngleLaw::atoms(std::vector<double> angles, std::vector<double> weights) {
  if (angles.empty()) throw std::invalid_argument("AngleLaw::atoms: empty support");
  check_weights(weights, angles.size(), "AngleLaw::atoms");
  AngleLaw a;
  a.kind_ = Kind::atoms;
  a.lo_ = *std::min_element(angles.begin(), angles.end());
  a.hi_ = *std::max_element(angles.begin(), angles.end());
  a.angles_ = std::move(angles);
  a.weights_ = std::move(weights);
  a.cumulative_ = cumulative_of(a.weights_);
  return a;
}

AngleLaw AngleLaw::dirac(double at) { return atoms({at}, {1.0}); }

AngleLaw AngleLaw::haar_so3() {
  AngleLaw a;
  a.kind_ = Kind::haar_so3;
  a.lo_ = 0.0;
  a.hi_ = kPi;
  a.cdf_table_ = make_cdf_table(0.0, kPi, [](double t) { return (t - std::sin(t)) / kPi; });
  return a;
}

AngleLaw AngleLaw::tabulated(std::vector<double> theta, std::vector<double> density) {
  if (theta.size() < 2 || theta.size() != density.size()) {
    throw std::invalid_argument("AngleLaw::tabulated: need >= 2 matching grid points");
  }
  double mass = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!std::isfinite(theta[i]) || !std::isfinite(density[i]) || density[i] < 0.0) {
      throw std::invalid_argument("AngleLaw::tabulated: density must be finite and nonnegative");
    }
    if (i > 0) {
      if (!(theta[i] > theta[i - 1])) {
        throw std::invalid_argument("AngleLaw::tabulated: grid must be increasing");
      }
      mass += 0.5 * (density[i] + density[i - 1]) * (theta[i] - theta[i - 1]);
    }
  }
  if (!(mass > 0.0)) throw std::invalid_argument("AngleLaw::tabulated: unnormalizable density");
  if (theta.back() - theta.front() > 2 * kPi + 1e-12) {
    throw std::invalid_argument("AngleLaw::tabulated: support wider than 2 pi");
  }
  for (double& f : density) f /= mass;

  AngleLaw a;
  a.kind_ = Kind::tabulated;
  a.lo_ = theta.front();
  a.hi_ = theta.back();
  a.angles_ = std::move(theta);
  a.weights_ = std::move(density);
  const auto& th = a.angles_;
  const auto& f = a.weights_;
  auto cdf = [&th, &f](double t) {
    double acc = 0.0;
    for (std::size_t i = 1; i < th.size(); ++i) {
      if (t <= th[i - 1]) break;
      const double b = std::min(t, th[i]);
      const double slope = (f[i] - f[i - 1]) / (th[i] - th[i - 1]);
      const double x = b - th[i - 1];
      acc += f[i - 1] * x + 0.5 * slope * x * x;
    }
    return acc;
  };
  a.cdf_table_ = make_cdf_table(a.lo_, a.hi_, cdf);
  return a;
}

std::complex<double> AngleLaw::characteristic(int m) const {
  if (m == 0) return {1.0, 0.0};
  switch (kind_) {
    case Kind::uniform: {
      const double half = 0.5 * (hi_ - lo_) * m;
      const double sinc = std::sin(half) / half;
      return std::polar(sinc, 0.5 * (hi_ + lo_) * m);
    }
    case Kind::atoms: {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t i = 0; i < angles_.size(); ++i) acc += weights_[i] * std::polar(1.0, m * angles_[i]);
      return acc;
    }
    case Kind::haar_so3: {
      // (1/pi) int_0^pi e^{imt} (1 - cos t) dt
      const int am = std::abs(m);
      const double ecos = am == 1 ? -0.5 : 0.0;
      auto sin_int = [](int k) { return k == 0 ? 0.0 : (1.0 - std::cos(k * kPi)) / k; };
      const double esin = (sin_int(am) - 0.5 * (sin_int(am + 1) + sin_int(am - 1))) / kPi;
      return {ecos, m > 0 ? esin : -esin};
    }
    case Kind::tabulated: {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t i = 1; i < angles_.size(); ++i) {
        const double a = angles_[i - 1], b = angles_[i];
        const double slope = (weights_[i] - weights_[i - 1]) / (b - a);
        acc += linear_times_exp(a, b, weights_[i - 1] - slope * a, slope, m);
      }
      return acc;
    }
  }
  return {0.0, 0.0};
}

double AngleLaw::pdf(double t) const {
  switch (kind_) {
    case Kind::uniform: return (t >= lo_ && t <= hi_) ? 1.0 / (hi_ - lo_) : 0.0;
    case Kind::atoms: throw std::domain_error("AngleLaw::pdf: atomic law has no density");
    case Kind::haar_so3: return (t >= 0 && t <= kPi) ? (1.0 - std::cos(t)) / kPi : 0.0;
    case Kind::tabulated: {
      if (t < lo_ || t > hi_) return 0.0;
      auto it = std::upper_bound(angles_.begin(), angles_.end(), t);
      std::size_t i = std::clamp<std::size_t>(static_cast<std::size_t>(it - angles_.begin()), 1,
                                              angles_.size() - 1);
      const double x = (t - angles_[i - 1]) / (angles_[i] - angles_[i - 1]);
      return weights_[i - 1] + x * (weights_[i] - weights_[i - 1]);
    }
  }
  return 0.0;
}

double AngleLaw::sample(RngStream& rng) const {
  switch (kind_) {
    case Kind::uniform: return lo_ + (hi_ - lo_) * rng.uniform();
    case Kind::atoms: return angles_.size() == 1 ? angles_[0] : angles_[pick(cumulative_, rng.uniform())];
    case Kind::haar_so3:
    case Kind::tabulated: return invert_table(*cdf_table_, lo_, hi_, rng.uniform());
  }
  return 0.0;
}

Envelope AngleLaw::envelope() const {
  Envelope e;
  switch (kind_) {
    case Kind::uniform:
      e.constant = 2.0 / (hi_ - lo_);
      e.power = 1;
      break;
    case Kind::atoms: break;
    case Kind::haar_so3:
      e.constant = 5.0 / kPi;
      e.power = 1;
      break;
    case Kind::tabulated: {
      const auto& th = angles_;
      const auto& f = weights_;
      std::vector<double> slope(th.size() - 1);
      double tv = 0.0;
      for (std::size_t i = 1; i < th.size(); ++i) {
        slope[i - 1] = (f[i] - f[i - 1]) / (th[i] - th[i - 1]);
        tv += std::abs(f[i] - f[i - 1]);
      }
      if (f.front() == 0.0 && f.back() == 0.0) {
        // Two integrations by parts: boundary slopes plus slope jumps.
        double v = std::abs(slope.front()) + std::abs(slope.back());
        for (std::size_t i = 1; i < slope.size(); ++i) v += std::abs(slope[i] - slope[i - 1]);
        e.constant = v;
        e.power = 2;
      } else {
        e.constant = f.front() + f.back() + tv;
        e.power = 1;
      }
      break;
    }
  }
  return e;
}

json AngleLaw::to_json() const {
  switch (kind_) {
    case Kind::uniform: return {{"type", "uniform"}, {"lo", lo_}, {"hi", hi_}};
    case Kind::atoms:
      if (angles_.size() == 1) return {{"type", "dirac"}, {"at", angles_[0]}};
      return {{"type", "atoms"}, {"angles", angles_}, {"weights", weights_}};
    case Kind::haar_so3: return {{"type", "haar"}};
    case Kind::tabulated: return {{"type", "tabulated"}, {"theta", angles_}, {"density", weights_}};
  }
  return {};
}

AngleLaw make_angle_law(const json& spec) {
  if (!spec.is_object() || !spec.contains("type")) {
    throw std::invalid_argument("angle law: object with \"type\" required");
  }
  const std::string type = spec.at("type").get<std::string>();
  if (type == "uniform") return AngleLaw::uniform(spec.at("lo").get<double>(), spec.at("hi").get<double>());
  if (type == "dirac") return AngleLaw::dirac(spec.at("at").get<double>());
  if (type == "atoms") {
    auto angles = spec.at("angles").get<std::vector<double>>();
    std::vector<double> w = spec.contains("weights")
                                ? spec.at("weights").get<std::vector<double>>()
                                : std::vector<double>(angles.size(), 1.0 / angles.size());
    return AngleLaw::atoms(std::move(angles), std::move(w));
  }
  if (type == "haar") return AngleLaw::haar_so3();
  if (type == "tabulated") {
    return AngleLaw::tabulated(spec.at("theta").get<std::vector<double>>(),
                               spec.at("density").get<std::vector<double>>());
  }
  throw std::invalid_argument("angle law: unknown type \"" + type + "\"");
}

// ---------------------------------------------------------------------------
// RotationLaw

struct RotationLaw::Impl {
  LawKind kind = LawKind::dirac;
  int dim = 0;
  std::optional<AngleLaw> angle;
  std::optional<Eigen::Vector3d> axis;
  std::vector<Rotation> support;
  std::vector<double> weights;
  std::vector<double> cumulative;
  std::optional<Moments> exact;
};

const RotationLaw::Impl& law_impl(const RotationLaw& law) {
  if (!law.impl_) throw std::logic_error("RotationLaw: default-constructed law");
  return *law.impl_;
}

namespace {

// Moments of a one-parameter family theta -> R(theta) whose entries (and
// those of R (x) R) are trigonometric polynomials of degree <= 2. Five
// equispaced nodes recover the Fourier coefficients exactly.
template <class Family>
Moments trig_family_moments(int dim, Family family, const AngleLaw& angle) {
  const std::complex<double> phi1 = angle.characteristic(1);
  const std::complex<double> phi2 = angle.characteristic(2);
  Matrix mean = Matrix::Zero(dim, dim);
  Matrix second = Matrix::Zero(dim * dim, dim * dim);
  for (int j = 0; j < 5; ++j) {
    const double t = 2.0 * kPi * j / 5.0;
    const Matrix r = family(t);
    const Matrix k = kron_superop(r, r).entries();
    const double w = (1.0 + 2.0 * (std::cos(t) * phi1.real() + std::sin(t) * phi1.imag() +
                                   std::cos(2 * t) * phi2.real() + std::sin(2 * t) * phi2.imag())) /
                     5.0;
    mean += w * r;
    second += w * k;
  }
  return {mean, SuperOp(dim, second)};
}

Moments haar_moments(int d) {
  if (d == 2) {
    Matrix j(2, 2);
    j << 0, -1, 1, 0;
    const Vector vi = flatten(Matrix::Identity(2, 2));
    const Vector vj = flatten(j);
    return {Matrix::Zero(2, 2), SuperOp(2, (vi * vi.transpose() + vj * vj.transpose()) / 2.0)};
  }
  return {Matrix::Zero(d, d), pi(d)};
}

// Conjugation-invariant law on SO(3): E r = c1 I; E[r (x) r] acts as 1 on H_1,
// c2 on H_s^0 (l = 2) and c1 on H_a (l = 1), with c_l = E chi_l / (2l + 1).
Moments conjugation_invariant_moments(const AngleLaw& angle) {
  const double ec1 = angle.characteristic(1).real();
  const double ec2 = angle.characteristic(2).real();
  const double c1 = (1.0 + 2.0 * ec1) / 3.0;
  const double c2 = (1.0 + 2.0 * ec1 + 2.0 * ec2) / 5.0;
  const SuperOp p = pi(3), g = gamma(3), id = SuperOp::identity(3);
  return {c1 * Matrix::Identity(3, 3), p + (g - p) * c2 + (id - g) * c1};
}

void validate_moments(const Moments& m) {
  if (op_norm(m.mean) > 1.0 + 1e-12 || op_norm(m.second) > 1.0 + 1e-12) {
    throw std::invalid_argument("RotationLaw: exact moments violate the norm bound 1");
  }
}

RotationLaw::Impl base(LawKind kind, int dim) {
  RotationLaw::Impl impl;
  impl.kind = kind;
  impl.dim = dim;
  return impl;
}

}  // namespace

RotationLaw RotationLaw::haar(int dim) {
  if (dim < 2) throw std::invalid_argument("haar: d must be >= 2");
  auto impl = base(LawKind::haar, dim);
  impl.exact = haar_moments(dim);
  return RotationLaw(std::make_shared<const Impl>(std::move(impl)));
}

RotationLaw RotationLaw::so2_window(double a, double b) {
  auto impl = base(LawKind::so2_window, 2);
  impl.angle = AngleLaw::uniform(a, b);
  impl.exact = trig_family_moments(2, planar_matrix, *impl.angle);
  validate_moments(*impl.exact);
  return RotationLaw(std::make_shared<const Impl>(std::move(impl)));
}

RotationLaw RotationLaw::so2_atoms(std::vector<double> angles, std::vector<double> weights) {
  auto impl = base(LawKind::so2_atoms, 2);
  impl.angle = AngleLaw::atoms(std::move(angles), std::move(weights));
  impl.exact = trig_family_moments(2, planar_matrix, *impl.angle);
  validate_moments(*impl.exact);
  return RotationLaw(std::make_shared<const Impl>(std::move(impl)));
}

RotationLaw RotationLaw::so3_axis_angle(std::optional<Eigen::Vector3d> axis, AngleLaw angle) {
  if (!axis) return so3_conjugation_invariant(std::move(angle));
  const double n = axis->norm();
  if (!(n > 0.0)) throw std::invalid_argument("so3-axis-angle: zero axis");
  auto impl = base(LawKind::so3_axis_angle, 3);
  impl.axis = *axis / n;
  impl.angle = std::move(angle);
  const Eigen::Vector3d k = *impl.axis;
  impl.exact = trig_family_moments(3, [&k](double t) { return rodrigues(k, t); }, *impl.angle);
  validate_moments(*impl.exact);
  return RotationLaw(std::make_shared<const Impl>(std::move(impl)));
}

RotationLaw RotationLaw::so3_conjugation_invariant(AngleLaw angle) {
  auto impl = base(LawKind::so3_conjugation_invariant, 3);
  impl.angle = std::move(angle);
  impl.exact = conjugation_invariant_moments(*impl.angle);
  validate_moments(*impl.exact);
  return RotationLaw(std::make_shared<const Impl>(std::move(impl)));
}

RotationLaw RotationLaw::finite_support(std::vector<Rotation> rotations, std::vector<double> weights) {
  if (rotations.empty()) throw std::invalid_argument("finite-support: empty support");
  check_weights(weights, rotations.size(), "finite-support");
  const int d = rotations.front().dim();
  auto impl = base(LawKind::finite_support, d);
  Matrix mean = Matrix::Zero(d, d);
  Matrix second = Matrix::Zero(d * d, d * d);
  for (std::size_t i = 0; i < rotations.size(); ++i) {
    if (rotations[i].dim() != d) throw std::invalid_argument("finite-support: mixed dimensions");
    mean += weights[i] * rotations[i].matrix();
    second += weights[i] * kron_superop(rotations[i].matrix(), rotations[i].matrix()).entries();
  }
  impl.exact = Moments{mean, SuperOp(d, second)};
  impl.support = std::move(rotations);
  impl.weights = std::move(weights);
  impl.cumulative = cumulative_of(impl.weights);
  return RotationLaw(std::make_shared<const Impl>(std::move(impl)));
}

RotationLaw RotationLaw::dirac(Rotation g) {
  auto impl = base(LawKind::dirac, g.dim());
  impl.exact = Moments{g.matrix(), kron_superop(g.matrix(), g.matrix())};
  impl.support = {std::move(g)};
  impl.weights = {1.0};
  impl.cumulative = {1.0};
  return RotationLaw(std::make_shared<const Impl>(std::move(impl)));
}

int RotationLaw::dim() const { return law_impl(*this).dim; }
LawKind RotationLaw::kind() const { return law_impl(*this).kind; }

const AngleLaw* RotationLaw::angle_law() const {
  const auto& a = law_impl(*this).angle;
  return a ? &*a : nullptr;
}

const std::optional<Eigen::Vector3d>& RotationLaw::fixed_axis() const { return law_impl(*this).axis; }
const std::vector<Rotation>& RotationLaw::support() const { return law_impl(*this).support; }
const std::vector<double>& RotationLaw::weights() const { return law_impl(*this).weights; }
const std::optional<Moments>& RotationLaw::exact_moments() const { return law_impl(*this).exact; }

bool RotationLaw::conjugation_invariant() const {
  const auto& impl = law_impl(*this);
  switch (impl.kind) {
    case LawKind::haar:
    case LawKind::so3_conjugation_invariant: return true;
    case LawKind::so2_window:
    case LawKind::so2_atoms: return true;  // SO(2) is abelian
    case LawKind::dirac:
      return impl.dim == 2 || (impl.support[0].matrix() - Matrix::Identity(impl.dim, impl.dim)).norm() == 0.0;
    default: return impl.dim == 2;
  }
}

std::string to_string(LawKind k) {
  switch (k) {
    case LawKind::haar: return "haar";
    case LawKind::so2_window: return "so2-window";
    case LawKind::so2_atoms: return "so2-atoms";
    case LawKind::so3_axis_angle: return "so3-axis-angle";
    case LawKind::so3_conjugation_invariant: return "so3-conjugation-invariant";
    case LawKind::finite_support: return "finite-support";
    case LawKind::dirac: return "dirac";
  }
  return "?";
}

json RotationLaw::to_json() const {
  const auto& impl = law_impl(*this);
  json j{{"kind", to_string(impl.kind)}};
  switch (impl.kind) {
    case LawKind::haar: j["d"] = impl.dim; break;
    case LawKind::so2_window:
      j["a"] = impl.angle->support_lo();
      j["b"] = impl.angle->support_hi();
      break;
    case LawKind::so2_atoms:
      j["angles"] = impl.angle->angles();
      j["weights"] = impl.angle->weights();
      break;
    case LawKind::so3_axis_angle:
      j["axis"] = std::vector<double>{impl.axis->x(), impl.axis->y(), impl.axis->z()};
      j["angle"] = impl.angle->to_json();
      break;
    case LawKind::so3_conjugation_invariant: j["angle"] = impl.angle->to_json(); break;
    case LawKind::finite_support: {
      json rs = json::array();
      for (const auto& g : impl.support) rs.push_back(rotation_to_json(g));
      j["rotations"] = rs;
      j["weights"] = impl.weights;
      break;
    }
    case LawKind::dirac: j["rotation"] = rotation_to_json(impl.support[0]); break;
  }
  return j;
}

RotationLaw make_law(const json& spec) {
  if (!spec.is_object() || !spec.contains("kind")) {
    throw std::invalid_argument("law spec: object with \"kind\" required");
  }
  const std::string kind = spec.at("kind").get<std::string>();
  try {
    if (kind == "haar") return RotationLaw::haar(spec.at("d").get<int>());
    if (kind == "so2-window") {
      return RotationLaw::so2_window(spec.at("a").get<double>(), spec.at("b").get<double>());
    }
    if (kind == "so2-atoms") {
      auto angles = spec.at("angles").get<std::vector<double>>();
      std::vector<double> w = spec.contains("weights")
                                  ? spec.at("weights").get<std::vector<double>>()
                                  : std::vector<double>(angles.size(), 1.0 / angles.size());
      return RotationLaw::so2_atoms(std::move(angles), std::move(w));
    }
    if (kind == "so3-axis-angle") {
      std::optional<Eigen::Vector3d> axis;
      const json& ax = spec.at("axis");
      if (!(ax.is_string() && ax.get<std::string>() == "uniform")) {
        const auto v = ax.get<std::vector<double>>();
        if (v.size() != 3) throw std::invalid_argument("so3-axis-angle: axis must have 3 entries");
        axis = Eigen::Vector3d(v[0], v[1], v[2]);
      }
      return RotationLaw::so3_axis_angle(axis, make_angle_law(spec.at("angle")));
    }
    if (kind == "so3-conjugation-invariant") {
      return RotationLaw::so3_conjugation_invariant(make_angle_law(spec.at("angle")));
    }
    if (kind == "finite-support") {
      std::vector<Rotation> rs;
      for (const auto& r : spec.at("rotations")) rs.push_back(rotation_from_json(r));
      std::vector<double> w = spec.contains("weights")
                                  ? spec.at("weights").get<std::vector<double>>()
                                  : std::vector<double>(rs.size(), 1.0 / rs.size());
      return RotationLaw::finite_support(std::move(rs), std::move(w));
    }
    if (kind == "cube-group") {
      auto rs = cube_group();
      std::vector<double> w(rs.size(), 1.0 / rs.size());
      return RotationLaw::finite_support(std::move(rs), std::move(w));
    }
    if (kind == "dirac") {
      if (spec.contains("rotation")) return RotationLaw::dirac(rotation_from_json(spec.at("rotation")));
      if (spec.contains("angle")) return RotationLaw::dirac(Rotation::planar(spec.at("angle").get<double>()));
      return RotationLaw::dirac(Rotation::identity(spec.at("d").get<int>()));
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument("law spec \"" + kind + "\": " + e.what());
  }
  throw std::invalid_argument("law spec: unknown kind \"" + kind + "\"");
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

template <int D>
void haar_into(int d, RngStream& rng, Eigen::Matrix<double, D, D>& out) {
  out.resize(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) out(i, j) = rng.normal();
  // Modified Gram-Schmidt: Q of the QR factorization with diag(R) > 0.
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < j; ++i) out.col(j) -= out.col(i).dot(out.col(j)) * out.col(i);
    out.col(j).normalize();
  }
  if (out.determinant() < 0.0) out.col(0) *= -1.0;
}

template <int D>
void planar_into(double t, Eigen::Matrix<double, D, D>& out) {
  out.resize(2, 2);
  const double c = std::cos(t), s = std::sin(t);
  out(0, 0) = c;
  out(0, 1) = -s;
  out(1, 0) = s;
  out(1, 1) = c;
}

template <int D>
void rodrigues_into(const Eigen::Vector3d& k, double t, Eigen::Matrix<double, D, D>& out) {
  out.resize(3, 3);
  const double c = std::cos(t), s = std::sin(t), omc = 1.0 - c;
  const double x = k.x(), y = k.y(), z = k.z();
  out(0, 0) = c + omc * x * x;
  out(0, 1) = omc * x * y - s * z;
  out(0, 2) = omc * x * z + s * y;
  out(1, 0) = omc * y * x + s * z;
  out(1, 1) = c + omc * y * y;
  out(1, 2) = omc * y * z - s * x;
  out(2, 0) = omc * z * x - s * y;
  out(2, 1) = omc * z * y + s * x;
  out(2, 2) = c + omc * z * z;
}

Eigen::Vector3d uniform_axis(RngStream& rng) {
  for (;;) {
    Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
    const double n = v.norm();
    if (n > 1e-300) return v / n;
  }
}

}  // namespace

template <int D>
void sample_into(const RotationLaw& law, RngStream& rng, Eigen::Matrix<double, D, D>& out) {
  const auto& impl = law_impl(law);
  if (D != Eigen::Dynamic && D != impl.dim) throw std::invalid_argument("sample_into: dimension mismatch");
  switch (impl.kind) {
    case LawKind::haar: haar_into<D>(impl.dim, rng, out); return;
    case LawKind::so2_window:
    case LawKind::so2_atoms: planar_into<D>(impl.angle->sample(rng), out); return;
    case LawKind::so3_axis_angle: {
      const double t = impl.angle->sample(rng);
      rodrigues_into<D>(*impl.axis, t, out);
      return;
    }
    case LawKind::so3_conjugation_invariant: {
      const Eigen::Vector3d k = uniform_axis(rng);
      rodrigues_into<D>(k, impl.angle->sample(rng), out);
      return;
    }
    case LawKind::finite_support:
    case LawKind::dirac: {
      const std::size_t i = impl.support.size() == 1 ? 0 : pick(impl.cumulative, rng.uniform());
      out = impl.support[i].matrix();
      return;
    }
  }
}

template void sample_into<2>(const RotationLaw&, RngStream&, Eigen::Matrix<double, 2, 2>&);
template void sample_into<3>(const RotationLaw&, RngStream&, Eigen::Matrix<double, 3, 3>&);
template void sample_into<Eigen::Dynamic>(const RotationLaw&, RngStream&, Matrix&);

Rotation sample(const RotationLaw& law, RngStream& rng) {
  Matrix m;
  sample_into<Eigen::Dynamic>(law, rng, m);
  if (orthogonality_defect(m) > kRotationTol) return reorthonormalize(m);
  return Rotation::from_matrix(m);
}

Moments moments_exact(const RotationLaw& law) {
  const auto& e = law.exact_moments();
  if (!e) throw std::domain_error("moments: no closed form for law " + to_string(law.kind()));
  return *e;
}

MomentEstimate moments_mc(const RotationLaw& law, std::size_t samples, RngStream& rng) {
  if (samples < 2) throw std::invalid_argument("moments_mc: need at least 2 samples");
  const int d = law.dim();
  Matrix s1 = Matrix::Zero(d, d), q1 = Matrix::Zero(d, d);
  Matrix s2 = Matrix::Zero(d * d, d * d), q2 = Matrix::Zero(d * d, d * d);
  Matrix g;
  for (std::size_t n = 0; n < samples; ++n) {
    sample_into<Eigen::Dynamic>(law, rng, g);
    const Matrix k = kron_superop(g, g).entries();
    s1 += g;
    q1 += g.cwiseAbs2();
    s2 += k;
    q2 += k.cwiseAbs2();
  }
  const double n = static_cast<double>(samples);
  MomentEstimate est;
  est.samples = samples;
  est.value.mean = s1 / n;
  est.value.second = SuperOp(d, s2 / n);
  auto se = [n](const Matrix& sum, const Matrix& sq) {
    Matrix var = (sq / n - (sum / n).cwiseAbs2()) * (n / (n - 1.0));
    return Matrix(var.cwiseMax(0.0).cwiseSqrt() / std::sqrt(n));
  };
  est.mean_se = se(s1, q1);
  est.second_se = se(s2, q2);
  return est;
}

// ---------------------------------------------------------------------------
// JSON helpers

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix: non-empty array required");
  if (j.front().is_array()) {
    const std::size_t rows = j.size(), cols = j.front().size();
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
      if (j[i].size() != cols) throw std::invalid_argument("matrix: ragged rows");
      for (std::size_t k = 0; k < cols; ++k) m(i, k) = j[i][k].get<double>();
    }
    return m;
  }
  const auto flat = j.get<std::vector<double>>();
  const auto d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(flat.size()))));
  if (static_cast<std::size_t>(d) * d != flat.size()) {
    throw std::invalid_argument("matrix: flat array length is not a square");
  }
  Matrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) m(i, k) = flat[i * d + k];
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(r);
  }
  return rows;
}

json rotation_to_json(const Rotation& g) { return g.row_major(); }

Rotation rotation_from_json(const json& j) { return Rotation::from_matrix(matrix_from_json(j)); }

std::vector<Rotation> cube_group() {
  std::vector<Rotation> out;
  std::array<int, 3> perm{0, 1, 2};
  do {
    for (int signs = 0; signs < 8; ++signs) {
      Matrix m = Matrix::Zero(3, 3);
      for (int i = 0; i < 3; ++i) m(i, perm[i]) = (signs >> i & 1) ? -1.0 : 1.0;
      if (m.determinant() > 0) out.push_back(Rotation::from_matrix(m));
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return out;
}

}  // namespace semiflex
