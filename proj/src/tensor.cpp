#include "semiflex/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace semiflex {

namespace {

void require_same_dim(int a, int b, const char* what) {
  if (a != b) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << a << " vs " << b << ")";
    throw std::invalid_argument(os.str());
  }
}

int square_dim(const LinOp& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw std::invalid_argument(std::string(what) + ": expected a square matrix");
  }
  return static_cast<int>(m.rows());
}

constexpr Eigen::Index kSvdLimit = 64 * 64;

double power_iteration_norm(const Matrix& a) {
  Vector x = Vector::Ones(a.cols()).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 10000; ++it) {
    Vector y = a.transpose() * (a * x);
    const double n = y.norm();
    if (n == 0.0) return 0.0;
    y /= n;
    const double prev = lambda;
    lambda = n;
    x = y;
    if (std::abs(lambda - prev) <= 1e-12 * lambda) break;
  }
  return std::sqrt(lambda);
}

}  // namespace

SuperOp::SuperOp(int dim, Matrix entries) : dim_(dim), entries_(std::move(entries)) {
  if (dim < 1 || entries_.rows() != dim * dim || entries_.cols() != dim * dim) {
    throw std::invalid_argument("SuperOp: entries must be d^2 x d^2");
  }
}

SuperOp SuperOp::zero(int dim) { return {dim, Matrix::Zero(dim * dim, dim * dim)}; }

SuperOp SuperOp::identity(int dim) { return {dim, Matrix::Identity(dim * dim, dim * dim)}; }

LinOp SuperOp::apply(const LinOp& m) const {
  require_same_dim(dim_, square_dim(m, "SuperOp::apply"), "SuperOp::apply");
  return unflatten(entries_ * flatten(m), dim_);
}

SuperOp SuperOp::operator*(const SuperOp& rhs) const { return superop_compose(*this, rhs); }

SuperOp SuperOp::operator+(const SuperOp& rhs) const {
  require_same_dim(dim_, rhs.dim_, "SuperOp::operator+");
  return {dim_, entries_ + rhs.entries_};
}

SuperOp SuperOp::operator-(const SuperOp& rhs) const {
  require_same_dim(dim_, rhs.dim_, "SuperOp::operator-");
  return {dim_, entries_ - rhs.entries_};
}

SuperOp SuperOp::operator*(double s) const { return {dim_, entries_ * s}; }

Vector flatten(const LinOp& m) {
  const int d = square_dim(m, "flatten");
  Vector v(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) v(i * d + j) = m(i, j);
  return v;
}

LinOp unflatten(const Vector& v, int dim) {
  if (v.size() != dim * dim) throw std::invalid_argument("unflatten: length is not d^2");
  LinOp m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) = v(i * dim + j);
  return m;
}

double hs_inner(const LinOp& v, const LinOp& w) {
  if (v.rows() != w.rows() || v.cols() != w.cols()) {
    throw std::invalid_argument("hs_inner: shape mismatch");
  }
  return v.cwiseProduct(w).sum();
}

SuperOp kron_superop(const LinOp& g, const LinOp& h) {
  const int d = square_dim(g, "kron_superop");
  require_same_dim(d, square_dim(h, "kron_superop"), "kron_superop");
  Matrix a(d * d, d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) a(i * d + j, k * d + l) = g(i, k) * h(j, l);
  return {d, std::move(a)};
}

SuperOp superop_compose(const SuperOp& a, const SuperOp& b) {
  require_same_dim(a.dim(), b.dim(), "superop_compose");
  return {a.dim(), a.entries() * b.entries()};
}

SuperOp gamma(int dim) {
  if (dim < 2) throw std::invalid_argument("gamma: d must be >= 2");
  Matrix a = Matrix::Zero(dim * dim, dim * dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      a(i * dim + j, i * dim + j) += 0.5;
      a(i * dim + j, j * dim + i) += 0.5;
    }
  return {dim, std::move(a)};
}

SuperOp pi(int dim) {
  if (dim < 2) throw std::invalid_argument("pi: d must be >= 2");
  Matrix a = Matrix::Zero(dim * dim, dim * dim);
  for (int i = 0; i < dim; ++i)
    for (int k = 0; k < dim; ++k) a(i * dim + i, k * dim + k) = 1.0 / dim;
  return {dim, std::move(a)};
}

double op_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if (!a.allFinite()) throw std::invalid_argument("op_norm: non-finite entries");
  if (std::max(a.rows(), a.cols()) < kSvdLimit) {
    Eigen::JacobiSVD<Matrix> svd(a);
    return svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
  }
  return power_iteration_norm(a);
}

double op_norm(const SuperOp& a) { return op_norm(a.entries()); }

double hs_norm(const Matrix& a) { return a.norm(); }

double hs_norm(const SuperOp& a) { return a.entries().norm(); }

std::string to_string(Block b) {
  switch (b) {
    case Block::identity_line: return "H1";
    case Block::sym_traceless: return "Hs0";
    case Block::antisym: return "Ha";
  }
  return "?";
}

const Matrix& SubspaceBasis::of(Block b) const {
  switch (b) {
    case Block::identity_line: return h1;
    case Block::sym_traceless: return hs0;
    case Block::antisym: return ha;
  }
  throw std::invalid_argument("SubspaceBasis::of: unknown block");
}

Matrix SubspaceBasis::all() const {
  Matrix out(dim * dim, dim * dim);
  out << h1, hs0, ha;
  return out;
}

SubspaceBasis subspace_basis(int dim) {
  if (dim < 2) throw std::invalid_argument("subspace_basis: d must be >= 2");
  const int d = dim;
  SubspaceBasis b;
  b.dim = d;
  b.h1 = flatten(LinOp::Identity(d, d) / std::sqrt(static_cast<double>(d)));

  const int n_offdiag = d * (d - 1) / 2;
  b.hs0.resize(d * d, n_offdiag + d - 1);
  b.ha.resize(d * d, n_offdiag);

  const double s = 1.0 / std::sqrt(2.0);
  int col = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j, ++col) {
      LinOp sym = LinOp::Zero(d, d);
      LinOp anti = LinOp::Zero(d, d);
      sym(i, j) = sym(j, i) = s;
      anti(i, j) = s;
      anti(j, i) = -s;
      b.hs0.col(col) = flatten(sym);
      b.ha.col(col) = flatten(anti);
    }

  // Traceless diagonals: Gram-Schmidt on e_1 e_1^T - e_{k} e_{k}^T, k = 2..d,
  // against the identity direction and each other.
  std::vector<Vector> done{b.h1.col(0)};
  for (int k = 1; k < d; ++k) {
    LinOp m = LinOp::Zero(d, d);
    m(0, 0) = 1.0;
    m(k, k) = -1.0;
    Vector v = flatten(m);
    for (const auto& u : done) v -= u.dot(v) * u;
    v.normalize();
    done.push_back(v);
    b.hs0.col(col++) = v;
  }
  return b;
}

double leakage(const SuperOp& a, Block blk) {
  const SubspaceBasis basis = subspace_basis(a.dim());
  const Matrix& p = basis.of(blk);
  const Matrix image = a.entries() * p;
  const Matrix outside = image - p * (p.transpose() * image);
  return op_norm(outside);
}

Matrix restrict(const SuperOp& a, Block blk, bool force, double tol) {
  const SubspaceBasis basis = subspace_basis(a.dim());
  const Matrix& p = basis.of(blk);
  if (!force) {
    const double leak = leakage(a, blk);
    if (leak > tol) {
      std::ostringstream os;
      os << "restrict: block " << to_string(blk) << " is not invariant (leakage " << leak << ")";
      throw std::domain_error(os.str());
    }
  }
  return p.transpose() * a.entries() * p;
}

SpectralRadius spectral_radius(const Matrix& a, int max_power) {
  if (a.rows() != a.cols()) throw std::invalid_argument("spectral_radius: square matrix required");
  if (!a.allFinite()) throw std::invalid_argument("spectral_radius: non-finite entries");
  SpectralRadius out;
  if (a.size() == 0) return out;

  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw std::runtime_error("spectral_radius: Schur form failed");
  out.radius = es.eigenvalues().cwiseAbs().maxCoeff();

  out.certified_upper = std::numeric_limits<double>::infinity();
  Matrix power = a;
  for (int m = 1; m <= std::max(1, max_power); m *= 2) {
    const double rn = std::pow(op_norm(power), 1.0 / m);
    out.powers.push_back(m);
    out.root_norms.push_back(rn);
    out.certified_upper = std::min(out.certified_upper, rn);
    power = power * power;
  }
  return out;
}

double linear_form_square(const SuperOp& m, const Vector& v, const Vector& w) {
  const int d = m.dim();
  if (v.size() != d || w.size() != d) throw std::invalid_argument("linear_form_square: dimension mismatch");
  const Matrix vv = v * v.transpose(), ww = w * w.transpose();
  return flatten(vv).dot(m.entries() * flatten(ww));
}

}  // namespace semiflex
