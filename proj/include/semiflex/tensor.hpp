#pragma once

// Superoperators on L(R^d).
//
// A d x d matrix m is identified with the vector of length d^2 whose entry at
// flat index i*d + j is m(i, j) (row-major flattening). A superoperator is a
// d^2 x d^2 matrix A acting by [A m]_{ij} = sum_{kl} A_{(ij),(kl)} m_{kl}.

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace semiflex {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Element of L(R^d): a d x d real matrix with the Hilbert-Schmidt pairing.
using LinOp = Eigen::MatrixXd;

/// Linear operator on L(R^d), stored dense in the (ij),(kl) flattening.
class SuperOp {
 public:
  SuperOp() = default;
  /// Takes ownership of a d^2 x d^2 matrix; throws if the shape is wrong.
  SuperOp(int dim, Matrix entries);

  static SuperOp zero(int dim);
  static SuperOp identity(int dim);

  int dim() const noexcept { return dim_; }
  const Matrix& entries() const noexcept { return entries_; }

  double operator()(int i, int j, int k, int l) const {
    return entries_(i * dim_ + j, k * dim_ + l);
  }

  LinOp apply(const LinOp& m) const;

  SuperOp operator*(const SuperOp& rhs) const;
  SuperOp operator+(const SuperOp& rhs) const;
  SuperOp operator-(const SuperOp& rhs) const;
  SuperOp operator*(double s) const;

 private:
  int dim_ = 0;
  Matrix entries_;
};

Vector flatten(const LinOp& m);
LinOp unflatten(const Vector& v, int dim);

/// <v, w>_hs = sum_ij v_ij w_ij.
double hs_inner(const LinOp& v, const LinOp& w);

/// g (x) h acting by m -> g m h^T.
SuperOp kron_superop(const LinOp& g, const LinOp& h);

SuperOp superop_compose(const SuperOp& a, const SuperOp& b);

/// Orthogonal projection onto symmetric matrices, v -> (v + v^T) / 2.
SuperOp gamma(int dim);

/// Orthogonal projection onto multiples of the identity, v -> Tr(v) I / d.
SuperOp pi(int dim);

/// Largest singular value. Full SVD below 64^2 rows, power iteration on A^T A above.
double op_norm(const Matrix& a);
double op_norm(const SuperOp& a);

double hs_norm(const Matrix& a);
double hs_norm(const SuperOp& a);

enum class Block { identity_line, sym_traceless, antisym };

std::string to_string(Block b);

/// Orthonormal (Hilbert-Schmidt) bases of H_1, H_s^0 and H_a, stored as
/// columns of flattened matrices.
struct SubspaceBasis {
  int dim = 0;
  Matrix h1;   // d^2 x 1
  Matrix hs0;  // d^2 x (d(d+1)/2 - 1)
  Matrix ha;   // d^2 x d(d-1)/2

  const Matrix& of(Block b) const;
  /// All d^2 basis vectors side by side: [h1 | hs0 | ha].
  Matrix all() const;
};

SubspaceBasis subspace_basis(int dim);

/// Operator norm of (I - P_B) A P_B, the part of A leaking out of the block.
double leakage(const SuperOp& a, Block b);

/// Matrix of A in the orthonormal basis of the block. Throws if the leakage
/// exceeds `tol` unless `force` is set, in which case the compression is returned.
Matrix restrict(const SuperOp& a, Block b, bool force = false, double tol = 1e-9);

/// (s (x) s)(m) = sum_{ijkl} v_i v_j m_{ij,kl} w_k w_l for s(g) = <v, g w>.
double linear_form_square(const SuperOp& m, const Vector& v, const Vector& w);

struct SpectralRadius {
  double radius = 0.0;            // max |eigenvalue|
  double certified_upper = 0.0;   // inf over probed m of ||A^m||_op^{1/m}
  std::vector<int> powers;        // probed m (doubling)
  std::vector<double> root_norms; // ||A^m||_op^{1/m} for each probed m
};

/// Spectral radius from the real Schur form together with the certified
/// bound inf_m ||A^m||^{1/m} over m = 1, 2, 4, ..., max_power.
SpectralRadius spectral_radius(const Matrix& a, int max_power = 64);

}  // namespace semiflex
