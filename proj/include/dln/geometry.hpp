#ifndef DLN_GEOMETRY_HPP
#define DLN_GEOMETRY_HPP

#include <string>
#include <vector>

#include "dln/flows.hpp"
#include "dln/matops.hpp"
#include "dln/network.hpp"

namespace dln {

/// A tangent vector to the weight space, one d x d matrix per layer, stored
/// in the same order as NetworkState::weights (V_N first).
struct TangentVectorUp {
  std::vector<Matrix> layers;

  TangentVectorUp() = default;
  TangentVectorUp(int depth, Index d);

  int depth() const { return static_cast<int>(layers.size()); }
  Matrix& layer(int p) { return layers[static_cast<std::size_t>(depth() - p)]; }
  const Matrix& layer(int p) const {
    return layers[static_cast<std::size_t>(depth() - p)];
  }
};

/// Sum of layerwise Frobenius inner products.
double up_inner(const TangentVectorUp& a, const TangentVectorUp& b);
TangentVectorUp to_tangent(const NetworkState& velocities);

/// A parameter direction (theta, A_N, ..., A_0) for the balanced
/// parametrization. a[i] pairs with coords.frames[i].
struct ParameterDirection {
  Vector theta;
  std::vector<Matrix> a;
};

/// Layer p = A_p W_p + Q_p diag(theta) Q_{p-1}^T - W_p A_{p-1}.
/// Throws DomainError when some A_p is not antisymmetric.
TangentVectorUp differential_dz(const BalancedCoords& coords, const Vector& theta,
                                const std::vector<Matrix>& a);
TangentVectorUp differential_dz(const BalancedCoords& coords,
                                const ParameterDirection& dir);

/// The standard parameter basis: theta = e_k for k = 1..d, then for every
/// pair k < l and every p = 0..N the single rotation A_p = Q_p a_kl Q_p^T
/// with a_kl = (e_k e_l^T - e_l e_k^T)/sqrt(2). Pair directions are ordered
/// (k, l) lexicographically, then by p.
std::vector<ParameterDirection> standard_parameter_basis(const BalancedCoords& coords);

struct PairBlock {
  Index k = 0;
  Index l = 0;
  Matrix block;  // (N+1) x (N+1), rows/cols indexed by p = 0..N
};

struct PullbackBlocks {
  Matrix diagonalBlock;  // N I_d
  std::vector<PairBlock> tridiagBlocks;
  bool degenerate = false;  // some lambda_k == lambda_l

  /// The full Gram matrix in the order of standard_parameter_basis.
  Matrix assemble() const;
};

/// Analytic metric in the standard parameter basis: N I_d on theta and, for
/// each pair, the tridiagonal block with diagonal (s/2, s, ..., s, s/2) and
/// off-diagonal -m, where s = l_k^2 + l_l^2 and m = l_k l_l.
PullbackBlocks pullback_metric(const BalancedCoords& coords);

struct BasisEntry {
  Index k = 0;
  Index l = 0;
  int p = 0;
  TangentVectorUp v;
};

struct BasisAtlas {
  std::vector<TangentVectorUp> lVectors;  // l^1, ..., l^d
  std::vector<BasisEntry> uVectors;       // u^{k,l,p}, k < l, p = 0..N

  /// l^k first, then u^{k,l,p} in storage order.
  std::vector<TangentVectorUp> all() const;
  /// Interior u^{k,l,p}, 1 <= p <= N-1: the tangent space of the group orbit.
  std::vector<TangentVectorUp> kernel() const;
  /// l^k, u^{k,l,0} and u^{k,l,N}: the horizontal space.
  std::vector<TangentVectorUp> horizontal() const;
};

/// Orthonormal basis of the tangent space of the balanced manifold.
/// Throws DomainError on repeated lambda.
BasisAtlas tangent_basis(const BalancedCoords& coords);

/// phi_*(V) = sum_p W_N ... W_{p+1} V_p W_{p-1} ... W_1.
Matrix phi_push(const NetworkState& state, const TangentVectorUp& v);

struct SubmersionReport {
  double kernelResidual = 0.0;     // max ||phi_*(u)||_F over kernel vectors
  double imageGramResidual = 0.0;  // max |Gram - I| of horizontal images in g^N
  double gradientResidual = 0.0;   // relative mismatch of gradient norms
  std::vector<std::string> failures;

  bool passed() const { return failures.empty(); }
};

SubmersionReport submersion_check(const BalancedCoords& coords, const LossSpec& loss,
                                  double tolerance = 1e-9);

/// g^N(Z1, Z2) = tr(Z1^T A_{N,W}^{-1} Z2).
double metric_gN(const Matrix& w, const Matrix& z1, const Matrix& z2, int depth);

/// A_{inf,W}: eigenvalues (s_k^2 - s_l^2)/(2 log(s_k/s_l)) off-diagonal and
/// s_k^2 on the diagonal, in the singular frames of W.
Matrix apply_A_infty(const SvdTriple& svd, const Matrix& z);
Matrix apply_A_infty(const Matrix& w, const Matrix& z);

/// g^inf(Z1, Z2) = tr(Z1^T A_{inf,W}^{-1} Z2).
double metric_gInfty(const Matrix& w, const Matrix& z1, const Matrix& z2);

/// det(Sigma^2)^{(N-1)/(2N)} |van(Sigma^{2/N})|.
double volume_density(const Vector& sigma, int depth);

}  // namespace dln

#endif  // DLN_GEOMETRY_HPP
