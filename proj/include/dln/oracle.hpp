#ifndef DLN_ORACLE_HPP
#define DLN_ORACLE_HPP

// Independent reference computations. These are deliberately naive (power
// sums, finite differences, numerically assembled Gram matrices) and are used
// only to check the closed-form implementations.

#include <cstdint>
#include <functional>

#include "dln/geometry.hpp"
#include "dln/matops.hpp"
#include "dln/network.hpp"

namespace dln::oracle {

/// sum_{p=1}^N (W W^T)^{(N-p)/N} Z (W^T W)^{(p-1)/N} with fractional powers
/// by eigendecomposition.
Matrix power_sum_A(const Matrix& w, const Matrix& z, int depth);

/// Central-difference gradient of a scalar function of a matrix.
Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& w,
                   double h = 1e-6);

/// Central-difference gradient of a scalar function of a weight stack.
NetworkState fd_gradient(const std::function<double(const NetworkState&)>& f,
                         const NetworkState& state, double h = 1e-6);

/// Gram matrix of differential_dz over standard_parameter_basis.
Matrix numeric_pullback_gram(const BalancedCoords& coords);

/// Gram matrix of an arbitrary family of tangent vectors.
Matrix gram(const std::vector<TangentVectorUp>& family);

/// log sqrt det of the Gram matrix of the group-orbit directions: for each
/// pair k < l and each interior p = 1..N-1 the image under differential_dz of
/// A_p = Q_p a_kl Q_p^T. The orbit volume is this density integrated over
/// O(d)^{N-1}.
double group_gram_log_volume(const BalancedCoords& coords);

/// Rotates every frame by exp of a small antisymmetric matrix: the curve used
/// for finite-difference checks of differential_dz.
BalancedCoords perturb_coords(const BalancedCoords& coords, const ParameterDirection& dir,
                              double eps);

/// sqrt det of g^N pulled back to (sigma, Q_N, Q_0) through a central
/// finite-difference Jacobian of (sigma, Omega, Xi) -> Q_N e^Omega diag(sigma)
/// e^{-Xi} Q_0^T, with random frames drawn from `seed`.
double jacobian_volume_density(const Vector& sigma, int depth, std::uint64_t seed);

/// Random balanced coordinates with lambda spread over [lo, hi] and a minimum
/// relative gap, descending, and Haar frames.
BalancedCoords random_coords(Index d, int depth, Rng& rng, double lo = 0.5,
                             double hi = 2.0, double minGap = 0.05);

/// Random full-rank matrix with singular values in [lo, hi].
Matrix random_full_rank(Index d, Rng& rng, double lo = 0.3, double hi = 2.0);

}  // namespace dln::oracle

#endif  // DLN_ORACLE_HPP
