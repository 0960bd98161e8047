#ifndef DLN_THERMO_HPP
#define DLN_THERMO_HPP

#include <limits>

#include "dln/flows.hpp"
#include "dln/matops.hpp"

namespace dln {

/// Inverse temperature; infinity switches the entropy term off.
struct ThermoState {
  double beta = std::numeric_limits<double>::infinity();
  // Entropies are reported without the additive (N-1) log c_d, c_d the
  // Haar volume of O(d). Kept as a flag so reports can say so.
  bool entropyOffsetOmitted = true;

  bool infinite() const { return beta == std::numeric_limits<double>::infinity(); }
  void validate() const;
};

/// Log-volume of the group orbit over W, up to the constant (N-1) log c_d:
///   S = 1/2 sum_{i<j} log[(s_i^2 - s_j^2) / (s_i^{2/N} - s_j^{2/N})].
/// Throws DomainError for nonpositive singular values.
double entropy(const Vector& sigma, int depth);

/// Same sum without the positivity check; zero singular values are allowed
/// as long as no pair is (0, 0) with N > 1. Used for trajectory diagnostics.
double entropy_unchecked(const Vector& sigma, int depth);

/// Infinite-depth limit: sum_{k<l} log[(s_k^2 - s_l^2) / (2 log(s_k/s_l))].
/// Related to the finite-depth value by
///   2 S_N(sigma) - (d(d-1)/2) log N  ->  S_inf(sigma)  as N -> infinity.
double entropy_infty(const Vector& sigma);

/// Sigma'_kk = sum_{l != k} [N l_k^{2N-1}/(l_k^{2N} - l_l^{2N}) - l_k/(l_k^2 - l_l^2)] l_k^{N-1}
/// with l = sigma^{1/N}. Equals A_{N,W} applied to the Euclidean gradient of
/// S, written in the singular frames. Throws on coincident singular values.
Vector sigma_prime(const Vector& sigma, int depth);

/// Sigma''_kk = (N - 1) l_k^{N-2}.
Vector sigma_double_prime(const Vector& sigma, int depth);

/// F_beta = E(W) - S(sigma)/beta.
double free_energy(const Vector& sigma, int depth, const LossSpec& loss,
                   const Matrix& w, double beta);

/// grad_{g^N} F_beta = A_{N,W}(E'(W)) - (1/beta) Q_N Sigma' Q_0^T.
Matrix grad_free_energy(const Matrix& w, const LossSpec& loss, int depth,
                        double beta);

/// Q_N Sigma' Q_0^T: the g^N gradient of S.
Matrix entropy_gradient(const SvdTriple& svd, int depth);

}  // namespace dln

#endif  // DLN_THERMO_HPP
