#ifndef DLN_STOCHASTIC_HPP
#define DLN_STOCHASTIC_HPP

#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dln/flows.hpp"
#include "dln/matops.hpp"
#include "dln/network.hpp"

namespace dln {

struct SdeConfig {
  double beta = 1.0;  // may be +inf (no noise)
  double kappa = 1.0;
  double dt = 1e-3;
  double tEnd = 1.0;
  std::uint64_t seed = 0;
  int paths = 1;

  void validate() const;
  bool noiseless() const { return beta == std::numeric_limits<double>::infinity(); }
};

/// Raised when a Dyson step lands outside the Weyl chamber.
class CollisionError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Euler-Maruyama step of Brownian motion on (M_d, g^N) at inverse
/// temperature beta:
///   dX = sqrt(2/beta) Q_N (c_kl^{1/2} * dB_kl) Q_0^T + beta^{-1} Q_N Sigma'' Q_0^T dt
/// with c_kl the eigenvalues of A_{N,W}. noise holds standard normals.
Matrix bm_gN_step(const Matrix& w, double beta, int depth, double dt, const Matrix& noise);

/// Entrywise diffusion scales sqrt(c_kl) in the singular frames of W.
Matrix bm_gN_scales(const Vector& sigma, int depth);

/// One step of the downstairs RLE:
///   dW = -grad_{g^N} F_beta(W) dt + dX^{beta/kappa}.
/// kappa = 0 drops the Brownian part (noise and its Sigma'' drift).
Matrix rle_step_down(const Matrix& w, const LossSpec& loss, int depth, const SdeConfig& cfg,
                     const Matrix& noise);

struct UpStepOptions {
  bool reproject = true;
  // Admissible balance residual of the input, relative to max(1, |W|^2).
  double balanceTolerance = 1e-6;
};

/// One step of the upstairs RLE on the balanced manifold. The drift is the
/// Euclidean gradient flow of E(phi(w)); the raw stack noise is expanded in
/// the orthonormal tangent basis, group directions weighted by
/// sqrt(2 dt / beta) and the horizontal complement by sqrt(2 kappa dt / beta).
/// With reproject set, the stepped stack is mapped back to the closest
/// balanced stack by Gauss-Newton in the balanced coordinates.
NetworkState rle_step_up(const NetworkState& state, const LossSpec& loss, const SdeConfig& cfg,
                         const std::vector<Matrix>& noise, const UpStepOptions& options = {});

/// Closest point on the balanced manifold to `target`, starting from
/// `start`. Throws DomainError when the iteration collides two lambdas.
BalancedCoords reproject_balanced(const BalancedCoords& start, const NetworkState& target,
                                  int maxIterations = 30);

struct DysonState {
  Vector x;  // strictly increasing

  void validate() const;
};

/// sum_{j != i} 1/(x_i - x_j).
Vector dyson_drift(const Vector& x);

/// x_i += sum_{j != i} dt/(x_i - x_j) + sqrt(2/beta) sqrt(dt) noise_i.
/// Throws CollisionError when the result is not strictly increasing.
DysonState dyson_particle_step(const DysonState& x, double beta, double dt,
                               const Vector& noise);

struct DysonAdvance {
  DysonState state;
  int halvings = 0;  // deepest refinement used
};

/// Advances by dt with the increment sqrt(dt) * noise. A collision is
/// retried as two half steps whose Brownian increments are drawn from the
/// bridge conditioned on the full increment, down to 20 halvings.
DysonAdvance dyson_particle_advance(const DysonState& x, double beta, double dt,
                                    const Vector& noise, Rng& rng);

using HermitianMatrix = Eigen::MatrixXcd;

/// Increment of the standard Wiener process on (Her_d, tr(M^* M)) over unit
/// time: real diagonal N(0,1) and off-diagonal (a + ib)/sqrt(2).
HermitianMatrix hermitian_noise(Index d, Rng& rng);

/// Real eigenvalues of a Hermitian matrix, ascending.
Vector hermitian_eigenvalues(const HermitianMatrix& m);

/// dM = P_M dH + sqrt(2/beta) P_M^perp dH with dH = sqrt(dt) * noise, where
/// P_M projects onto the tangent space of the isospectral orbit (the
/// off-diagonal part in the eigenframe of M).
HermitianMatrix dyson_matrix_step(const HermitianMatrix& m, double beta, double dt,
                                  const HermitianMatrix& noise);

/// Gradient of E with respect to the eigenvalues (ascending order).
using EigenLossGradient = std::function<Vector(const Vector&)>;

/// dM = -grad L(M) dt + sqrt(2/beta) (P_M dH + sqrt(kappa) P_M^perp dH) with
/// L(M) = E(eig(M)).
HermitianMatrix dyson_matrix_step(const HermitianMatrix& m, double beta, double kappa,
                                  double dt, const HermitianMatrix& noise,
                                  const EigenLossGradient& lossGradient);

/// m += (I - m m^T / |m|^2) sqrt(dt) noise.
Vector sphere_step(const Vector& m, double dt, const Vector& noise);

/// Runs body(path, rng) for every path on a pool of worker threads. Each
/// path owns Rng(seed, path), so results do not depend on scheduling.
/// threads <= 0 uses the hardware concurrency.
void for_each_path(int paths, std::uint64_t seed, const std::function<void(int, Rng&)>& body,
                   int threads = 0);

struct KsResult {
  double statistic = 0.0;
  double pValue = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value
/// Q_KS((sqrt(n_e) + 0.12 + 0.11/sqrt(n_e)) D), n_e = n m / (n + m).
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace dln

#endif  // DLN_STOCHASTIC_HPP
