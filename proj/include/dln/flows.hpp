#ifndef DLN_FLOWS_HPP
#define DLN_FLOWS_HPP

#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "dln/matops.hpp"
#include "dln/network.hpp"

namespace dln {

enum class LossKind { kCompletion, kFrobeniusQuadratic };

/// One observed entry of a completion problem (0-based indices).
struct MaskEntry {
  Index row = 0;
  Index col = 0;
  double target = 0.0;
};

/// E(W) on end-to-end matrices.
///   completion:           E = 1/2 sum_{(i,j) in S} (W_ij - a_ij)^2
///   frobenius_quadratic:  E = 1/2 tr(W^T W)
/// An empty completion mask is the zero energy.
struct LossSpec {
  LossKind kind = LossKind::kFrobeniusQuadratic;
  std::vector<MaskEntry> mask;

  static LossSpec completion(std::vector<MaskEntry> entries);
  static LossSpec frobenius_quadratic();
  /// Observed diagonal W_11 = ... = W_dd = 1; for d = 2 this is the
  /// two-entry completion problem whose zero set contains [[1,a],[1/a,1]].
  static LossSpec unit_diagonal(Index d);
  static LossSpec zero();

  void validate(Index d) const;
};

double loss_value(const LossSpec& loss, const Matrix& w);
Matrix loss_gradient(const LossSpec& loss, const Matrix& w);

/// Velocity of every layer under the Euclidean gradient flow of E(W_N...W_1):
///   dW_p/dt = -(W_N...W_{p+1})^T E'(W) (W_{p-1}...W_1)^T.
/// Layers are stored in the same order as NetworkState::weights.
NetworkState full_flow_field(const NetworkState& state, const LossSpec& loss);

/// dW/dt = -sum_p (A_{p+1} A_{p+1}^T) E'(W) (B_{p-1}^T B_{p-1}) for an
/// arbitrary (not necessarily balanced) state.
Matrix end_to_end_field_general(const NetworkState& state, const LossSpec& loss);

/// Eigenvalue of A_{N,W} on u_k v_l^T:
///   (s_k^2 - s_l^2) / (s_k^{2/N} - s_l^{2/N}),  N s^{2-2/N} on coincidence.
/// Gaps below 1e-9 * max(s_k, s_l) use the limit at the geometric mean.
double a_eigenvalue(double sk, double sl, int depth);

/// d x d table of a_eigenvalue(sigma_k, sigma_l, N).
Matrix a_eigenvalues(const Vector& sigma, int depth);

/// A_{N,W}(Z) = sum_{k=1}^N (W W^T)^{(N-k)/N} Z (W^T W)^{(k-1)/N},
/// evaluated spectrally in the singular frames of W.
Matrix apply_A(const SvdTriple& svd, const Matrix& z, int depth);
Matrix apply_A(const Matrix& w, const Matrix& z, int depth);

/// Inverse of A_{N,W}; throws SingularOperatorError when sigma_min == 0.
Matrix apply_A_inverse(const SvdTriple& svd, const Matrix& z, int depth);
Matrix apply_A_inverse(const Matrix& w, const Matrix& z, int depth);

/// -A_{N,W}(E'(W)): the balanced (Riemannian) end-to-end flow.
Matrix reduced_field(const Matrix& w, const LossSpec& loss, int depth);

enum class Method { kRk4, kEuler };

struct FlowConfig {
  Method method = Method::kRk4;
  double dt = 1e-3;
  double tEnd = 1.0;
  int recordEvery = 1;
  // Inverse temperature used for the S / F columns of the records.
  double beta = std::numeric_limits<double>::infinity();
  // Stop once ||field||_F < stopTolerance for stopWindow consecutive steps;
  // 0 disables the check.
  double stopTolerance = 0.0;
  int stopWindow = 100;

  void validate() const;
};

struct TrajectoryRecord {
  double t = 0.0;
  double energy = 0.0;
  double entropy = 0.0;
  double freeEnergy = 0.0;
  Vector sigma;
  double balanceResidual = 0.0;
  double gDrift = 0.0;
  double detW = 0.0;
  // -<E'(W), dW/dt>_F; equals ||grad_{g^N} E||^2 on the balanced flow.
  double dissipation = 0.0;
  double fieldNorm = 0.0;
  Matrix endToEnd;
};

enum class IntegrationStatus { kCompleted, kConverged, kNonFinite };

template <class State>
struct IntegrationResult {
  std::vector<TrajectoryRecord> records;
  State finalState;
  IntegrationStatus status = IntegrationStatus::kCompleted;
  std::string message;
  long steps = 0;
};

using RecordSink = std::function<void(const TrajectoryRecord&)>;

/// Fixed-step integration of the full upstairs flow.
IntegrationResult<NetworkState> integrate_full(const NetworkState& initial,
                                               const LossSpec& loss,
                                               const FlowConfig& config,
                                               const RecordSink& sink = {});

/// Fixed-step integration of dW/dt = -A_{N,W}(E'(W)).
IntegrationResult<Matrix> integrate_reduced(const Matrix& initial,
                                            const LossSpec& loss, int depth,
                                            const FlowConfig& config,
                                            const RecordSink& sink = {});

/// Generic fixed-step integration of dW/dt = field(W) on end-to-end
/// matrices; records report depth-N entropy at config.beta.
IntegrationResult<Matrix> integrate_matrix_field(
    const Matrix& initial, const std::function<Matrix(const Matrix&)>& field,
    const LossSpec& loss, int depth, const FlowConfig& config,
    const RecordSink& sink = {});

/// |dE/dt + dissipation| at every interior record, with dE/dt from centered
/// differences of the recorded energies. Size is records.size() - 2.
std::vector<double> energy_decay_residuals(
    const std::vector<TrajectoryRecord>& records);

/// t,E,S,F,sigma_1..sigma_d,balance_residual,g_drift,det_w
std::string trajectory_csv_header(Index d);
void write_trajectory_row(std::ostream& os, const TrajectoryRecord& rec);

}  // namespace dln

#endif  // DLN_FLOWS_HPP
