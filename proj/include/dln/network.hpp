#ifndef DLN_NETWORK_HPP
#define DLN_NETWORK_HPP

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "dln/matops.hpp"

namespace dln {

/// Deterministic per-stream generator. Streams are derived from a base seed
/// and a stream index with splitmix64, so ensembles are reproducible
/// regardless of how paths are scheduled.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi);
  Matrix normal_matrix(Index rows, Index cols);
  Vector normal_vector(Index n);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

/// The weight stack (W_N, ..., W_1). weights[0] is W_N and weights[N-1] is
/// W_1; use layer(p) with the 1-based depth index to avoid off-by-one slips.
struct NetworkState {
  std::vector<Matrix> weights;

  NetworkState() = default;
  explicit NetworkState(std::vector<Matrix> stack);

  int depth() const { return static_cast<int>(weights.size()); }
  Index width() const { return weights.empty() ? 0 : weights.front().rows(); }
  Matrix& layer(int p) { return weights[static_cast<std::size_t>(depth() - p)]; }
  const Matrix& layer(int p) const {
    return weights[static_cast<std::size_t>(depth() - p)];
  }
  double squared_norm() const;
  void validate() const;
};

/// (G_{N-1}, ..., G_1); g(p) returns G_p.
struct ImbalanceG {
  std::vector<Matrix> entries;

  int count() const { return static_cast<int>(entries.size()); }
  Matrix& g(int p) { return entries[static_cast<std::size_t>(count() - p)]; }
  const Matrix& g(int p) const {
    return entries[static_cast<std::size_t>(count() - p)];
  }
  double norm() const;
};

/// (Lambda, Q_N, ..., Q_0) with W_p = Q_p Lambda Q_{p-1}^T.
struct BalancedCoords {
  Vector lambda;
  std::vector<Matrix> frames;  // frames[0] = Q_N, frames[N] = Q_0

  int depth() const { return static_cast<int>(frames.size()) - 1; }
  Index width() const { return lambda.size(); }
  Matrix& frame(int p) { return frames[static_cast<std::size_t>(depth() - p)]; }
  const Matrix& frame(int p) const {
    return frames[static_cast<std::size_t>(depth() - p)];
  }
  void validate() const;
};

Matrix end_to_end(const NetworkState& state);

/// G_p = W_{p+1}^T W_{p+1} - W_p W_p^T, symmetrized.
ImbalanceG imbalance(const NetworkState& state);

/// max_p ||W_{p+1}^T W_{p+1} - W_p W_p^T||_F (0 for N = 1).
double balance_residual(const NetworkState& state);

/// ||G(a) - G(b)||_F summed over layers in quadrature.
double imbalance_distance(const ImbalanceG& a, const ImbalanceG& b);

NetworkState from_balanced_coords(const BalancedCoords& coords);

/// Recovers balanced coordinates from a state on (or near) the balanced
/// manifold using the layerwise SVDs: Lambda is the geometric mean of the
/// layer spectra, Q_N and Q_0 come from the outer layers and each interior
/// frame is the orthogonal polar factor of the average of its two estimates
/// (left frame of W_p, right frame of W_{p+1}) after sign alignment.
BalancedCoords balanced_coords_from_state(const NetworkState& state);

/// Polar recursion from the right: W_1 is given, and for p = 1..N-1
///   R_p^2 = W_p W_p^T,  P_{p+1} = sqrt(R_p^2 + G_p),  W_{p+1} = Q_{p+1} P_{p+1},
/// so that imbalance(result) == g. frames = (Q_N, ..., Q_2).
/// Throws DomainError naming the layer when R_p^2 + G_p is not psd.
NetworkState from_polar_params(const ImbalanceG& g, const Matrix& w1,
                               const std::vector<Matrix>& frames);

/// (W_N, ..., W_1) -> (W_1^T, ..., W_N^T). Maps the G-variety onto the
/// (-G reversed)-variety, which turns the right-to-left polar recursion into
/// the left-to-right one.
NetworkState transpose_reverse(const NetworkState& state);

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// diagonal of R made positive.
Matrix haar_orthogonal(Index d, Rng& rng);

enum class InitMode { kGaussian, kBalanced };

/// gaussian: i.i.d. N(0, scale^2) entries in every layer.
/// balanced: the end-to-end matrix is drawn as a product of N such Gaussian
/// layers, then rebuilt on the balanced manifold with Lambda = Sigma^{1/N},
/// Q_N and Q_0 from its SVD and Haar interior frames.
NetworkState init_random(Index d, int depth, double scale, InitMode mode,
                         std::uint64_t seed);

/// Checkpoint documents:
///   {"d": d, "N": N, "depths": [N, ..., 1], "weights": [[row-major], ...]}
///   {"d": d, "N": N, "lambda": [...], "depths": [N, ..., 0], "frames": [...]}
/// Numbers are written with 17 significant digits.
std::string checkpoint_text(const NetworkState& state);
std::string checkpoint_text(const BalancedCoords& coords);
NetworkState network_from_json(const nlohmann::json& doc);
BalancedCoords coords_from_json(const nlohmann::json& doc);

/// %.17g; used for every number written to CSV and JSON outputs.
std::string format_double(double x);

}  // namespace dln

#endif  // DLN_NETWORK_HPP
