#include "dln/network.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

namespace dln {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream)
    : engine_(splitmix64(seed ^ splitmix64(stream * 0xD1B54A32D192ED03ULL + 1))) {}

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

Matrix Rng::normal_matrix(Index rows, Index cols) {
  Matrix m(rows, cols);
  // Row-major fill so the draw order matches the serialized layout.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = normal();
  return m;
}

Vector Rng::normal_vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal();
  return v;
}

NetworkState::NetworkState(std::vector<Matrix> stack) : weights(std::move(stack)) {
  validate();
}

double NetworkState::squared_norm() const {
  double total = 0.0;
  for (const auto& w : weights) total += w.squaredNorm();
  return total;
}

void NetworkState::validate() const {
  if (weights.empty()) throw DimensionError("NetworkState: empty weight stack");
  const Index d = weights.front().rows();
  for (const auto& w : weights) {
    require_square(w, "NetworkState");
    if (w.rows() != d) throw DimensionError("NetworkState: layers differ in width");
    require_finite(w, "NetworkState");
  }
}

double ImbalanceG::norm() const {
  double total = 0.0;
  for (const auto& g : entries) total += g.squaredNorm();
  return std::sqrt(total);
}

void BalancedCoords::validate() const {
  if (frames.empty()) throw DimensionError("BalancedCoords: no frames");
  const Index d = lambda.size();
  for (const auto& q : frames) {
    if (q.rows() != d || q.cols() != d)
      throw DimensionError("BalancedCoords: frame size does not match lambda");
    if (orthogonality_residual(q) > 1e-8)
      throw DomainError("BalancedCoords: frame is not orthogonal");
  }
  for (Index k = 0; k < d; ++k) {
    if (!(lambda(k) > default_tolerances().full_rank))
      throw DomainError("BalancedCoords: lambda must be positive (full rank)");
    if (k > 0 && lambda(k) > lambda(k - 1))
      throw DomainError("BalancedCoords: lambda must be descending");
  }
}

Matrix end_to_end(const NetworkState& state) {
  state.validate();
  Matrix w = state.layer(1);
  for (int p = 2; p <= state.depth(); ++p) w = state.layer(p) * w;
  return w;
}

ImbalanceG imbalance(const NetworkState& state) {
  state.validate();
  const int n = state.depth();
  ImbalanceG out;
  out.entries.resize(static_cast<std::size_t>(std::max(n - 1, 0)));
  for (int p = 1; p <= n - 1; ++p) {
    const Matrix& up = state.layer(p + 1);
    const Matrix& lo = state.layer(p);
    out.g(p) = symmetrize(up.transpose() * up - lo * lo.transpose());
  }
  return out;
}

double balance_residual(const NetworkState& state) {
  double worst = 0.0;
  for (const auto& g : imbalance(state).entries) worst = std::max(worst, g.norm());
  return worst;
}

double imbalance_distance(const ImbalanceG& a, const ImbalanceG& b) {
  if (a.count() != b.count()) throw DimensionError("imbalance_distance: depth mismatch");
  double total = 0.0;
  for (int p = 1; p <= a.count(); ++p) total += (a.g(p) - b.g(p)).squaredNorm();
  return std::sqrt(total);
}

NetworkState from_balanced_coords(const BalancedCoords& coords) {
  coords.validate();
  const int n = coords.depth();
  NetworkState out;
  out.weights.resize(static_cast<std::size_t>(n));
  for (int p = 1; p <= n; ++p) {
    out.layer(p) = coords.frame(p) * coords.lambda.asDiagonal() *
                   coords.frame(p - 1).transpose();
  }
  return out;
}

namespace {

Matrix orthogonal_factor(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

}  // namespace

BalancedCoords balanced_coords_from_state(const NetworkState& state) {
  state.validate();
  const int n = state.depth();
  const Index d = state.width();
  std::vector<SvdTriple> svds;
  svds.reserve(static_cast<std::size_t>(n));
  for (int p = 1; p <= n; ++p) svds.push_back(svd_ordered(state.layer(p)));
  auto layer_svd = [&](int p) -> const SvdTriple& {
    return svds[static_cast<std::size_t>(p - 1)];
  };

  BalancedCoords coords;
  coords.frames.resize(static_cast<std::size_t>(n + 1));
  Vector log_sum = Vector::Zero(d);
  for (int p = 1; p <= n; ++p) {
    const Vector& s = layer_svd(p).sigma;
    for (Index k = 0; k < d; ++k) {
      if (!(s(k) > 0.0))
        throw DomainError("balanced_coords_from_state: rank-deficient layer");
      log_sum(k) += std::log(s(k));
    }
  }
  coords.lambda = (log_sum / static_cast<double>(n)).array().exp().matrix();

  coords.frame(0) = layer_svd(1).qRight;
  Matrix left = layer_svd(1).qLeft;
  for (int p = 1; p <= n - 1; ++p) {
    const SvdTriple& next = layer_svd(p + 1);
    Vector sign(d);
    for (Index k = 0; k < d; ++k)
      sign(k) = left.col(k).dot(next.qRight.col(k)) < 0.0 ? -1.0 : 1.0;
    coords.frame(p) =
        orthogonal_factor(0.5 * (left + next.qRight * sign.asDiagonal()));
    left = next.qLeft * sign.asDiagonal();
  }
  coords.frame(n) = left;
  return coords;
}

NetworkState from_polar_params(const ImbalanceG& g, const Matrix& w1,
                               const std::vector<Matrix>& frames) {
  require_square(w1, "from_polar_params");
  const int n = g.count() + 1;
  if (static_cast<int>(frames.size()) != n - 1)
    throw DimensionError("from_polar_params: need N-1 frames (Q_N, ..., Q_2)");
  const Index d = w1.rows();
  NetworkState out;
  out.weights.resize(static_cast<std::size_t>(n));
  out.layer(1) = w1;
  for (int p = 1; p <= n - 1; ++p) {
    const Matrix& gp = g.g(p);
    const Matrix& q = frames[static_cast<std::size_t>(n - (p + 1))];
    if (gp.rows() != d || q.rows() != d)
      throw DimensionError("from_polar_params: size mismatch");
    const Matrix& wp = out.layer(p);
    const Matrix target = symmetrize(wp * wp.transpose() + gp);
    Matrix root;
    try {
      root = psd_sqrt(target, 1e-12);
    } catch (const DomainError&) {
      std::ostringstream os;
      os << "from_polar_params: R_" << p << "^2 + G_" << p
         << " is not positive semidefinite (layer " << p + 1 << ")";
      throw DomainError(os.str());
    }
    out.layer(p + 1) = q * root;
  }
  return out;
}

NetworkState transpose_reverse(const NetworkState& state) {
  NetworkState out;
  const int n = state.depth();
  out.weights.resize(static_cast<std::size_t>(n));
  for (int p = 1; p <= n; ++p) out.layer(p) = state.layer(n + 1 - p).transpose();
  return out;
}

Matrix haar_orthogonal(Index d, Rng& rng) {
  const Matrix z = rng.normal_matrix(d, d);
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index k = 0; k < d; ++k)
    if (r(k, k) < 0.0) q.col(k) *= -1.0;
  return q;
}

NetworkState init_random(Index d, int depth, double scale, InitMode mode,
                         std::uint64_t seed) {
  if (!(scale > 0.0)) throw DomainError("init_random: scale must be positive");
  if (d < 1 || depth < 1) throw DimensionError("init_random: d and N must be >= 1");
  Rng rng(seed);
  NetworkState gauss;
  gauss.weights.resize(static_cast<std::size_t>(depth));
  for (auto& w : gauss.weights) w = scale * rng.normal_matrix(d, d);
  if (mode == InitMode::kGaussian) return gauss;

  const SvdTriple svd = svd_ordered(end_to_end(gauss));
  BalancedCoords coords;
  coords.lambda =
      svd.sigma.array().pow(1.0 / static_cast<double>(depth)).matrix();
  coords.frames.resize(static_cast<std::size_t>(depth + 1));
  coords.frame(depth) = svd.qLeft;
  coords.frame(0) = svd.qRight;
  for (int p = 1; p <= depth - 1; ++p) coords.frame(p) = haar_orthogonal(d, rng);
  return from_balanced_coords(coords);
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace {

void write_flat(std::ostringstream& os, const Matrix& m) {
  os << '[';
  bool first = true;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) {
      if (!first) os << ", ";
      os << format_double(m(i, j));
      first = false;
    }
  os << ']';
}

Matrix read_flat(const nlohmann::json& flat, Index d) {
  if (!flat.is_array() || static_cast<Index>(flat.size()) != d * d)
    throw DimensionError("checkpoint: matrix entry count does not match d*d");
  Matrix m(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j)
      m(i, j) = flat.at(static_cast<std::size_t>(i * d + j)).get<double>();
  return m;
}

void check_depths(const nlohmann::json& doc, int first, int count) {
  const auto& depths = doc.at("depths");
  if (!depths.is_array() || static_cast<int>(depths.size()) != count)
    throw DimensionError("checkpoint: depths list has the wrong length");
  for (int i = 0; i < count; ++i)
    if (depths.at(static_cast<std::size_t>(i)).get<int>() != first - i)
      throw DimensionError("checkpoint: depths must run N, N-1, ...");
}

}  // namespace

std::string checkpoint_text(const NetworkState& state) {
  state.validate();
  std::ostringstream os;
  const int n = state.depth();
  os << "{\n  \"d\": " << state.width() << ",\n  \"N\": " << n
     << ",\n  \"depths\": [";
  for (int p = n; p >= 1; --p) os << p << (p > 1 ? ", " : "");
  os << "],\n  \"weights\": [\n";
  for (int p = n; p >= 1; --p) {
    os << "    ";
    write_flat(os, state.layer(p));
    os << (p > 1 ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
  return os.str();
}

std::string checkpoint_text(const BalancedCoords& coords) {
  coords.validate();
  std::ostringstream os;
  const int n = coords.depth();
  os << "{\n  \"d\": " << coords.width() << ",\n  \"N\": " << n
     << ",\n  \"lambda\": [";
  for (Index k = 0; k < coords.width(); ++k)
    os << (k ? ", " : "") << format_double(coords.lambda(k));
  os << "],\n  \"depths\": [";
  for (int p = n; p >= 0; --p) os << p << (p > 0 ? ", " : "");
  os << "],\n  \"frames\": [\n";
  for (int p = n; p >= 0; --p) {
    os << "    ";
    write_flat(os, coords.frame(p));
    os << (p > 0 ? ",\n" : "\n");
  }
  os << "  ]\n}\n";
  return os.str();
}

NetworkState network_from_json(const nlohmann::json& doc) {
  const Index d = doc.at("d").get<Index>();
  const int n = doc.at("N").get<int>();
  check_depths(doc, n, n);
  const auto& weights = doc.at("weights");
  if (static_cast<int>(weights.size()) != n)
    throw DimensionError("checkpoint: expected N weight matrices");
  NetworkState out;
  out.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.weights[static_cast<std::size_t>(i)] =
        read_flat(weights.at(static_cast<std::size_t>(i)), d);
  out.validate();
  return out;
}

BalancedCoords coords_from_json(const nlohmann::json& doc) {
  const Index d = doc.at("d").get<Index>();
  const int n = doc.at("N").get<int>();
  check_depths(doc, n, n + 1);
  BalancedCoords out;
  out.lambda.resize(d);
  const auto& lambda = doc.at("lambda");
  if (static_cast<Index>(lambda.size()) != d)
    throw DimensionError("checkpoint: lambda length does not match d");
  for (Index k = 0; k < d; ++k)
    out.lambda(k) = lambda.at(static_cast<std::size_t>(k)).get<double>();
  const auto& frames = doc.at("frames");
  if (static_cast<int>(frames.size()) != n + 1)
    throw DimensionError("checkpoint: expected N+1 frames");
  out.frames.resize(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i)
    out.frames[static_cast<std::size_t>(i)] =
        read_flat(frames.at(static_cast<std::size_t>(i)), d);
  out.validate();
  return out;
}

}  // namespace dln
