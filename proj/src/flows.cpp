#include "dln/flows.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "dln/thermo.hpp"

namespace dln {

LossSpec LossSpec::completion(std::vector<MaskEntry> entries) {
  LossSpec out;
  out.kind = LossKind::kCompletion;
  out.mask = std::move(entries);
  return out;
}

LossSpec LossSpec::frobenius_quadratic() { return LossSpec{}; }

LossSpec LossSpec::unit_diagonal(Index d) {
  std::vector<MaskEntry> entries;
  for (Index i = 0; i < d; ++i) entries.push_back({i, i, 1.0});
  return completion(std::move(entries));
}

LossSpec LossSpec::zero() { return completion({}); }

void LossSpec::validate(Index d) const {
  if (kind != LossKind::kCompletion) return;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    const MaskEntry& e = mask[a];
    if (e.row < 0 || e.row >= d || e.col < 0 || e.col >= d) {
      std::ostringstream os;
      os << "loss: mask entry (" << e.row + 1 << "," << e.col + 1
         << ") outside [1," << d << "]^2";
      throw DimensionError(os.str());
    }
    if (!std::isfinite(e.target)) throw DomainError("loss: non-finite target");
    for (std::size_t b = 0; b < a; ++b) {
      if (mask[b].row == e.row && mask[b].col == e.col)
        throw DomainError("loss: duplicate mask entry");
    }
  }
}

double loss_value(const LossSpec& loss, const Matrix& w) {
  if (loss.kind == LossKind::kFrobeniusQuadratic) return 0.5 * w.squaredNorm();
  double total = 0.0;
  for (const MaskEntry& e : loss.mask) {
    const double r = w(e.row, e.col) - e.target;
    total += r * r;
  }
  return 0.5 * total;
}

Matrix loss_gradient(const LossSpec& loss, const Matrix& w) {
  if (loss.kind == LossKind::kFrobeniusQuadratic) return w;
  Matrix g = Matrix::Zero(w.rows(), w.cols());
  for (const MaskEntry& e : loss.mask) g(e.row, e.col) = w(e.row, e.col) - e.target;
  return g;
}

namespace {

// prefix[i] = weights[0] * ... * weights[i-1]  (W_N ... W_{N-i+1}), prefix[0] = I
// suffix[i] = weights[i] * ... * weights[N-1]  (W_{N-i} ... W_1),   suffix[N] = I
struct PartialProducts {
  std::vector<Matrix> prefix;
  std::vector<Matrix> suffix;
};

PartialProducts partial_products(const NetworkState& state) {
  const std::size_t n = state.weights.size();
  const Index d = state.width();
  PartialProducts pp;
  pp.prefix.resize(n + 1);
  pp.suffix.resize(n + 1);
  pp.prefix[0] = Matrix::Identity(d, d);
  for (std::size_t i = 0; i < n; ++i) pp.prefix[i + 1] = pp.prefix[i] * state.weights[i];
  pp.suffix[n] = Matrix::Identity(d, d);
  for (std::size_t i = n; i-- > 0;) pp.suffix[i] = state.weights[i] * pp.suffix[i + 1];
  return pp;
}

}  // namespace

NetworkState full_flow_field(const NetworkState& state, const LossSpec& loss) {
  state.validate();
  const PartialProducts pp = partial_products(state);
  const std::size_t n = state.weights.size();
  const Matrix grad = loss_gradient(loss, pp.prefix[n]);
  NetworkState out;
  out.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.weights[i] = -(pp.prefix[i].transpose() * grad * pp.suffix[i + 1].transpose());
  }
  return out;
}

Matrix end_to_end_field_general(const NetworkState& state, const LossSpec& loss) {
  state.validate();
  const PartialProducts pp = partial_products(state);
  const std::size_t n = state.weights.size();
  const Matrix grad = loss_gradient(loss, pp.prefix[n]);
  Matrix out = Matrix::Zero(state.width(), state.width());
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& a = pp.prefix[i];
    const Matrix& b = pp.suffix[i + 1];
    out -= (a * a.transpose()) * grad * (b.transpose() * b);
  }
  return out;
}

double a_eigenvalue(double sk, double sl, int depth) {
  const double n = static_cast<double>(depth);
  const double hi = std::max(sk, sl);
  if (hi - std::min(sk, sl) < default_tolerances().coincident_gap * hi) {
    return n * std::pow(sk * sl, 1.0 - 1.0 / n);
  }
  return power_divided_difference(sk, sl, n);
}

Matrix a_eigenvalues(const Vector& sigma, int depth) {
  if (depth < 1) throw DomainError("depth must be >= 1");
  const Index d = sigma.size();
  Matrix c(d, d);
  for (Index k = 0; k < d; ++k) {
    for (Index l = k; l < d; ++l) {
      c(k, l) = a_eigenvalue(sigma(k), sigma(l), depth);
      c(l, k) = c(k, l);
    }
  }
  return c;
}

namespace {

void require_conformant(const SvdTriple& svd, const Matrix& z, const char* what) {
  if (z.rows() != svd.size() || z.cols() != svd.size()) {
    throw DimensionError(std::string(what) + ": Z does not match W");
  }
}

}  // namespace

Matrix apply_A(const SvdTriple& svd, const Matrix& z, int depth) {
  require_conformant(svd, z, "apply_A");
  const Matrix c = a_eigenvalues(svd.sigma, depth);
  const Matrix coords = svd.qLeft.transpose() * z * svd.qRight;
  return svd.qLeft * c.cwiseProduct(coords) * svd.qRight.transpose();
}

Matrix apply_A(const Matrix& w, const Matrix& z, int depth) {
  return apply_A(svd_ordered(w), z, depth);
}

Matrix apply_A_inverse(const SvdTriple& svd, const Matrix& z, int depth) {
  require_conformant(svd, z, "apply_A_inverse");
  const Matrix c = a_eigenvalues(svd.sigma, depth);
  if (!(c.minCoeff() > 0.0)) {
    throw SingularOperatorError("apply_A_inverse: W is singular (sigma_min = 0)");
  }
  const Matrix coords = svd.qLeft.transpose() * z * svd.qRight;
  return svd.qLeft * coords.cwiseQuotient(c) * svd.qRight.transpose();
}

Matrix apply_A_inverse(const Matrix& w, const Matrix& z, int depth) {
  return apply_A_inverse(svd_ordered(w), z, depth);
}

Matrix reduced_field(const Matrix& w, const LossSpec& loss, int depth) {
  return -apply_A(w, loss_gradient(loss, w), depth);
}

void FlowConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("flow: dt must be positive");
  if (!(tEnd > 0.0) || !std::isfinite(tEnd)) throw DomainError("flow: tEnd must be positive");
  if (dt > tEnd) throw DomainError("flow: dt must not exceed tEnd");
  if (recordEvery < 1) throw DomainError("flow: recordEvery must be >= 1");
  if (!(beta > 0.0)) throw DomainError("flow: beta must be positive");
  if (stopTolerance < 0.0) throw DomainError("flow: stop tolerance must be >= 0");
  if (stopWindow < 1) throw DomainError("flow: stop window must be >= 1");
}

namespace {

NetworkState axpy(const NetworkState& x, double a, const NetworkState& y) {
  NetworkState out;
  out.weights.resize(x.weights.size());
  for (std::size_t i = 0; i < x.weights.size(); ++i)
    out.weights[i] = x.weights[i] + a * y.weights[i];
  return out;
}

Matrix axpy(const Matrix& x, double a, const Matrix& y) { return x + a * y; }

double field_norm(const NetworkState& f) { return std::sqrt(f.squared_norm()); }
double field_norm(const Matrix& f) { return f.norm(); }

bool all_finite(const NetworkState& s) {
  for (const auto& w : s.weights)
    if (!w.allFinite()) return false;
  return true;
}
bool all_finite(const Matrix& m) { return m.allFinite(); }

// Shared fixed-step driver. `field` maps a state to its velocity and
// `describe` fills a record from (state, t, velocity at state).
template <class State, class Field, class Describe>
IntegrationResult<State> drive(const State& initial, Field&& field,
                               Describe&& describe, const FlowConfig& config,
                               const RecordSink& sink) {
  config.validate();
  IntegrationResult<State> result;
  const long n_steps = std::max(1L, std::lround(config.tEnd / config.dt));
  const double dt = config.dt;
  State x = initial;
  result.finalState = x;
  long step = 0;
  int calm = 0;
  auto emit = [&](const State& s, double t, const State& f) {
    TrajectoryRecord rec = describe(s, t, f);
    rec.fieldNorm = field_norm(f);
    if (sink) sink(rec);
    result.records.push_back(std::move(rec));
  };
  for (;;) {
    const double t = static_cast<double>(step) * dt;
    const State f = field(x);
    if (!all_finite(f)) {
      result.status = IntegrationStatus::kNonFinite;
      result.message = "non-finite field at t=" + format_double(t);
      break;
    }
    const bool last = step == n_steps;
    const bool recorded = step % config.recordEvery == 0 || last;
    if (recorded) emit(x, t, f);
    result.finalState = x;
    result.steps = step;
    if (last) break;
    if (config.stopTolerance > 0.0) {
      calm = field_norm(f) < config.stopTolerance ? calm + 1 : 0;
      if (calm >= config.stopWindow) {
        if (!recorded) emit(x, t, f);
        result.status = IntegrationStatus::kConverged;
        result.message = "field below tolerance at t=" + format_double(t);
        break;
      }
    }
    State next;
    if (config.method == Method::kEuler) {
      next = axpy(x, dt, f);
    } else {
      const State k2 = field(axpy(x, 0.5 * dt, f));
      const State k3 = field(axpy(x, 0.5 * dt, k2));
      const State k4 = field(axpy(x, dt, k3));
      next = axpy(axpy(axpy(axpy(x, dt / 6.0, f), dt / 3.0, k2), dt / 3.0, k3),
                  dt / 6.0, k4);
    }
    if (!all_finite(next)) {
      result.status = IntegrationStatus::kNonFinite;
      result.message = "non-finite state after t=" + format_double(t);
      break;
    }
    x = std::move(next);
    ++step;
  }
  return result;
}

void fill_spectral(TrajectoryRecord& rec, const Matrix& w, const LossSpec& loss,
                   int depth, double beta) {
  const SvdTriple svd = svd_ordered(w);
  rec.sigma = svd.sigma;
  rec.endToEnd = w;
  rec.energy = loss_value(loss, w);
  rec.entropy = entropy_unchecked(svd.sigma, depth);
  rec.freeEnergy = std::isinf(beta) ? rec.energy : rec.energy - rec.entropy / beta;
  rec.detW = w.determinant();
}

}  // namespace

IntegrationResult<NetworkState> integrate_full(const NetworkState& initial,
                                               const LossSpec& loss,
                                               const FlowConfig& config,
                                               const RecordSink& sink) {
  initial.validate();
  loss.validate(initial.width());
  const ImbalanceG g0 = imbalance(initial);
  const int depth = initial.depth();
  auto field = [&](const NetworkState& s) { return full_flow_field(s, loss); };
  auto describe = [&](const NetworkState& s, double t, const NetworkState& f) {
    TrajectoryRecord rec;
    rec.t = t;
    const Matrix w = end_to_end(s);
    fill_spectral(rec, w, loss, depth, config.beta);
    rec.balanceResidual = balance_residual(s);
    rec.gDrift = imbalance_distance(imbalance(s), g0);
    // d/dt (W_N ... W_1) by the product rule.
    Matrix wdot = Matrix::Zero(w.rows(), w.cols());
    for (std::size_t i = 0; i < s.weights.size(); ++i) {
      Matrix term = Matrix::Identity(w.rows(), w.cols());
      for (std::size_t j = 0; j < s.weights.size(); ++j)
        term = term * (i == j ? f.weights[j] : s.weights[j]);
      wdot += term;
    }
    rec.dissipation = -frobenius_inner(loss_gradient(loss, w), wdot);
    return rec;
  };
  return drive(initial, field, describe, config, sink);
}

IntegrationResult<Matrix> integrate_matrix_field(
    const Matrix& initial, const std::function<Matrix(const Matrix&)>& field,
    const LossSpec& loss, int depth, const FlowConfig& config,
    const RecordSink& sink) {
  require_square(initial, "integrate");
  require_finite(initial, "integrate");
  loss.validate(initial.rows());
  auto describe = [&](const Matrix& w, double t, const Matrix& f) {
    TrajectoryRecord rec;
    rec.t = t;
    fill_spectral(rec, w, loss, depth, config.beta);
    rec.dissipation = -frobenius_inner(loss_gradient(loss, w), f);
    return rec;
  };
  return drive(initial, field, describe, config, sink);
}

IntegrationResult<Matrix> integrate_reduced(const Matrix& initial,
                                            const LossSpec& loss, int depth,
                                            const FlowConfig& config,
                                            const RecordSink& sink) {
  auto field = [&](const Matrix& w) { return reduced_field(w, loss, depth); };
  return integrate_matrix_field(initial, field, loss, depth, config, sink);
}

std::vector<double> energy_decay_residuals(
    const std::vector<TrajectoryRecord>& records) {
  std::vector<double> out;
  for (std::size_t i = 1; i + 1 < records.size(); ++i) {
    const double dedt = (records[i + 1].energy - records[i - 1].energy) /
                        (records[i + 1].t - records[i - 1].t);
    out.push_back(std::abs(dedt + records[i].dissipation));
  }
  return out;
}

std::string trajectory_csv_header(Index d) {
  std::string h = "t,E,S,F";
  for (Index k = 1; k <= d; ++k) h += ",sigma_" + std::to_string(k);
  h += ",balance_residual,g_drift,det_w";
  return h;
}

void write_trajectory_row(std::ostream& os, const TrajectoryRecord& rec) {
  os << format_double(rec.t) << ',' << format_double(rec.energy) << ','
     << format_double(rec.entropy) << ',' << format_double(rec.freeEnergy);
  for (Index k = 0; k < rec.sigma.size(); ++k) os << ',' << format_double(rec.sigma(k));
  os << ',' << format_double(rec.balanceResidual) << ',' << format_double(rec.gDrift)
     << ',' << format_double(rec.detW) << '\n';
}

}  // namespace dln
