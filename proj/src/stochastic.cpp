#include "dln/stochastic.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <Eigen/Eigenvalues>

#include "dln/geometry.hpp"
#include "dln/thermo.hpp"

namespace dln {

namespace {

Matrix cayley(const Matrix& a) {
  const Matrix id = Matrix::Identity(a.rows(), a.cols());
  return (id - 0.5 * a).partialPivLu().solve(id + 0.5 * a);
}

void require_full_rank(const SvdTriple& svd, const char* what) {
  if (svd.sigma.size() > 0 && !(svd.sigma.minCoeff() > default_tolerances().full_rank))
    throw SingularOperatorError(std::string(what) + ": W is singular");
}

// Kolmogorov tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2).
double kolmogorov_tail(double lambda) {
  if (lambda < 1e-3) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int j = 1; j <= 200; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16 * std::max(sum, 1e-300)) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

void SdeConfig::validate() const {
  if (!(beta > 0.0)) throw DomainError("sde: beta must be positive (or inf)");
  if (!(kappa >= 0.0) || std::isinf(kappa)) throw DomainError("sde: kappa must be finite and >= 0");
  if (!(dt > 0.0) || std::isinf(dt)) throw DomainError("sde: dt must be positive");
  if (!(tEnd >= 0.0) || std::isinf(tEnd)) throw DomainError("sde: tEnd must be finite and >= 0");
  if (paths < 1) throw DomainError("sde: paths must be >= 1");
}

Matrix bm_gN_scales(const Vector& sigma, int depth) {
  return a_eigenvalues(sigma, depth).array().sqrt().matrix();
}

Matrix bm_gN_step(const Matrix& w, double beta, int depth, double dt, const Matrix& noise) {
  require_square(w, "bm_gN_step");
  if (noise.rows() != w.rows() || noise.cols() != w.cols())
    throw DimensionError("bm_gN_step: noise shape");
  if (!(beta > 0.0)) throw DomainError("bm_gN_step: beta must be positive");
  if (!(dt > 0.0)) throw DomainError("bm_gN_step: dt must be positive");
  if (std::isinf(beta)) return w;
  const SvdTriple svd = svd_ordered(w);
  require_full_rank(svd, "bm_gN_step");
  const Matrix scaled = bm_gN_scales(svd.sigma, depth).cwiseProduct(noise);
  const Vector spp = sigma_double_prime(svd.sigma, depth);
  return w + std::sqrt(2.0 * dt / beta) * (svd.qLeft * scaled * svd.qRight.transpose()) +
         (dt / beta) * (svd.qLeft * spp.asDiagonal() * svd.qRight.transpose());
}

Matrix rle_step_down(const Matrix& w, const LossSpec& loss, int depth, const SdeConfig& cfg,
                     const Matrix& noise) {
  cfg.validate();
  Matrix next = w - cfg.dt * grad_free_energy(w, loss, depth, cfg.beta);
  if (cfg.kappa > 0.0 && !cfg.noiseless())
    next += bm_gN_step(w, cfg.beta / cfg.kappa, depth, cfg.dt, noise) - w;
  return next;
}

BalancedCoords reproject_balanced(const BalancedCoords& start, const NetworkState& target,
                                  int maxIterations) {
  BalancedCoords c = start;
  const int n = c.depth();
  for (int it = 0; it < maxIterations; ++it) {
    const NetworkState current = from_balanced_coords(c);
    TangentVectorUp residual(n, c.width());
    for (int p = 1; p <= n; ++p) residual.layer(p) = target.layer(p) - current.layer(p);

    const std::vector<ParameterDirection> basis = standard_parameter_basis(c);
    const Matrix gram = pullback_metric(c).assemble();
    Vector rhs(static_cast<Index>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i)
      rhs(static_cast<Index>(i)) = up_inner(differential_dz(c, basis[i]), residual);
    const Vector x = gram.ldlt().solve(rhs);

    Vector theta = Vector::Zero(c.width());
    std::vector<Matrix> a(c.frames.size(), Matrix::Zero(c.width(), c.width()));
    for (std::size_t i = 0; i < basis.size(); ++i) {
      const double xi = x(static_cast<Index>(i));
      theta += xi * basis[i].theta;
      for (std::size_t j = 0; j < a.size(); ++j) a[j] += xi * basis[i].a[j];
    }
    c.lambda += theta;
    for (std::size_t j = 0; j < a.size(); ++j) c.frames[j] = cayley(a[j]) * c.frames[j];
    c.validate();
    if (x.norm() <= 1e-15 * std::max(1.0, c.lambda.norm())) break;
  }
  return c;
}

NetworkState rle_step_up(const NetworkState& state, const LossSpec& loss, const SdeConfig& cfg,
                         const std::vector<Matrix>& noise, const UpStepOptions& options) {
  cfg.validate();
  state.validate();
  const int n = state.depth();
  const Index d = state.width();
  if (static_cast<int>(noise.size()) != n) throw DimensionError("rle_step_up: need N noise layers");
  for (const Matrix& m : noise)
    if (m.rows() != d || m.cols() != d) throw DimensionError("rle_step_up: noise layer shape");
  const double scale = std::max(1.0, state.squared_norm());
  if (balance_residual(state) > options.balanceTolerance * scale)
    throw DomainError("rle_step_up: state is not balanced");

  const BalancedCoords coords = balanced_coords_from_state(state);
  const NetworkState drift = full_flow_field(state, loss);
  NetworkState next = state;
  for (int p = 1; p <= n; ++p) next.layer(p) += cfg.dt * drift.layer(p);

  if (!cfg.noiseless()) {
    const BasisAtlas atlas = tangent_basis(coords);
    TangentVectorUp raw(n, d);
    for (std::size_t i = 0; i < noise.size(); ++i) raw.layers[i] = noise[i];
    const double group = std::sqrt(2.0 * cfg.dt / cfg.beta);
    const double complement = std::sqrt(2.0 * cfg.kappa * cfg.dt / cfg.beta);
    auto add = [&](const std::vector<TangentVectorUp>& vs, double weight) {
      if (weight == 0.0) return;
      for (const auto& v : vs) {
        const double c = weight * up_inner(v, raw);
        for (std::size_t i = 0; i < next.weights.size(); ++i) next.weights[i] += c * v.layers[i];
      }
    };
    add(atlas.kernel(), group);
    add(atlas.horizontal(), complement);
  }
  if (!options.reproject) return next;
  return from_balanced_coords(reproject_balanced(coords, next));
}

void DysonState::validate() const {
  for (Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x(i))) throw DomainError("dyson: non-finite particle");
    if (i > 0 && !(x(i) > x(i - 1))) throw CollisionError("dyson: particles not strictly increasing");
  }
}

Vector dyson_drift(const Vector& x) {
  Vector out = Vector::Zero(x.size());
  for (Index i = 0; i < x.size(); ++i)
    for (Index j = 0; j < x.size(); ++j)
      if (j != i) out(i) += 1.0 / (x(i) - x(j));
  return out;
}

DysonState dyson_particle_step(const DysonState& x, double beta, double dt, const Vector& noise) {
  x.validate();
  if (noise.size() != x.x.size()) throw DimensionError("dyson_particle_step: noise size");
  if (!(beta > 0.0)) throw DomainError("dyson_particle_step: beta must be positive");
  if (!(dt > 0.0)) throw DomainError("dyson_particle_step: dt must be positive");
  DysonState out{x.x + dt * dyson_drift(x.x)};
  if (!std::isinf(beta)) out.x += std::sqrt(2.0 * dt / beta) * noise;
  out.validate();
  return out;
}

namespace {

constexpr int kMaxHalvings = 20;

// Advances over dt with Brownian increment db (already scaled by sqrt(dt)).
DysonState advance_increment(const DysonState& x, double beta, double dt, const Vector& db,
                             Rng& rng, int depth, int& deepest) {
  deepest = std::max(deepest, depth);
  try {
    return dyson_particle_step(x, beta, dt, db / std::sqrt(dt));
  } catch (const CollisionError&) {
    if (depth >= kMaxHalvings)
      throw CollisionError("dyson: collision persists after " + std::to_string(kMaxHalvings) +
                           " step halvings");
  }
  const double h = 0.5 * dt;
  const Vector first = 0.5 * db + std::sqrt(0.25 * dt) * rng.normal_vector(db.size());
  const Vector second = db - first;
  const DysonState mid = advance_increment(x, beta, h, first, rng, depth + 1, deepest);
  return advance_increment(mid, beta, h, second, rng, depth + 1, deepest);
}

}  // namespace

DysonAdvance dyson_particle_advance(const DysonState& x, double beta, double dt,
                                    const Vector& noise, Rng& rng) {
  DysonAdvance out;
  out.state = advance_increment(x, beta, dt, std::sqrt(dt) * noise, rng, 0, out.halvings);
  return out;
}

HermitianMatrix hermitian_noise(Index d, Rng& rng) {
  HermitianMatrix h(d, d);
  const double r = std::sqrt(0.5);
  for (Index i = 0; i < d; ++i) {
    h(i, i) = rng.normal();
    for (Index j = i + 1; j < d; ++j) {
      const double a = rng.normal();
      const double b = rng.normal();
      h(i, j) = std::complex<double>(r * a, r * b);
      h(j, i) = std::conj(h(i, j));
    }
  }
  return h;
}

Vector hermitian_eigenvalues(const HermitianMatrix& m) {
  Eigen::SelfAdjointEigenSolver<HermitianMatrix> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

namespace {

HermitianMatrix split_step(const HermitianMatrix& m, double tangent, double normal,
                           const HermitianMatrix& dh, const EigenLossGradient* lossGradient,
                           double dt) {
  if (m.rows() != m.cols()) throw DimensionError("dyson_matrix_step: M must be square");
  if (dh.rows() != m.rows() || dh.cols() != m.cols())
    throw DimensionError("dyson_matrix_step: noise shape");
  if ((m - m.adjoint()).norm() > default_tolerances().symmetric * std::max(1.0, m.norm()))
    throw DomainError("dyson_matrix_step: M is not Hermitian");
  Eigen::SelfAdjointEigenSolver<HermitianMatrix> es(m);
  const Vector x = es.eigenvalues();
  const double spread = std::max(1.0, x.cwiseAbs().maxCoeff());
  for (Index i = 1; i < x.size(); ++i)
    if (!(x(i) - x(i - 1) > 1e-12 * spread))
      throw CollisionError("dyson_matrix_step: repeated eigenvalues");
  const HermitianMatrix& u = es.eigenvectors();
  HermitianMatrix local = u.adjoint() * dh * u;
  HermitianMatrix step = tangent * local;
  step.diagonal() = normal * local.diagonal();
  if (lossGradient != nullptr) {
    const Vector g = (*lossGradient)(x);
    if (g.size() != x.size()) throw DimensionError("dyson_matrix_step: loss gradient size");
    step.diagonal() -= dt * g.cast<std::complex<double>>();
  }
  HermitianMatrix out = m + u * step * u.adjoint();
  return 0.5 * (out + out.adjoint());
}

}  // namespace

HermitianMatrix dyson_matrix_step(const HermitianMatrix& m, double beta, double dt,
                                  const HermitianMatrix& noise) {
  if (!(beta > 0.0)) throw DomainError("dyson_matrix_step: beta must be positive");
  if (!(dt > 0.0)) throw DomainError("dyson_matrix_step: dt must be positive");
  return split_step(m, 1.0, std::isinf(beta) ? 0.0 : std::sqrt(2.0 / beta),
                    std::sqrt(dt) * noise, nullptr, dt);
}

HermitianMatrix dyson_matrix_step(const HermitianMatrix& m, double beta, double kappa,
                                  double dt, const HermitianMatrix& noise,
                                  const EigenLossGradient& lossGradient) {
  if (!(beta > 0.0)) throw DomainError("dyson_matrix_step: beta must be positive");
  if (!(kappa >= 0.0)) throw DomainError("dyson_matrix_step: kappa must be >= 0");
  if (!(dt > 0.0)) throw DomainError("dyson_matrix_step: dt must be positive");
  const double s = std::isinf(beta) ? 0.0 : std::sqrt(2.0 * dt / beta);
  return split_step(m, s, s * std::sqrt(kappa), noise, lossGradient ? &lossGradient : nullptr,
                    dt);
}

Vector sphere_step(const Vector& m, double dt, const Vector& noise) {
  if (noise.size() != m.size()) throw DimensionError("sphere_step: noise size");
  const double r2 = m.squaredNorm();
  if (!(r2 > 0.0)) throw DomainError("sphere_step: projection undefined at m = 0");
  const Vector dw = std::sqrt(dt) * noise;
  return m + dw - m * (m.dot(dw) / r2);
}

void for_each_path(int paths, std::uint64_t seed, const std::function<void(int, Rng&)>& body,
                   int threads) {
  if (paths <= 0) return;
  unsigned hw = threads > 0 ? static_cast<unsigned>(threads) : std::thread::hardware_concurrency();
  hw = std::max(1u, std::min(hw, static_cast<unsigned>(paths)));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  auto worker = [&] {
    for (int path = next++; path < paths; path = next++) {
      try {
        Rng rng(seed, static_cast<std::uint64_t>(path));
        body(path, rng);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failureMutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (hw == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < hw; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double root = std::sqrt(ne);
  return {d, kolmogorov_tail((root + 0.12 + 0.11 / root) * d)};
}

}  // namespace dln
