#include "dln/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dln {

TangentVectorUp::TangentVectorUp(int depth, Index d)
    : layers(static_cast<std::size_t>(depth), Matrix::Zero(d, d)) {}

double up_inner(const TangentVectorUp& a, const TangentVectorUp& b) {
  if (a.layers.size() != b.layers.size())
    throw DimensionError("up_inner: depth mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    total += frobenius_inner(a.layers[i], b.layers[i]);
  return total;
}

TangentVectorUp to_tangent(const NetworkState& velocities) {
  TangentVectorUp v;
  v.layers = velocities.weights;
  return v;
}

TangentVectorUp differential_dz(const BalancedCoords& coords, const Vector& theta,
                                const std::vector<Matrix>& a) {
  coords.validate();
  const int n = coords.depth();
  const Index d = coords.width();
  if (theta.size() != d) throw DimensionError("differential_dz: theta size");
  if (a.size() != coords.frames.size())
    throw DimensionError("differential_dz: need N+1 antisymmetric matrices");
  for (const Matrix& ap : a) {
    if (ap.rows() != d || ap.cols() != d)
      throw DimensionError("differential_dz: A_p size");
    if ((ap + ap.transpose()).cwiseAbs().maxCoeff() >
        default_tolerances().symmetric * std::max(1.0, ap.cwiseAbs().maxCoeff()))
      throw DomainError("differential_dz: A_p is not antisymmetric");
  }
  auto a_at = [&](int p) -> const Matrix& { return a[static_cast<std::size_t>(n - p)]; };
  TangentVectorUp out(n, d);
  for (int p = 1; p <= n; ++p) {
    const Matrix& qp = coords.frame(p);
    const Matrix& qm = coords.frame(p - 1);
    const Matrix wp = qp * coords.lambda.asDiagonal() * qm.transpose();
    out.layer(p) = a_at(p) * wp + qp * theta.asDiagonal() * qm.transpose() - wp * a_at(p - 1);
  }
  return out;
}

TangentVectorUp differential_dz(const BalancedCoords& coords,
                                const ParameterDirection& dir) {
  return differential_dz(coords, dir.theta, dir.a);
}

std::vector<ParameterDirection> standard_parameter_basis(const BalancedCoords& coords) {
  coords.validate();
  const int n = coords.depth();
  const Index d = coords.width();
  std::vector<ParameterDirection> out;
  const std::vector<Matrix> zeros(static_cast<std::size_t>(n + 1), Matrix::Zero(d, d));
  for (Index k = 0; k < d; ++k) {
    ParameterDirection dir{Vector::Zero(d), zeros};
    dir.theta(k) = 1.0;
    out.push_back(std::move(dir));
  }
  for (Index k = 0; k < d; ++k) {
    for (Index l = k + 1; l < d; ++l) {
      Matrix alpha = Matrix::Zero(d, d);
      alpha(k, l) = std::numbers::sqrt2 / 2.0;
      alpha(l, k) = -std::numbers::sqrt2 / 2.0;
      for (int p = 0; p <= n; ++p) {
        ParameterDirection dir{Vector::Zero(d), zeros};
        const Matrix& q = coords.frame(p);
        dir.a[static_cast<std::size_t>(n - p)] = q * alpha * q.transpose();
        out.push_back(std::move(dir));
      }
    }
  }
  return out;
}

namespace {

bool has_repeated(const Vector& lambda) {
  for (Index k = 0; k + 1 < lambda.size(); ++k) {
    if (lambda(k) - lambda(k + 1) < default_tolerances().coincident_gap * lambda(k))
      return true;
  }
  return false;
}

void require_distinct(const Vector& lambda, const char* what) {
  for (Index k = 0; k + 1 < lambda.size(); ++k) {
    if (lambda(k) - lambda(k + 1) < default_tolerances().coincident_gap * lambda(k)) {
      std::ostringstream os;
      os << what << ": lambda_" << k + 1 << " and lambda_" << k + 2
         << " coincide (gap " << lambda(k) - lambda(k + 1) << ")";
      throw DomainError(os.str());
    }
  }
}

}  // namespace

Matrix PullbackBlocks::assemble() const {
  const Index d = diagonalBlock.rows();
  Index total = d;
  for (const auto& b : tridiagBlocks) total += b.block.rows();
  Matrix g = Matrix::Zero(total, total);
  g.topLeftCorner(d, d) = diagonalBlock;
  Index offset = d;
  for (const auto& b : tridiagBlocks) {
    const Index m = b.block.rows();
    g.block(offset, offset, m, m) = b.block;
    offset += m;
  }
  return g;
}

PullbackBlocks pullback_metric(const BalancedCoords& coords) {
  coords.validate();
  const int n = coords.depth();
  const Index d = coords.width();
  PullbackBlocks out;
  out.diagonalBlock = static_cast<double>(n) * Matrix::Identity(d, d);
  out.degenerate = has_repeated(coords.lambda);
  for (Index k = 0; k < d; ++k) {
    for (Index l = k + 1; l < d; ++l) {
      const double s = coords.lambda(k) * coords.lambda(k) + coords.lambda(l) * coords.lambda(l);
      const double m = coords.lambda(k) * coords.lambda(l);
      Matrix h = Matrix::Zero(n + 1, n + 1);
      for (int p = 0; p <= n; ++p) {
        h(p, p) = (p == 0 || p == n) ? 0.5 * s : s;
        if (p < n) {
          h(p, p + 1) = -m;
          h(p + 1, p) = -m;
        }
      }
      out.tridiagBlocks.push_back({k, l, std::move(h)});
    }
  }
  return out;
}

std::vector<TangentVectorUp> BasisAtlas::all() const {
  std::vector<TangentVectorUp> out = lVectors;
  for (const auto& e : uVectors) out.push_back(e.v);
  return out;
}

std::vector<TangentVectorUp> BasisAtlas::kernel() const {
  std::vector<TangentVectorUp> out;
  for (const auto& e : uVectors)
    if (e.p > 0 && e.p < e.v.depth()) out.push_back(e.v);
  return out;
}

std::vector<TangentVectorUp> BasisAtlas::horizontal() const {
  std::vector<TangentVectorUp> out = lVectors;
  for (const auto& e : uVectors)
    if (e.p == 0 || e.p == e.v.depth()) out.push_back(e.v);
  return out;
}

BasisAtlas tangent_basis(const BalancedCoords& coords) {
  coords.validate();
  require_distinct(coords.lambda, "tangent_basis");
  const int n = coords.depth();
  const double nd = static_cast<double>(n);
  const Index d = coords.width();
  const Vector& lam = coords.lambda;
  auto outer = [&](int s, Index i, Index j) -> Matrix {
    return coords.frame(s).col(i) * coords.frame(s - 1).col(j).transpose();
  };
  BasisAtlas atlas;
  for (Index k = 0; k < d; ++k) {
    TangentVectorUp v(n, d);
    for (int s = 1; s <= n; ++s) v.layer(s) = outer(s, k, k) / std::sqrt(nd);
    atlas.lVectors.push_back(std::move(v));
  }
  for (Index k = 0; k < d; ++k) {
    for (Index l = k + 1; l < d; ++l) {
      const double lk = lam(k);
      const double ll = lam(l);
      // sum_s l_k^{2(s-1)} l_l^{2(N-s)} = (l_k^{2N} - l_l^{2N}) / (l_k^2 - l_l^2)
      double norm2 = 0.0;
      for (int s = 1; s <= n; ++s)
        norm2 += std::pow(lk, 2.0 * (s - 1)) * std::pow(ll, 2.0 * (n - s));
      const double c = 1.0 / std::sqrt(norm2);
      for (int p = 0; p <= n; ++p) {
        TangentVectorUp v(n, d);
        if (p == 0) {
          for (int s = 1; s <= n; ++s)
            v.layer(s) = c * std::pow(lk, s - 1) * std::pow(ll, n - s) * outer(s, l, k);
        } else if (p == n) {
          for (int s = 1; s <= n; ++s)
            v.layer(s) = c * std::pow(lk, n - s) * std::pow(ll, s - 1) * outer(s, k, l);
        } else {
          const double angle = p * std::numbers::pi / nd;
          const double denom =
              std::sqrt(nd * (lk * lk + ll * ll - 2.0 * lk * ll * std::cos(angle)));
          for (int s = 1; s <= n; ++s) {
            const double s0 = std::sin((s - 1) * angle);
            const double s1 = std::sin(s * angle);
            const double akl = (lk * s0 - ll * s1) / denom;
            const double alk = (ll * s0 - lk * s1) / denom;
            // The q_k q_l^T component carries -a^{k,l,p,s}: with the opposite
            // sign the vector is still unit and in ker phi_*, but leaves the
            // tangent space of the balanced manifold.
            v.layer(s) = -akl * outer(s, k, l) + alk * outer(s, l, k);
          }
        }
        atlas.uVectors.push_back({k, l, p, std::move(v)});
      }
    }
  }
  return atlas;
}

Matrix phi_push(const NetworkState& state, const TangentVectorUp& v) {
  state.validate();
  const std::size_t n = state.weights.size();
  if (v.layers.size() != n) throw DimensionError("phi_push: depth mismatch");
  const Index d = state.width();
  std::vector<Matrix> suffix(n + 1);
  suffix[n] = Matrix::Identity(d, d);
  for (std::size_t i = n; i-- > 0;) suffix[i] = state.weights[i] * suffix[i + 1];
  Matrix prefix = Matrix::Identity(d, d);
  Matrix out = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < n; ++i) {
    out += prefix * v.layers[i] * suffix[i + 1];
    prefix = prefix * state.weights[i];
  }
  return out;
}

SubmersionReport submersion_check(const BalancedCoords& coords, const LossSpec& loss,
                                  double tolerance) {
  const NetworkState state = from_balanced_coords(coords);
  const int n = state.depth();
  const Matrix w = end_to_end(state);
  const SvdTriple svd = svd_ordered(w);
  const BasisAtlas atlas = tangent_basis(coords);
  SubmersionReport report;

  for (const auto& e : atlas.uVectors) {
    if (e.p == 0 || e.p == n) continue;
    const double r = phi_push(state, e.v).norm();
    report.kernelResidual = std::max(report.kernelResidual, r);
    if (r > tolerance) {
      std::ostringstream os;
      os << "kernel direction u(" << e.k + 1 << "," << e.l + 1 << "," << e.p
         << ") has image norm " << r;
      report.failures.push_back(os.str());
    }
  }

  const std::vector<TangentVectorUp> horizontal = atlas.horizontal();
  std::vector<Matrix> images;
  for (const auto& v : horizontal) images.push_back(phi_push(state, v));
  for (std::size_t i = 0; i < images.size(); ++i) {
    const Matrix dual = apply_A_inverse(svd, images[i], n);
    for (std::size_t j = 0; j < images.size(); ++j) {
      const double target = i == j ? 1.0 : 0.0;
      const double r = std::abs(frobenius_inner(images[j], dual) - target);
      report.imageGramResidual = std::max(report.imageGramResidual, r);
    }
  }
  if (report.imageGramResidual > tolerance) {
    std::ostringstream os;
    os << "horizontal images are not g^N-orthonormal (residual "
       << report.imageGramResidual << ")";
    report.failures.push_back(os.str());
  }

  const NetworkState up = full_flow_field(state, loss);
  const double up_norm2 = up.squared_norm();
  const Matrix eprime = loss_gradient(loss, w);
  const double down_norm2 = frobenius_inner(eprime, apply_A(svd, eprime, n));
  report.gradientResidual =
      std::abs(up_norm2 - down_norm2) / std::max(1.0, std::abs(down_norm2));
  if (report.gradientResidual > tolerance) {
    std::ostringstream os;
    os << "gradient norms differ: upstairs " << up_norm2 << ", downstairs "
       << down_norm2;
    report.failures.push_back(os.str());
  }
  return report;
}

double metric_gN(const Matrix& w, const Matrix& z1, const Matrix& z2, int depth) {
  return frobenius_inner(z1, apply_A_inverse(w, z2, depth));
}

namespace {

Matrix a_infty_eigenvalues(const Vector& sigma) {
  const Index d = sigma.size();
  Matrix c(d, d);
  for (Index k = 0; k < d; ++k) {
    for (Index l = k; l < d; ++l) {
      const double hi = std::max(sigma(k), sigma(l));
      const double lo = std::min(sigma(k), sigma(l));
      double value;
      if (lo <= 0.0) {
        value = 0.0;  // the logarithmic mean vanishes at a zero endpoint
      } else {
        const double el = 2.0 * std::log(lo / hi);
        value = el == 0.0 ? hi * hi : hi * hi * std::expm1(el) / el;
      }
      c(k, l) = value;
      c(l, k) = value;
    }
  }
  return c;
}

}  // namespace

Matrix apply_A_infty(const SvdTriple& svd, const Matrix& z) {
  if (z.rows() != svd.size() || z.cols() != svd.size())
    throw DimensionError("apply_A_infty: Z does not match W");
  const Matrix c = a_infty_eigenvalues(svd.sigma);
  const Matrix coords = svd.qLeft.transpose() * z * svd.qRight;
  return svd.qLeft * c.cwiseProduct(coords) * svd.qRight.transpose();
}

Matrix apply_A_infty(const Matrix& w, const Matrix& z) {
  return apply_A_infty(svd_ordered(w), z);
}

double metric_gInfty(const Matrix& w, const Matrix& z1, const Matrix& z2) {
  const SvdTriple svd = svd_ordered(w);
  const Matrix c = a_infty_eigenvalues(svd.sigma);
  if (!(c.minCoeff() > 0.0))
    throw SingularOperatorError("metric_gInfty: W is singular");
  const Matrix coords = svd.qLeft.transpose() * z2 * svd.qRight;
  const Matrix dual = svd.qLeft * coords.cwiseQuotient(c) * svd.qRight.transpose();
  return frobenius_inner(z1, dual);
}

double volume_density(const Vector& sigma, int depth) {
  if (depth < 1) throw DomainError("volume_density: depth must be >= 1");
  const double n = static_cast<double>(depth);
  double det_term = 1.0;
  Vector powered(sigma.size());
  for (Index k = 0; k < sigma.size(); ++k) {
    if (!(sigma(k) > 0.0)) throw DomainError("volume_density: sigma must be positive");
    det_term *= std::pow(sigma(k), (n - 1.0) / n);
    powered(k) = std::pow(sigma(k), 2.0 / n);
  }
  return det_term * std::abs(vandermonde(powered));
}

}  // namespace dln
