#include "dln/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/MatrixFunctions>

namespace dln::oracle {

Matrix power_sum_A(const Matrix& w, const Matrix& z, int depth) {
  const double n = static_cast<double>(depth);
  const Matrix left = w * w.transpose();
  const Matrix right = w.transpose() * w;
  Matrix out = Matrix::Zero(z.rows(), z.cols());
  for (int p = 1; p <= depth; ++p) {
    out += psd_power(left, (n - p) / n) * z * psd_power(right, (p - 1) / n);
  }
  return out;
}

Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& w,
                   double h) {
  Matrix g(w.rows(), w.cols());
  for (Index i = 0; i < w.rows(); ++i) {
    for (Index j = 0; j < w.cols(); ++j) {
      Matrix plus = w;
      Matrix minus = w;
      plus(i, j) += h;
      minus(i, j) -= h;
      g(i, j) = (f(plus) - f(minus)) / (2.0 * h);
    }
  }
  return g;
}

NetworkState fd_gradient(const std::function<double(const NetworkState&)>& f,
                         const NetworkState& state, double h) {
  NetworkState g = state;
  for (std::size_t layer = 0; layer < state.weights.size(); ++layer) {
    const Matrix& w = state.weights[layer];
    for (Index i = 0; i < w.rows(); ++i) {
      for (Index j = 0; j < w.cols(); ++j) {
        NetworkState plus = state;
        NetworkState minus = state;
        plus.weights[layer](i, j) += h;
        minus.weights[layer](i, j) -= h;
        g.weights[layer](i, j) = (f(plus) - f(minus)) / (2.0 * h);
      }
    }
  }
  return g;
}

Matrix gram(const std::vector<TangentVectorUp>& family) {
  const Index m = static_cast<Index>(family.size());
  Matrix g(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = i; j < m; ++j) {
      g(i, j) = up_inner(family[static_cast<std::size_t>(i)], family[static_cast<std::size_t>(j)]);
      g(j, i) = g(i, j);
    }
  return g;
}

Matrix numeric_pullback_gram(const BalancedCoords& coords) {
  std::vector<TangentVectorUp> images;
  for (const auto& dir : standard_parameter_basis(coords))
    images.push_back(differential_dz(coords, dir));
  return gram(images);
}

double group_gram_log_volume(const BalancedCoords& coords) {
  const int n = coords.depth();
  const Index d = coords.width();
  std::vector<TangentVectorUp> images;
  const std::vector<Matrix> zeros(static_cast<std::size_t>(n + 1), Matrix::Zero(d, d));
  for (Index k = 0; k < d; ++k) {
    for (Index l = k + 1; l < d; ++l) {
      Matrix alpha = Matrix::Zero(d, d);
      alpha(k, l) = std::numbers::sqrt2 / 2.0;
      alpha(l, k) = -std::numbers::sqrt2 / 2.0;
      for (int p = 1; p <= n - 1; ++p) {
        std::vector<Matrix> a = zeros;
        const Matrix& q = coords.frame(p);
        a[static_cast<std::size_t>(n - p)] = q * alpha * q.transpose();
        images.push_back(differential_dz(coords, Vector::Zero(d), a));
      }
    }
  }
  if (images.empty()) return 0.0;
  const Eigen::LLT<Matrix> llt(gram(images));
  if (llt.info() != Eigen::Success) throw DomainError("group Gram is not positive definite");
  const Matrix& l = llt.matrixL();
  return l.diagonal().array().log().sum();
}

BalancedCoords perturb_coords(const BalancedCoords& coords, const ParameterDirection& dir,
                              double eps) {
  BalancedCoords out = coords;
  out.lambda = coords.lambda + eps * dir.theta;
  for (std::size_t i = 0; i < coords.frames.size(); ++i) {
    const Matrix rot = (eps * dir.a[i]).exp();
    out.frames[i] = rot * coords.frames[i];
  }
  return out;
}

double jacobian_volume_density(const Vector& sigma, int depth, std::uint64_t seed) {
  const Index d = sigma.size();
  Rng rng(seed);
  const Matrix qn = haar_orthogonal(d, rng);
  const Matrix q0 = haar_orthogonal(d, rng);
  const Index pairs = d * (d - 1) / 2;
  const Index dim = d + 2 * pairs;

  auto build = [&](const Vector& params) -> Matrix {
    Vector s = params.head(d);
    Matrix omega = Matrix::Zero(d, d);
    Matrix xi = Matrix::Zero(d, d);
    Index idx = d;
    for (Index k = 0; k < d; ++k)
      for (Index l = k + 1; l < d; ++l) {
        omega(k, l) = params(idx);
        omega(l, k) = -params(idx);
        xi(k, l) = params(idx + pairs);
        xi(l, k) = -params(idx + pairs);
        ++idx;
      }
    const Matrix left = omega.exp();
    const Matrix right = (-xi).exp();
    return qn * left * s.asDiagonal() * right * q0.transpose();
  };

  Vector base = Vector::Zero(dim);
  base.head(d) = sigma;
  const double h = 1e-6;
  Matrix jac(d * d, dim);
  for (Index c = 0; c < dim; ++c) {
    Vector plus = base;
    Vector minus = base;
    plus(c) += h;
    minus(c) -= h;
    const Matrix diff = (build(plus) - build(minus)) / (2.0 * h);
    jac.col(c) = diff.reshaped();
  }

  // g^N as a d^2 x d^2 matrix acting on column-major vec(Z).
  const Matrix w = build(base);
  const SvdTriple svd = svd_ordered(w);
  Matrix metric(d * d, d * d);
  for (Index c = 0; c < d * d; ++c) {
    Matrix e = Matrix::Zero(d, d);
    e(c % d, c / d) = 1.0;
    metric.col(c) = apply_A_inverse(svd, e, depth).reshaped();
  }
  const Matrix pulled = jac.transpose() * metric * jac;
  return std::sqrt(std::abs(pulled.determinant()));
}

BalancedCoords random_coords(Index d, int depth, Rng& rng, double lo, double hi,
                             double minGap) {
  BalancedCoords coords;
  for (int attempt = 0;; ++attempt) {
    Vector lam(d);
    for (Index k = 0; k < d; ++k) lam(k) = rng.uniform(lo, hi);
    std::sort(lam.data(), lam.data() + d, std::greater<double>());
    bool ok = true;
    for (Index k = 0; k + 1 < d; ++k)
      if (lam(k) - lam(k + 1) < minGap * lam(k)) ok = false;
    if (ok || attempt > 1000) {
      coords.lambda = lam;
      break;
    }
  }
  coords.frames.resize(static_cast<std::size_t>(depth + 1));
  for (auto& q : coords.frames) q = haar_orthogonal(d, rng);
  return coords;
}

Matrix random_full_rank(Index d, Rng& rng, double lo, double hi) {
  Vector s(d);
  for (Index k = 0; k < d; ++k) s(k) = rng.uniform(lo, hi);
  std::sort(s.data(), s.data() + d, std::greater<double>());
  return haar_orthogonal(d, rng) * s.asDiagonal() * haar_orthogonal(d, rng).transpose();
}

}  // namespace dln::oracle
