#ifndef DLN_MATOPS_HPP
#define DLN_MATOPS_HPP

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dln {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raised for non-square or mismatched shapes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an input leaves the domain of an operation (NaN entries,
/// non-psd square-root arguments, repeated singular values where they are
/// forbidden, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when an operator that needs full rank meets a zero singular value.
class SingularOperatorError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Tolerances shared by every module. Defaults are the ones the test suites
/// and the audit battery are pinned to.
struct Tolerances {
  double algebraic = 1e-10;       // exact matrix identities
  double ode = 1e-6;              // ODE-level checks
  double coincident_gap = 1e-9;   // relative gap below which sigma_k == sigma_l
  double full_rank = 1e-14;       // smallest admissible singular value
  double symmetric = 1e-12;       // skew part tolerated in symmetric inputs
};

const Tolerances& default_tolerances();

/// W = qLeft * diag(sigma) * qRight^T with sigma descending.
struct SvdTriple {
  Matrix qLeft;
  Vector sigma;
  Matrix qRight;

  Matrix reconstruct() const;
  Index size() const { return sigma.size(); }
};

/// Either (Q, P) with W = Q P or (U, R) with W = R U^T.
struct PolarPair {
  Matrix orthogonal;
  Matrix psd;
  // Set when W was rank deficient; the orthogonal factor was then completed
  // from the SVD frames rather than determined by W.
  bool rankDeficient = false;
};

void require_square(const Matrix& m, const char* what);
void require_finite(const Matrix& m, const char* what);

/// Ordered SVD of a square matrix. Singular values descend; each left
/// singular vector has its first entry of magnitude above 1e-14 nonnegative,
/// with the matching right vector flipped along with it.
SvdTriple svd_ordered(const Matrix& w);

/// W = Q P with P = sqrt(W^T W).
PolarPair polar_left(const Matrix& w);
/// W = R U^T with R = sqrt(W W^T).
PolarPair polar_right(const Matrix& w);

/// Square root of a symmetric psd matrix via its spectral decomposition.
/// Eigenvalues in [-tol, 0) are clamped to zero; anything below throws.
Matrix psd_sqrt(const Matrix& s, double tol = 1e-12);

/// Real power of a symmetric psd matrix, spectrally. 0^0 is taken as 1.
Matrix psd_power(const Matrix& s, double exponent);

/// prod_{j<k} (a_k - a_j); 1 for a single entry.
double vandermonde(const Vector& values);

inline double frobenius_inner(const Matrix& a, const Matrix& b) {
  return (a.array() * b.array()).sum();
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

double orthogonality_residual(const Matrix& q);

/// (a^n - b^n) / (a - b) evaluated as a geometric sum in closed form for
/// a = x^(2/n), b = y^(2/n); i.e. (x^2 - y^2) / (x^(2/n) - y^(2/n)) for x, y >= 0.
/// Uses expm1 so that the result stays accurate down to x == y, where it
/// returns the analytic limit n * x^(2 - 2/n).
double power_divided_difference(double x, double y, double n);

}  // namespace dln

#endif  // DLN_MATOPS_HPP
