#include "subeth/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace subeth {

Index LatticeSpec::full_dim() const {
  validate();
  Index dim = 1;
  for (int s = 0; s < sites; ++s) {
    if (dim > std::numeric_limits<Index>::max() / local_dim) {
      throw DimensionError("lattice Hilbert dimension overflows");
    }
    dim *= local_dim;
  }
  return dim;
}

void LatticeSpec::validate() const {
  if (sites < 1) throw DimensionError("lattice needs at least one site");
  if (local_dim < 1) throw DimensionError("local dimension must be positive");
  if (spatial_dim != 1) throw DimensionError("only one-dimensional lattices are supported");
}

ComplexMatrix SpectralDecomposition::reconstruct(const RealVector& values) const {
  if (values.size() != eigenvalues.size()) {
    throw DimensionError("replacement spectrum has wrong length");
  }
  return eigenvectors * values.asDiagonal() * eigenvectors.adjoint();
}

namespace linalg {

namespace {

Index product_of(std::span<const int> dims) {
  Index p = 1;
  for (int d : dims) {
    if (d < 1) throw DimensionError("site dimensions must be positive");
    p *= d;
  }
  return p;
}

void check_keep(std::span<const int> site_dims, std::span<const int> keep) {
  if (keep.empty()) throw DimensionError("kept site set is empty");
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] < 0 || keep[i] >= static_cast<int>(site_dims.size())) {
      throw DimensionError("kept site index " + std::to_string(keep[i]) + " out of range");
    }
    if (i > 0 && keep[i] <= keep[i - 1]) {
      throw DimensionError("kept sites must be strictly ascending");
    }
  }
}

}  // namespace

double inf_norm(const ComplexMatrix& m) {
  if (m.size() == 0) return 0.0;
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double hermiticity_defect(const ComplexMatrix& m) {
  require_square(m, "hermiticity check");
  return inf_norm(m - m.adjoint());
}

bool all_finite(const ComplexMatrix& m) {
  return m.allFinite();
}

void require_square(const ComplexMatrix& m, std::string_view what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << m.rows() << "x" << m.cols();
    throw DimensionError(os.str());
  }
}

void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, std::string_view what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw DimensionError(os.str());
  }
}

namespace {

// Some optimized LAPACK builds return wrong vectors on some CPUs, so results
// are checked: residual ||A V - V L|| and orthonormality, relative to ||A||.
template <typename Matrix>
bool eigensystem_ok(const Matrix& a, const Matrix& v, const RealVector& values) {
  const double scale = std::max(1.0, a.norm());
  const double tol = 1e-9 * scale;
  if (!v.allFinite() || !values.allFinite()) return false;
  const Matrix residual = a * v - v * values.asDiagonal();
  if (residual.norm() > tol) return false;
  const Matrix gram = v.adjoint() * v;
  return (gram - Matrix::Identity(v.cols(), v.cols())).norm() <= 1e-9 * std::sqrt(static_cast<double>(v.cols()));
}

template <typename Matrix>
void eigen_fallback(const Matrix& a, Matrix& v, RealVector& values) {
  const Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) throw Error("hermitian_eig: eigensolver did not converge");
  v = solver.eigenvectors();
  values = solver.eigenvalues();
}

}  // namespace

SpectralDecomposition hermitian_eig(const ComplexMatrix& m) {
  require_square(m, "hermitian_eig");
  if (!all_finite(m)) throw DomainError("hermitian_eig: non-finite entry", std::nan(""));
  const Index n = m.rows();
  const double defect = hermiticity_defect(m);
  if (defect > hermitian_tolerance(n)) {
    std::ostringstream os;
    os << "hermitian_eig: matrix is not Hermitian, ||M - M^dagger||_inf = " << defect;
    throw DomainError(os.str(), defect);
  }

  SpectralDecomposition out;
  out.eigenvalues.resize(n);
  if (n == 0) return out;
  const bool real_input = m.imag().cwiseAbs().maxCoeff() == 0.0;
  lapack_int info = 0;
  if (real_input) {
    const Eigen::MatrixXd sym = 0.5 * (m.real() + m.real().transpose());
    Eigen::MatrixXd a = sym;
    info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(n), a.data(),
                          static_cast<lapack_int>(n), out.eigenvalues.data());
    if (info != 0 || !eigensystem_ok(sym, a, out.eigenvalues)) eigen_fallback(sym, a, out.eigenvalues);
    out.eigenvectors = a.cast<Complex>();
  } else {
    const ComplexMatrix herm = 0.5 * (m + m.adjoint());
    out.eigenvectors = herm;
    info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'U', static_cast<lapack_int>(n),
                          out.eigenvectors.data(), static_cast<lapack_int>(n),
                          out.eigenvalues.data());
    if (info != 0 || !eigensystem_ok(herm, out.eigenvectors, out.eigenvalues)) {
      eigen_fallback(herm, out.eigenvectors, out.eigenvalues);
    }
  }
  return out;
}

ComplexMatrix matrix_function(const SpectralDecomposition& eig, const ScalarFunction& f,
                              const EigenvalueGuard& guard, std::string_view name) {
  RealVector values(eig.dim());
  for (Index i = 0; i < eig.dim(); ++i) {
    const double lambda = eig.eigenvalues(i);
    if (guard && !guard(lambda)) {
      std::ostringstream os;
      os << "matrix function " << name << ": eigenvalue " << lambda << " outside domain";
      throw DomainError(os.str(), lambda);
    }
    values(i) = f(lambda);
  }
  ComplexMatrix out = eig.reconstruct(values);
  return 0.5 * (out + out.adjoint());
}

ComplexMatrix matrix_function(const ComplexMatrix& m, const ScalarFunction& f,
                              const EigenvalueGuard& guard, std::string_view name) {
  return matrix_function(hermitian_eig(m), f, guard, name);
}

ComplexMatrix matrix_log(const ComplexMatrix& m) {
  return matrix_function(
      m, [](double x) { return std::log(x); }, [](double x) { return x > 0.0; }, "ln");
}

ComplexMatrix matrix_exp(const ComplexMatrix& m) {
  return matrix_function(m, [](double x) { return std::exp(x); }, {}, "exp");
}

ComplexMatrix matrix_sqrt(const ComplexMatrix& m) {
  const double floor = -hermitian_tolerance(m.rows());
  return matrix_function(
      m, [](double x) { return std::sqrt(std::max(x, 0.0)); },
      [floor](double x) { return x >= floor; }, "sqrt");
}

ComplexMatrix matrix_inv_sqrt(const ComplexMatrix& m) {
  return matrix_function(
      m, [](double x) { return 1.0 / std::sqrt(x); }, [](double x) { return x > 0.0; },
      "inverse sqrt");
}

ComplexMatrix matrix_power(const ComplexMatrix& m, double p) {
  if (p == 0.0) return ComplexMatrix::Identity(m.rows(), m.cols());
  if (p > 0.0) {
    const double floor = -hermitian_tolerance(m.rows());
    return matrix_function(
        m, [p](double x) { return x <= 0.0 ? 0.0 : std::pow(x, p); },
        [floor](double x) { return x >= floor; }, "power");
  }
  return matrix_function(
      m, [p](double x) { return std::pow(x, p); }, [](double x) { return x > 0.0; }, "power");
}

RealVector singular_values(const ComplexMatrix& m) {
  if (m.size() == 0) return RealVector();
  if (!all_finite(m)) throw DomainError("singular_values: non-finite entry", std::nan(""));
  RealVector s;
  if (m.rows() == m.cols() && hermiticity_defect(m) <= 1e-14 * std::max(1.0, inf_norm(m))) {
    s = hermitian_eig(m).eigenvalues.cwiseAbs();
  } else {
    const Index r = m.rows();
    const Index c = m.cols();
    ComplexMatrix dilation = ComplexMatrix::Zero(r + c, r + c);
    dilation.topRightCorner(r, c) = m;
    dilation.bottomLeftCorner(c, r) = m.adjoint();
    const RealVector ev = hermitian_eig(dilation).eigenvalues;
    // Ascending spectrum {-s_1..., 0..., +s_i...}: the top min(r, c) entries are the s_i.
    const Index k = std::min(r, c);
    s = ev.tail(k).cwiseMax(0.0);
  }
  std::sort(s.data(), s.data() + s.size(), std::greater<>());
  return s;
}

double schatten_norm(const ComplexMatrix& m, double k) {
  if (!(k > 0.0)) throw DomainError("schatten_norm: order must be positive", k);
  const RealVector s = singular_values(m);
  if (s.size() == 0) return 0.0;
  if (std::isinf(k)) return s.maxCoeff();
  if (k == 1.0) return s.sum();
  if (k == 2.0) return std::sqrt(s.squaredNorm());
  const double smax = s.maxCoeff();
  if (smax == 0.0) return 0.0;
  // Scaled to avoid overflow for large k.
  double acc = 0.0;
  for (Index i = 0; i < s.size(); ++i) acc += std::pow(s(i) / smax, k);
  return smax * std::pow(acc, 1.0 / k);
}

double trace_distance(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_shape(a, b, "trace_distance");
  return 0.5 * schatten_norm(a - b, 1.0);
}

ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

SiteSplit::SiteSplit(std::span<const int> site_dims, std::span<const int> keep) {
  check_keep(site_dims, keep);
  full_dim_ = product_of(site_dims);
  const std::size_t n = site_dims.size();
  std::vector<bool> kept(n, false);
  for (int s : keep) kept[static_cast<std::size_t>(s)] = true;

  kept_dim_ = 1;
  for (int s : keep) kept_dim_ *= site_dims[static_cast<std::size_t>(s)];
  traced_dim_ = full_dim_ / kept_dim_;
  rows_.assign(static_cast<std::size_t>(full_dim_), 0);

  // Mixed-radix decomposition with site 0 as the most significant digit.
  std::vector<int> digit(n, 0);
  for (Index a = 0; a < full_dim_; ++a) {
    Index k = 0;
    Index t = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (kept[j]) {
        k = k * site_dims[j] + digit[j];
      } else {
        t = t * site_dims[j] + digit[j];
      }
    }
    rows_[static_cast<std::size_t>(t * kept_dim_ + k)] = a;
    for (std::size_t j = n; j-- > 0;) {
      if (++digit[j] < site_dims[j]) break;
      digit[j] = 0;
    }
  }
}

ComplexMatrix SiteSplit::gather(const ComplexVector& v) const {
  if (v.size() != full_dim_) throw DimensionError("gather: vector length does not match layout");
  ComplexMatrix g(kept_dim_, traced_dim_);
  for (Index t = 0; t < traced_dim_; ++t) {
    for (Index k = 0; k < kept_dim_; ++k) g(k, t) = v(row(t, k));
  }
  return g;
}

ComplexVector SiteSplit::scatter(const ComplexMatrix& g) const {
  if (g.rows() != kept_dim_ || g.cols() != traced_dim_) {
    throw DimensionError("scatter: matrix shape does not match layout");
  }
  ComplexVector v(full_dim_);
  for (Index t = 0; t < traced_dim_; ++t) {
    for (Index k = 0; k < kept_dim_; ++k) v(row(t, k)) = g(k, t);
  }
  return v;
}

ComplexMatrix partial_trace(const ComplexMatrix& m, std::span<const int> site_dims,
                            std::span<const int> keep) {
  require_square(m, "partial_trace");
  const SiteSplit split(site_dims, keep);
  if (split.full_dim() != m.rows()) {
    std::ostringstream os;
    os << "partial_trace: site dimensions multiply to " << split.full_dim() << " but matrix has dim "
       << m.rows();
    throw DimensionError(os.str());
  }
  const Index dk = split.kept_dim();
  ComplexMatrix out = ComplexMatrix::Zero(dk, dk);
  for (Index t = 0; t < split.traced_dim(); ++t) {
    for (Index k2 = 0; k2 < dk; ++k2) {
      const Index c = split.row(t, k2);
      for (Index k1 = 0; k1 < dk; ++k1) out(k1, k2) += m(split.row(t, k1), c);
    }
  }
  return out;
}

ComplexMatrix partial_trace_outer(const ComplexVector& ket, const ComplexVector& bra,
                                  std::span<const int> site_dims, std::span<const int> keep) {
  const SiteSplit split(site_dims, keep);
  if (ket.size() != split.full_dim() || bra.size() != split.full_dim()) {
    throw DimensionError("partial_trace_outer: vector length does not match site dimensions");
  }
  return split.gather(ket) * split.gather(bra).adjoint();
}

ComplexMatrix embed(const ComplexMatrix& op, std::span<const int> site_dims,
                    std::span<const int> sites) {
  const SiteSplit split(site_dims, sites);
  if (op.rows() != split.kept_dim() || op.cols() != split.kept_dim()) {
    throw DimensionError("embed: operator dimension does not match the selected sites");
  }
  const Index dk = split.kept_dim();
  ComplexMatrix out = ComplexMatrix::Zero(split.full_dim(), split.full_dim());
  for (Index t = 0; t < split.traced_dim(); ++t) {
    for (Index k2 = 0; k2 < dk; ++k2) {
      const Index c = split.row(t, k2);
      for (Index k1 = 0; k1 < dk; ++k1) out(split.row(t, k1), c) = op(k1, k2);
    }
  }
  return out;
}

ComplexVector apply_local(const ComplexMatrix& op, const SiteSplit& split, const ComplexVector& v) {
  if (op.rows() != split.kept_dim() || op.cols() != split.kept_dim()) {
    throw DimensionError("apply_local: operator dimension does not match the selected sites");
  }
  return split.scatter(op * split.gather(v));
}

ComplexVector apply_local(const ComplexMatrix& op, std::span<const int> site_dims,
                          std::span<const int> sites, const ComplexVector& v) {
  return apply_local(op, SiteSplit(site_dims, sites), v);
}

std::vector<Index> translation_permutation(const LatticeSpec& lattice, int shift) {
  const Index dim = lattice.full_dim();
  const int n = lattice.sites;
  const int d = lattice.local_dim;
  const int s = ((shift % n) + n) % n;
  std::vector<Index> perm(static_cast<std::size_t>(dim));
  std::vector<int> digit(static_cast<std::size_t>(n));
  std::vector<int> moved(static_cast<std::size_t>(n));
  for (Index a = 0; a < dim; ++a) {
    Index rest = a;
    for (int j = n - 1; j >= 0; --j) {
      digit[static_cast<std::size_t>(j)] = static_cast<int>(rest % d);
      rest /= d;
    }
    for (int j = 0; j < n; ++j) moved[static_cast<std::size_t>((j + s) % n)] = digit[static_cast<std::size_t>(j)];
    Index b = 0;
    for (int j = 0; j < n; ++j) b = b * d + moved[static_cast<std::size_t>(j)];
    perm[static_cast<std::size_t>(a)] = b;
  }
  return perm;
}

ComplexMatrix translate(const ComplexMatrix& x, const LatticeSpec& lattice, int shift) {
  require_square(x, "translate");
  const Index dim = lattice.full_dim();
  if (x.rows() != dim) {
    std::ostringstream os;
    os << "translate: operator dim " << x.rows() << " does not match lattice dim " << dim;
    throw DimensionError(os.str());
  }
  const auto perm = translation_permutation(lattice, shift);
  ComplexMatrix out(dim, dim);
  for (Index b = 0; b < dim; ++b) {
    const Index pb = perm[static_cast<std::size_t>(b)];
    for (Index a = 0; a < dim; ++a) out(perm[static_cast<std::size_t>(a)], pb) = x(a, b);
  }
  return out;
}

ComplexVector translate(const ComplexVector& v, const LatticeSpec& lattice, int shift) {
  const Index dim = lattice.full_dim();
  if (v.size() != dim) throw DimensionError("translate: vector length does not match lattice");
  const auto perm = translation_permutation(lattice, shift);
  ComplexVector out(dim);
  for (Index a = 0; a < dim; ++a) out(perm[static_cast<std::size_t>(a)]) = v(a);
  return out;
}

}  // namespace linalg
}  // namespace subeth
