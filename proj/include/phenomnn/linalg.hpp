#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "phenomnn/rng.hpp"

namespace phenomnn {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
  using Error::Error;
};

namespace detail {

inline void require_dims(bool ok, const char* op, std::size_t a0, std::size_t a1,
                         std::size_t b0, std::size_t b1) {
  if (!ok) {
    std::ostringstream os;
    os << op << ": dimension mismatch (" << a0 << "x" << a1 << " vs " << b0 << "x" << b1
       << ")";
    throw DimensionError(os.str());
  }
}

}  // namespace detail

/// Row-major dense matrix of doubles.
struct DenseMat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMat() = default;
  DenseMat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  DenseMat(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != rows * cols) throw DimensionError("DenseMat: data length != rows*cols");
  }

  static DenseMat from_rows(std::initializer_list<std::initializer_list<double>> rows_in) {
    DenseMat out;
    out.rows = rows_in.size();
    out.cols = out.rows == 0 ? 0 : rows_in.begin()->size();
    out.data.reserve(out.rows * out.cols);
    for (const auto& row : rows_in) {
      if (row.size() != out.cols) throw DimensionError("DenseMat::from_rows: ragged rows");
      out.data.insert(out.data.end(), row.begin(), row.end());
    }
    return out;
  }

  static DenseMat identity(std::size_t n) {
    DenseMat out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
  }

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

  bool same_shape(const DenseMat& other) const { return rows == other.rows && cols == other.cols; }
  bool operator==(const DenseMat&) const = default;
};

/// Diagonal matrix stored as its diagonal.
struct DiagMat {
  std::vector<double> diagonal;

  DiagMat() = default;
  explicit DiagMat(std::vector<double> d) : diagonal(std::move(d)) {}
  static DiagMat identity(std::size_t n) { return DiagMat(std::vector<double>(n, 1.0)); }

  std::size_t size() const { return diagonal.size(); }
  double operator[](std::size_t i) const { return diagonal[i]; }

  /// Elementwise reciprocal; every entry must be nonzero.
  DiagMat inverse() const {
    std::vector<double> out(diagonal.size());
    for (std::size_t i = 0; i < diagonal.size(); ++i) {
      if (diagonal[i] == 0.0) throw Error("DiagMat::inverse: zero diagonal entry");
      out[i] = 1.0 / diagonal[i];
    }
    return DiagMat(std::move(out));
  }

  double min() const {
    return diagonal.empty() ? 0.0 : *std::min_element(diagonal.begin(), diagonal.end());
  }
  double max() const {
    return diagonal.empty() ? 0.0 : *std::max_element(diagonal.begin(), diagonal.end());
  }

  bool operator==(const DiagMat&) const = default;
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Compressed-row sparse matrix. Column indices are strictly increasing
/// within each row.
struct SparseMat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<std::size_t> indices;
  std::vector<double> values;

  SparseMat() = default;
  SparseMat(std::size_t r, std::size_t c) : rows(r), cols(c), offsets(r + 1, 0) {}

  /// Duplicate (row, col) pairs are summed.
  static SparseMat from_triplets(std::size_t r, std::size_t c, std::vector<Triplet> triplets) {
    for (const auto& t : triplets)
      if (t.row >= r || t.col >= c) throw DimensionError("SparseMat::from_triplets: index out of range");
    std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    SparseMat out(r, c);
    for (std::size_t k = 0; k < triplets.size();) {
      const auto& t = triplets[k];
      double sum = 0.0;
      std::size_t j = k;
      while (j < triplets.size() && triplets[j].row == t.row && triplets[j].col == t.col) sum += triplets[j++].value;
      out.indices.push_back(t.col);
      out.values.push_back(sum);
      ++out.offsets[t.row + 1];
      k = j;
    }
    for (std::size_t i = 0; i < r; ++i) out.offsets[i + 1] += out.offsets[i];
    return out;
  }

  static SparseMat identity(std::size_t n) {
    SparseMat out(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      out.indices.push_back(i);
      out.values.push_back(1.0);
      out.offsets[i + 1] = i + 1;
    }
    return out;
  }

  static SparseMat from_dense(const DenseMat& d) {
    SparseMat out(d.rows, d.cols);
    for (std::size_t i = 0; i < d.rows; ++i) {
      for (std::size_t j = 0; j < d.cols; ++j) {
        if (d(i, j) != 0.0) {
          out.indices.push_back(j);
          out.values.push_back(d(i, j));
        }
      }
      out.offsets[i + 1] = out.indices.size();
    }
    return out;
  }

  std::size_t nnz() const { return values.size(); }

  /// Throws if the compressed-row invariants are broken.
  void validate() const {
    if (offsets.size() != rows + 1 || offsets.front() != 0 || offsets.back() != indices.size() ||
        indices.size() != values.size())
      throw Error("SparseMat: inconsistent offsets");
    for (std::size_t i = 0; i < rows; ++i) {
      if (offsets[i] > offsets[i + 1]) throw Error("SparseMat: offsets decreasing");
      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
        if (indices[k] >= cols) throw Error("SparseMat: column index out of range");
        if (k > offsets[i] && indices[k] <= indices[k - 1])
          throw Error("SparseMat: column indices not strictly increasing");
      }
    }
  }

  DenseMat to_dense() const {
    DenseMat out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) out(i, indices[k]) = values[k];
    return out;
  }

  SparseMat transpose() const {
    SparseMat out(cols, rows);
    for (auto c : indices) ++out.offsets[c + 1];
    for (std::size_t j = 0; j < cols; ++j) out.offsets[j + 1] += out.offsets[j];
    out.indices.resize(nnz());
    out.values.resize(nnz());
    std::vector<std::size_t> cursor(out.offsets.begin(), out.offsets.end() - 1);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) {
        const auto dst = cursor[indices[k]]++;
        out.indices[dst] = i;
        out.values[dst] = values[k];
      }
    }
    return out;
  }

  std::vector<double> row_sums() const {
    std::vector<double> out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) out[i] += values[k];
    return out;
  }

  std::vector<double> row_abs_sums() const {
    std::vector<double> out(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) out[i] += std::abs(values[k]);
    return out;
  }

  bool operator==(const SparseMat&) const = default;
};

// ---------------------------------------------------------------------------
// Dense kernels

inline DenseMat matmul(const DenseMat& a, const DenseMat& b) {
  detail::require_dims(a.cols == b.rows, "matmul", a.rows, a.cols, b.rows, b.cols);
  DenseMat out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* orow = out.data.data() + i * out.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.data.data() + k * b.cols;
      for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

inline DenseMat transpose(const DenseMat& a) {
  DenseMat out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

inline DenseMat add(const DenseMat& a, const DenseMat& b) {
  detail::require_dims(a.same_shape(b), "add", a.rows, a.cols, b.rows, b.cols);
  DenseMat out = a;
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += b.data[k];
  return out;
}

inline DenseMat sub(const DenseMat& a, const DenseMat& b) {
  detail::require_dims(a.same_shape(b), "sub", a.rows, a.cols, b.rows, b.cols);
  DenseMat out = a;
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] -= b.data[k];
  return out;
}

inline DenseMat scale(const DenseMat& a, double s) {
  DenseMat out = a;
  for (auto& v : out.data) v *= s;
  return out;
}

/// a*x + y
inline DenseMat axpy(double a, const DenseMat& x, const DenseMat& y) {
  detail::require_dims(x.same_shape(y), "axpy", x.rows, x.cols, y.rows, y.cols);
  DenseMat out = y;
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] += a * x.data[k];
  return out;
}

inline DenseMat hadamard(const DenseMat& a, const DenseMat& b) {
  detail::require_dims(a.same_shape(b), "hadamard", a.rows, a.cols, b.rows, b.cols);
  DenseMat out = a;
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] *= b.data[k];
  return out;
}

/// D*Y with D diagonal.
inline DenseMat row_scale(const DiagMat& d, const DenseMat& y) {
  detail::require_dims(d.size() == y.rows, "row_scale", d.size(), d.size(), y.rows, y.cols);
  DenseMat out = y;
  for (std::size_t i = 0; i < y.rows; ++i)
    for (auto& v : out.row(i)) v *= d.diagonal[i];
  return out;
}

inline DenseMat relu(const DenseMat& a) {
  DenseMat out = a;
  for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

inline double frobenius_dot(const DenseMat& a, const DenseMat& b) {
  detail::require_dims(a.same_shape(b), "frobenius_dot", a.rows, a.cols, b.rows, b.cols);
  double s = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) s += a.data[k] * b.data[k];
  return s;
}

inline double frobenius_norm(const DenseMat& a) { return std::sqrt(frobenius_dot(a, a)); }

inline double max_abs_diff(const DenseMat& a, const DenseMat& b) {
  detail::require_dims(a.same_shape(b), "max_abs_diff", a.rows, a.cols, b.rows, b.cols);
  double m = 0.0;
  for (std::size_t k = 0; k < a.data.size(); ++k) m = std::max(m, std::abs(a.data[k] - b.data[k]));
  return m;
}

inline bool all_finite(const DenseMat& a) {
  return std::all_of(a.data.begin(), a.data.end(), [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// Sparse kernels

inline DenseMat spmm(const SparseMat& s, const DenseMat& d) {
  detail::require_dims(s.cols == d.rows, "spmm", s.rows, s.cols, d.rows, d.cols);
  DenseMat out(s.rows, d.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    double* orow = out.data.data() + i * out.cols;
    for (std::size_t k = s.offsets[i]; k < s.offsets[i + 1]; ++k) {
      const double v = s.values[k];
      const double* drow = d.data.data() + s.indices[k] * d.cols;
      for (std::size_t j = 0; j < d.cols; ++j) orow[j] += v * drow[j];
    }
  }
  return out;
}

/// S^T * D without materializing S^T.
inline DenseMat spmm_transposed(const SparseMat& s, const DenseMat& d) {
  detail::require_dims(s.rows == d.rows, "spmm_transposed", s.rows, s.cols, d.rows, d.cols);
  DenseMat out(s.cols, d.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    const double* drow = d.data.data() + i * d.cols;
    for (std::size_t k = s.offsets[i]; k < s.offsets[i + 1]; ++k) {
      const double v = s.values[k];
      double* orow = out.data.data() + s.indices[k] * out.cols;
      for (std::size_t j = 0; j < d.cols; ++j) orow[j] += v * drow[j];
    }
  }
  return out;
}

/// a*A + b*B over the union of the two sparsity patterns.
inline SparseMat sparse_combine(double a, const SparseMat& A, double b, const SparseMat& B) {
  detail::require_dims(A.rows == B.rows && A.cols == B.cols, "sparse_combine", A.rows, A.cols, B.rows,
                       B.cols);
  SparseMat out(A.rows, A.cols);
  for (std::size_t i = 0; i < A.rows; ++i) {
    std::size_t p = A.offsets[i], q = B.offsets[i];
    const std::size_t pe = A.offsets[i + 1], qe = B.offsets[i + 1];
    while (p < pe || q < qe) {
      if (q == qe || (p < pe && A.indices[p] < B.indices[q])) {
        out.indices.push_back(A.indices[p]);
        out.values.push_back(a * A.values[p++]);
      } else if (p == pe || B.indices[q] < A.indices[p]) {
        out.indices.push_back(B.indices[q]);
        out.values.push_back(b * B.values[q++]);
      } else {
        out.indices.push_back(A.indices[p]);
        out.values.push_back(a * A.values[p++] + b * B.values[q++]);
      }
    }
    out.offsets[i + 1] = out.indices.size();
  }
  return out;
}

/// D - A for a square sparse A and diagonal D.
inline SparseMat diag_minus(const DiagMat& d, const SparseMat& a) {
  detail::require_dims(a.rows == a.cols && d.size() == a.rows, "diag_minus", d.size(), d.size(), a.rows,
                       a.cols);
  std::vector<Triplet> t;
  t.reserve(a.nnz() + a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    t.push_back({i, i, d.diagonal[i]});
    for (std::size_t k = a.offsets[i]; k < a.offsets[i + 1]; ++k) t.push_back({i, a.indices[k], -a.values[k]});
  }
  return SparseMat::from_triplets(a.rows, a.cols, std::move(t));
}

inline bool is_structurally_symmetric(const SparseMat& a) { return a.rows == a.cols && a == a.transpose(); }

// ---------------------------------------------------------------------------
// Kronecker-structured product

/// Action of (H^T (x) M) on vec(Y) (column-major vec), returned as the n x d
/// matrix M*Y*H. The Kronecker product is never formed.
inline DenseMat kron_matvec(const SparseMat& m, const DenseMat& h, const DenseMat& y) {
  detail::require_dims(m.rows == m.cols && m.cols == y.rows, "kron_matvec(M,Y)", m.rows, m.cols, y.rows,
                       y.cols);
  detail::require_dims(h.rows == h.cols && h.rows == y.cols, "kron_matvec(H,Y)", h.rows, h.cols, y.rows,
                       y.cols);
  return matmul(spmm(m, y), h);
}

inline DenseMat kron_matvec(const DiagMat& m, const DenseMat& h, const DenseMat& y) {
  detail::require_dims(m.size() == y.rows, "kron_matvec(M,Y)", m.size(), m.size(), y.rows, y.cols);
  detail::require_dims(h.rows == h.cols && h.rows == y.cols, "kron_matvec(H,Y)", h.rows, h.cols, y.rows,
                       y.cols);
  return matmul(row_scale(m, y), h);
}

// ---------------------------------------------------------------------------
// Matrix Market export

inline void write_matrix_market(std::ostream& os, const SparseMat& s) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << s.rows << ' ' << s.cols << ' ' << s.nnz() << '\n';
  char buf[64];
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t k = s.offsets[i]; k < s.offsets[i + 1]; ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", s.values[k]);
      os << (i + 1) << ' ' << (s.indices[k] + 1) << ' ' << buf << '\n';
    }
  }
}

inline SparseMat to_sparse(const DiagMat& d) {
  SparseMat out(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.indices.push_back(i);
    out.values.push_back(d.diagonal[i]);
    out.offsets[i + 1] = i + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extreme eigenvalues of symmetric operators

/// y = A x for a symmetric operator of the declared size.
using LinearOperator = std::function<void(std::span<const double> x, std::span<double> y)>;

enum class Extreme { max, min };

struct EigenOptions {
  std::size_t iters = 500;
  double tol = 1e-9;
  std::uint64_t seed = 0x5eed;
  /// Upper bound on the spectral radius (e.g. Gershgorin). Estimated when absent.
  std::optional<double> radius_bound;
};

struct EigenResult {
  double value = 0.0;
  double residual = 0.0;  ///< ||A v - value v|| for the returned unit vector
  std::size_t iterations = 0;
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> start_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0) + 0.5;  // biased away from orthogonality with 1
  const double norm = std::sqrt(dot(v, v));
  for (auto& x : v) x /= norm;
  return v;
}

/// Power iteration on apply(); returns the Rayleigh quotient of the top
/// eigenvector (largest-magnitude eigenvalue).
inline EigenResult power_iteration(const LinearOperator& apply, std::size_t n, const EigenOptions& opts,
                                   std::vector<double>& v) {
  std::vector<double> w(n);
  EigenResult res;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t it = 1; it <= opts.iters; ++it) {
    apply(v, w);
    const double theta = dot(v, w);
    const double wnorm = std::sqrt(dot(w, w));
    res.value = theta;
    res.iterations = it;
    if (wnorm == 0.0) {
      res.converged = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wnorm;
    if (std::abs(theta - prev) <= opts.tol * std::max(1.0, std::abs(theta))) {
      res.converged = true;
      break;
    }
    prev = theta;
  }
  return res;
}

}  // namespace detail

/// Largest or smallest eigenvalue of a symmetric operator by shifted power
/// iteration. For `max` the iteration runs on A + sI, for `min` on sI - A,
/// where s bounds the spectral radius, so the wanted end of the spectrum is
/// the dominant one. Non-convergence is reported through `converged`.
inline EigenResult extreme_eigenvalue(const LinearOperator& apply, std::size_t size, Extreme which,
                                      const EigenOptions& opts = {}) {
  if (opts.iters < 1 || !(opts.tol > 0.0)) throw Error("extreme_eigenvalue: iters >= 1 and tol > 0 required");
  if (size == 0) throw DimensionError("extreme_eigenvalue: empty operator");

  double shift;
  if (opts.radius_bound) {
    shift = *opts.radius_bound;
  } else {
    auto v = detail::start_vector(size, opts.seed ^ 0x9e3779b97f4a7c15ULL);
    EigenOptions rough = opts;
    rough.tol = 1e-6;
    rough.iters = std::min<std::size_t>(opts.iters, 200);
    std::vector<double> w(size);
    // An unshifted run converges to |lambda|_max from below; pad it.
    const auto r = detail::power_iteration(apply, size, rough, v);
    apply(v, w);
    shift = 1.01 * std::max(std::abs(r.value), std::sqrt(detail::dot(w, w)));
  }
  shift += 1e-12;

  const double sign = which == Extreme::max ? 1.0 : -1.0;
  LinearOperator shifted = [&](std::span<const double> x, std::span<double> y) {
    apply(x, y);
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = sign * y[i] + shift * x[i];
  };

  auto v = detail::start_vector(size, opts.seed);
  EigenResult res = detail::power_iteration(shifted, size, opts, v);

  // Final Rayleigh quotient and residual on the unshifted operator.
  std::vector<double> w(size);
  apply(v, w);
  const double lambda = detail::dot(v, w);
  double r2 = 0.0;
  for (std::size_t i = 0; i < size; ++i) r2 += (w[i] - lambda * v[i]) * (w[i] - lambda * v[i]);
  res.value = lambda;
  res.residual = std::sqrt(r2);
  return res;
}

inline LinearOperator as_operator(const SparseMat& s) {
  return [&s](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < s.rows; ++i) {
      double acc = 0.0;
      for (std::size_t k = s.offsets[i]; k < s.offsets[i + 1]; ++k) acc += s.values[k] * x[s.indices[k]];
      y[i] = acc;
    }
  };
}

inline LinearOperator as_operator(const DenseMat& a) {
  return [&a](std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < a.rows; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < a.cols; ++j) acc += a(i, j) * x[j];
      y[i] = acc;
    }
  };
}

/// Max absolute row sum, a Gershgorin bound on the spectral radius.
inline double gershgorin_bound(const SparseMat& s) {
  const auto sums = s.row_abs_sums();
  return sums.empty() ? 0.0 : *std::max_element(sums.begin(), sums.end());
}

inline double gershgorin_bound(const DenseMat& a) {
  double best = 0.0;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += std::abs(v);
    best = std::max(best, s);
  }
  return best;
}

/// Matrix overloads shift by the Gershgorin bound unless one is supplied.
inline EigenResult extreme_eigenvalue(const SparseMat& s, Extreme which, EigenOptions opts = {}) {
  detail::require_dims(s.rows == s.cols, "extreme_eigenvalue", s.rows, s.cols, s.cols, s.rows);
  if (!opts.radius_bound) opts.radius_bound = gershgorin_bound(s);
  return extreme_eigenvalue(as_operator(s), s.rows, which, opts);
}

inline EigenResult extreme_eigenvalue(const DenseMat& a, Extreme which, EigenOptions opts = {}) {
  detail::require_dims(a.rows == a.cols, "extreme_eigenvalue", a.rows, a.cols, a.cols, a.rows);
  if (!opts.radius_bound) opts.radius_bound = gershgorin_bound(a);
  return extreme_eigenvalue(as_operator(a), a.rows, which, opts);
}

}  // namespace phenomnn
