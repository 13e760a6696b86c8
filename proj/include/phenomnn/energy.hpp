#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "phenomnn/hypergraph.hpp"
#include "phenomnn/linalg.hpp"
#include "phenomnn/rng.hpp"

namespace phenomnn {

/// How the clique term (a), a sum over ordered node pairs, enters the
/// general energy.
///   unordered: weight lambda0/2, so that H0 = H1 = I reproduces the simple
///              energy tr[Y^T (lambda0 L_C + lambda1 L_S_bar) Y] exactly
///   ordered:   weight lambda0, the literal ordered-pair sum
enum class CliquePairs { unordered, ordered };

/// Energy-shape parameters. The base-predictor output f(X;W) is passed to
/// the energy functions directly.
struct EnergyParams {
  DenseMat h0;
  DenseMat h1;
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  double alpha = 1.0;
  CliquePairs clique_pairs = CliquePairs::unordered;

  static EnergyParams identity(std::size_t d, double lambda0, double lambda1, double alpha = 1.0,
                               CliquePairs pairs = CliquePairs::unordered) {
    return {DenseMat::identity(d), DenseMat::identity(d), lambda0, lambda1, alpha, pairs};
  }

  /// Weight of the clique term (a) in the general energy.
  double clique_weight() const { return clique_pairs == CliquePairs::unordered ? 0.5 * lambda0 : lambda0; }

  void validate(const ExpansionOperators& ops, std::size_t d) const {
    if (lambda0 < 0.0 || lambda1 < 0.0) throw Error("energy: lambda0 and lambda1 must be >= 0");
    if (!(alpha > 0.0)) throw Error("energy: alpha must be > 0");
    if (lambda0 != ops.lambda0 || lambda1 != ops.lambda1)
      throw Error("energy: lambdas differ from the ones the operators were built for");
    detail::require_dims(h0.rows == d && h0.cols == d, "energy H0", h0.rows, h0.cols, d, d);
    detail::require_dims(h1.rows == d && h1.cols == d, "energy H1", h1.rows, h1.cols, d, d);
  }
};

/// Smooth part of the energy plus the nonnegativity-barrier status. The
/// barrier itself is never materialized as an infinity.
struct EnergyValue {
  double value = 0.0;
  bool feasible = true;
};

inline DenseMat prox_nonneg(const DenseMat& v) { return relu(v); }

inline bool is_nonnegative(const DenseMat& y) {
  return std::all_of(y.data.begin(), y.data.end(), [](double v) { return v >= 0.0; });
}

/// Z* = D_H^{-1} B^T Y: row k is the mean embedding of the members of e_k.
inline DenseMat z_star(const SparseMat& incidence, const DiagMat& edge_degree, const DenseMat& y) {
  return row_scale(edge_degree.inverse(), spmm_transposed(incidence, y));
}

inline DenseMat z_star(const Hypergraph& h, const DenseMat& y) {
  detail::require_dims(y.rows == h.n, "z_star", y.rows, y.cols, h.n, h.m);
  std::vector<double> dh(h.m);
  for (std::size_t k = 0; k < h.m; ++k) dh[k] = static_cast<double>(h.edge_sizes[k]);
  return z_star(h.incidence, DiagMat(std::move(dh)), y);
}

/// tr[Y^T L Y] for a square sparse L.
inline double trace_quadratic(const SparseMat& l, const DenseMat& y) { return frobenius_dot(y, spmm(l, y)); }

/// tr[Y^T (D - A) Y] without forming D - A.
inline double laplacian_quadratic(const DiagMat& d, const SparseMat& a, const DenseMat& y) {
  return frobenius_dot(y, row_scale(d, y)) - frobenius_dot(y, spmm(a, y));
}

namespace detail {

inline void check_energy_shapes(const DenseMat& y, const DenseMat& fx, const ExpansionOperators& ops) {
  require_dims(y.same_shape(fx), "energy Y vs f(X)", y.rows, y.cols, fx.rows, fx.cols);
  require_dims(y.rows == ops.n(), "energy Y vs operators", y.rows, y.cols, ops.n(), ops.n());
}

}  // namespace detail

/// General energy at Z = Z*(Y):
///   ||Y - F||^2 + w * tr[(Y H0)^T D_C Y H0 - 2 (Y H0)^T A_C Y + Y^T D_C Y]
///              + lambda1 * tr[(Y H1)^T D_S Y H1 - 2 (Y H1)^T B Z* + Z*^T D_H Z*]
/// with w = params.clique_weight().
inline EnergyValue energy_general(const DenseMat& y, const DenseMat& fx, const ExpansionOperators& ops,
                                  const EnergyParams& params) {
  detail::check_energy_shapes(y, fx, ops);
  params.validate(ops, y.cols);
  const double w = params.clique_weight();
  const DenseMat diff = sub(y, fx);
  double e = frobenius_dot(diff, diff);

  const DenseMat yh0 = matmul(y, params.h0);
  const double term_a = frobenius_dot(yh0, row_scale(ops.clique_deg, yh0)) -
                        2.0 * frobenius_dot(yh0, spmm(ops.clique_adj, y)) +
                        frobenius_dot(y, row_scale(ops.clique_deg, y));

  const DenseMat yh1 = matmul(y, params.h1);
  const DenseMat z = z_star(ops.incidence, ops.edge_degree, y);
  const double term_b = frobenius_dot(yh1, row_scale(ops.star_deg, yh1)) -
                        2.0 * frobenius_dot(yh1, spmm(ops.incidence, z)) +
                        frobenius_dot(z, row_scale(ops.edge_degree, z));

  e += w * term_a + params.lambda1 * term_b;
  return {e, is_nonnegative(y)};
}

/// ||Y - F||^2 + tr[Y^T (lambda0 L_C + lambda1 L_S_bar) Y].
inline EnergyValue energy_simple(const DenseMat& y, const DenseMat& fx, const ExpansionOperators& ops) {
  detail::check_energy_shapes(y, fx, ops);
  const DenseMat diff = sub(y, fx);
  const double e = frobenius_dot(diff, diff) +
                   ops.lambda0 * laplacian_quadratic(ops.clique_deg, ops.clique_adj, y) +
                   ops.lambda1 * laplacian_quadratic(ops.star_deg, ops.star_adj, y);
  return {e, is_nonnegative(y)};
}

/// Literal summation form (hyperedge feature term omitted):
///   sum_i ||y_i - f_i||^2
///   + lambda0 sum_k sum_{i in e_k} sum_{j in e_k} ||y_i H0 - y_j||^2
///   + lambda1 sum_k sum_{i in e_k} ||y_i H1 - z_k||^2
/// Feasibility covers both Y and Z. lambda0 multiplies the ordered-pair sum
/// directly, independent of params.clique_pairs.
inline EnergyValue energy_bruteforce(const DenseMat& y, const DenseMat& z, const DenseMat& fx,
                                     const Hypergraph& h, const EnergyParams& params) {
  detail::require_dims(y.same_shape(fx) && y.rows == h.n, "energy_bruteforce Y", y.rows, y.cols, fx.rows, fx.cols);
  detail::require_dims(z.rows == h.m && z.cols == y.cols, "energy_bruteforce Z", z.rows, z.cols, h.m, y.cols);
  const std::size_t d = y.cols;
  double g1 = 0.0;
  for (std::size_t i = 0; i < h.n; ++i)
    for (std::size_t p = 0; p < d; ++p) g1 += (y(i, p) - fx(i, p)) * (y(i, p) - fx(i, p));

  auto project = [&](const DenseMat& hm, std::size_t i) {
    std::vector<double> out(d, 0.0);
    for (std::size_t q = 0; q < d; ++q)
      for (std::size_t p = 0; p < d; ++p) out[q] += y(i, p) * hm(p, q);
    return out;
  };

  double term_a = 0.0, term_b = 0.0;
  for (std::size_t k = 0; k < h.m; ++k) {
    for (auto i : h.edges[k]) {
      const auto yi0 = project(params.h0, i);
      for (auto j : h.edges[k])
        for (std::size_t q = 0; q < d; ++q) term_a += (yi0[q] - y(j, q)) * (yi0[q] - y(j, q));
      const auto yi1 = project(params.h1, i);
      for (std::size_t q = 0; q < d; ++q) term_b += (yi1[q] - z(k, q)) * (yi1[q] - z(k, q));
    }
  }
  return {g1 + params.lambda0 * term_a + params.lambda1 * term_b, is_nonnegative(y) && is_nonnegative(z)};
}

/// Pieces shared by the general gradient and the general layer.
struct CompatTerms {
  DenseMat yc;  ///< A_C Y (H0 + H0^T) - D_C Y H0 H0^T
  DenseMat ys;  ///< A_S Y (H1 + H1^T) - D_S Y H1 H1^T
};

inline CompatTerms compat_terms(const DenseMat& y, const ExpansionOperators& ops, const EnergyParams& params) {
  const DenseMat s0 = add(params.h0, transpose(params.h0));
  const DenseMat g0 = matmul(params.h0, transpose(params.h0));
  const DenseMat s1 = add(params.h1, transpose(params.h1));
  const DenseMat g1 = matmul(params.h1, transpose(params.h1));
  return {sub(kron_matvec(ops.clique_adj, s0, y), kron_matvec(ops.clique_deg, g0, y)),
          sub(kron_matvec(ops.star_adj, s1, y), kron_matvec(ops.star_deg, g1, y))};
}

/// Gradient of the smooth general energy:
///   2(Y - F) + 2w(D_C Y - Yc) + 2 lambda1 (A_S Y - Ys).
inline DenseMat grad_general(const DenseMat& y, const DenseMat& fx, const ExpansionOperators& ops,
                             const EnergyParams& params) {
  detail::check_energy_shapes(y, fx, ops);
  params.validate(ops, y.cols);
  const auto t = compat_terms(y, ops, params);
  DenseMat g = sub(y, fx);
  g = axpy(params.clique_weight(), sub(row_scale(ops.clique_deg, y), t.yc), g);
  g = axpy(params.lambda1, sub(spmm(ops.star_adj, y), t.ys), g);
  return scale(g, 2.0);
}

/// 2(lambda0 L_C + lambda1 L_S_bar) Y + 2Y - 2F.
inline DenseMat grad_simple(const DenseMat& y, const DenseMat& fx, const ExpansionOperators& ops) {
  detail::check_energy_shapes(y, fx, ops);
  DenseMat g = sub(y, fx);
  g = axpy(ops.lambda0, sub(row_scale(ops.clique_deg, y), spmm(ops.clique_adj, y)), g);
  g = axpy(ops.lambda1, sub(row_scale(ops.star_deg, y), spmm(ops.star_adj, y)), g);
  return scale(g, 2.0);
}

// ---------------------------------------------------------------------------
// Central-difference checking

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coordinates = 0;
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-7});
}

/// Compares `analytic` with central differences of `f` at `x` on up to
/// `samples` coordinates drawn without replacement.
inline GradCheckResult central_difference_check(const std::function<double(const DenseMat&)>& f, const DenseMat& x,
                                                const DenseMat& analytic, std::size_t samples = 512,
                                                double step = 1e-5, std::uint64_t seed = 1) {
  detail::require_dims(x.same_shape(analytic), "central_difference_check", x.rows, x.cols, analytic.rows,
                       analytic.cols);
  std::vector<std::size_t> coords(x.data.size());
  for (std::size_t k = 0; k < coords.size(); ++k) coords[k] = k;
  if (samples < coords.size()) {
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(coords));
    coords.resize(samples);
  }
  GradCheckResult res;
  DenseMat probe = x;
  for (auto k : coords) {
    const double orig = probe.data[k];
    probe.data[k] = orig + step;
    const double fp = f(probe);
    probe.data[k] = orig - step;
    const double fm = f(probe);
    probe.data[k] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic.data[k], numeric));
    res.max_abs_error = std::max(res.max_abs_error, std::abs(analytic.data[k] - numeric));
    ++res.coordinates;
  }
  return res;
}

}  // namespace phenomnn
