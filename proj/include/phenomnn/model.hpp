#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "phenomnn/autodiff.hpp"
#include "phenomnn/energy.hpp"
#include "phenomnn/hypergraph.hpp"
#include "phenomnn/linalg.hpp"
#include "phenomnn/rng.hpp"

namespace phenomnn {

enum class Variant { general, simple };
enum class ReluMode { every_step, end_only };

struct ModelConfig {
  Variant variant = Variant::simple;
  std::size_t layers = 16;  ///< T, propagation steps
  std::size_t hidden = 64;  ///< d, embedding width
  ReluMode relu_mode = ReluMode::every_step;
  double alpha = 0.1;
  double lambda0 = 1.0;
  double lambda1 = 1.0;
  std::size_t mlp_layers = 1;  ///< P, depth of the base predictor
  bool strict_alpha = false;
  CliquePairs clique_pairs = CliquePairs::unordered;

  void validate() const {
    if (layers < 1) throw Error("model: prop_step (T) must be >= 1");
    if (hidden < 1) throw Error("model: hidden must be >= 1");
    if (mlp_layers < 1) throw Error("model: mlp_layers must be >= 1");
    if (!(alpha > 0.0)) throw Error("model: alpha must be > 0");
    if (lambda0 < 0.0 || lambda1 < 0.0) throw Error("model: lambda0 and lambda1 must be >= 0");
  }

  bool relu_after(std::size_t step) const { return relu_mode == ReluMode::every_step || step + 1 == layers; }
};

/// x W + b with W stored in x out.
struct Linear {
  DenseMat weight;
  DenseMat bias;  ///< 1 x out

  static Linear glorot(std::size_t in, std::size_t out, Rng& rng) {
    Linear l{DenseMat(in, out), DenseMat(1, out)};
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    for (auto& v : l.weight.data) v = rng.uniform(-a, a);
    return l;
  }

  DenseMat apply(const DenseMat& x) const {
    DenseMat out = matmul(x, weight);
    for (std::size_t i = 0; i < out.rows; ++i)
      for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += bias(0, j);
    return out;
  }

  bool operator==(const Linear&) const = default;
};

/// f(X; W): P linear layers with ReLU between them (none after the last).
struct BasePredictor {
  std::vector<Linear> layers;

  DenseMat apply(const DenseMat& x) const {
    DenseMat h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      h = layers[l].apply(h);
      if (l + 1 < layers.size()) h = relu(h);
    }
    return h;
  }

  bool operator==(const BasePredictor&) const = default;
};

/// h(y; theta): one affine map d -> c.
struct Classifier {
  Linear linear;
  DenseMat apply(const DenseMat& y) const { return linear.apply(y); }
  bool operator==(const Classifier&) const = default;
};

struct ModelParams {
  BasePredictor base;
  DenseMat h0;
  DenseMat h1;
  Classifier head;
  bool operator==(const ModelParams&) const = default;
};

struct Model {
  ModelConfig config;
  std::size_t input_dim = 0;
  std::size_t class_count = 0;
  ModelParams params;

  /// Glorot-uniform weights, zero biases, H0/H1 = I + N(0, 0.01^2).
  static Model init(const ModelConfig& config, std::size_t input_dim, std::size_t class_count, Rng& rng) {
    config.validate();
    if (input_dim == 0 || class_count == 0) throw Error("model: input_dim and class_count must be positive");
    Model m{config, input_dim, class_count, {}};
    std::size_t in = input_dim;
    for (std::size_t l = 0; l < config.mlp_layers; ++l) {
      m.params.base.layers.push_back(Linear::glorot(in, config.hidden, rng));
      in = config.hidden;
    }
    m.params.h0 = DenseMat::identity(config.hidden);
    m.params.h1 = DenseMat::identity(config.hidden);
    for (auto& v : m.params.h0.data) v += rng.normal(0.0, 0.01);
    for (auto& v : m.params.h1.data) v += rng.normal(0.0, 0.01);
    m.params.head.linear = Linear::glorot(config.hidden, class_count, rng);
    return m;
  }

  /// Trainable tensors in slot order. H0/H1 are trainable only for the
  /// general variant.
  std::vector<DenseMat*> parameters() {
    std::vector<DenseMat*> out;
    for (auto& l : params.base.layers) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    if (config.variant == Variant::general) {
      out.push_back(&params.h0);
      out.push_back(&params.h1);
    }
    out.push_back(&params.head.linear.weight);
    out.push_back(&params.head.linear.bias);
    return out;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < params.base.layers.size(); ++l) {
      out.push_back("base." + std::to_string(l) + ".weight");
      out.push_back("base." + std::to_string(l) + ".bias");
    }
    if (config.variant == Variant::general) {
      out.push_back("h0");
      out.push_back("h1");
    }
    out.push_back("head.weight");
    out.push_back("head.bias");
    return out;
  }

  EnergyParams energy_params() const {
    if (config.variant == Variant::simple)
      return EnergyParams::identity(config.hidden, config.lambda0, config.lambda1, config.alpha, config.clique_pairs);
    return {params.h0, params.h1, config.lambda0, config.lambda1, config.alpha, config.clique_pairs};
  }

  bool operator==(const Model&) const = default;
};

inline bool operator==(const ModelConfig& a, const ModelConfig& b) {
  return a.variant == b.variant && a.layers == b.layers && a.hidden == b.hidden && a.relu_mode == b.relu_mode &&
         a.alpha == b.alpha && a.lambda0 == b.lambda0 && a.lambda1 == b.lambda1 && a.mlp_layers == b.mlp_layers &&
         a.strict_alpha == b.strict_alpha && a.clique_pairs == b.clique_pairs;
}

// ---------------------------------------------------------------------------
// Unrolled layers (value form)

/// One preconditioned proximal-gradient step on the general energy:
///   Y' = ReLU((1-a) Y + a D~^{-1} [F + (l0 - w) D_C Y + w Yc + l1 (L_S Y + Ys)])
/// where w is the clique weight; with w = l0 this is the ordered-pair form.
inline DenseMat layer_general(const DenseMat& y, const DenseMat& fx, const ExpansionOperators& ops,
                              const EnergyParams& params, bool apply_relu = true) {
  detail::check_energy_shapes(y, fx, ops);
  params.validate(ops, y.cols);
  const double w = params.clique_weight();
  const DenseMat s0 = add(params.h0, transpose(params.h0));
  const DenseMat g0 = matmul(params.h0, transpose(params.h0));
  const DenseMat s1 = add(params.h1, transpose(params.h1));
  const DenseMat g1 = matmul(params.h1, transpose(params.h1));

  const DenseMat acy = spmm(ops.clique_adj, y);
  const DenseMat dcy = row_scale(ops.clique_deg, y);
  const DenseMat asy = spmm(ops.star_adj, y);
  const DenseMat dsy = row_scale(ops.star_deg, y);
  const DenseMat yc = sub(matmul(acy, s0), matmul(dcy, g0));
  const DenseMat ys = sub(matmul(asy, s1), matmul(dsy, g1));

  DenseMat bracket = add(fx, scale(dcy, params.lambda0 - w));
  bracket = add(bracket, scale(yc, w));
  bracket = add(bracket, scale(add(sub(dsy, asy), ys), params.lambda1));
  DenseMat pre = add(scale(y, 1.0 - params.alpha), scale(row_scale(ops.precond_inv, bracket), params.alpha));
  return apply_relu ? relu(pre) : pre;
}

/// Y' = ReLU((1-a) Y + a D~^{-1} [(l0 A_C + l1 A_S) Y + F]).
inline DenseMat layer_simple(const DenseMat& y, const DenseMat& fx, const ExpansionOperators& ops, double alpha,
                             bool apply_relu = true) {
  detail::check_energy_shapes(y, fx, ops);
  const DenseMat bracket = add(spmm(ops.combined_adj, y), fx);
  DenseMat pre = add(scale(y, 1.0 - alpha), scale(row_scale(ops.precond_inv, bracket), alpha));
  return apply_relu ? relu(pre) : pre;
}

/// Node-wise form of layer_general:
///   y_i' = ReLU(sum_j y_j W_ij + y_i W_i + a D~_ii^{-1} f_i)
///   W_ij = a D~_ii^{-1} [w A_C[i,j] (H0 + H0^T) + l1 A_S[i,j] (H1 + H1^T - I)]
///   W_i  = (1-a) I - a D~_ii^{-1} [D_C[i,i] (w H0 H0^T - (l0 - w) I) + l1 D_S[i,i] (H1 H1^T - I)]
/// The sum runs over all j with A_C[i,j] != 0, which includes j = i. Dense
/// O(n^2 d^2) reference, meant for small graphs.
inline DenseMat messagepassing_layer(const DenseMat& y, const DenseMat& fx, const ExpansionOperators& ops,
                                     const EnergyParams& params, bool apply_relu = true) {
  detail::check_energy_shapes(y, fx, ops);
  params.validate(ops, y.cols);
  const std::size_t n = y.rows, d = y.cols;
  const double a = params.alpha, l0 = params.lambda0, l1 = params.lambda1, w = params.clique_weight();
  const DenseMat ac = ops.clique_adj.to_dense();
  const DenseMat as = ops.star_adj.to_dense();
  const DenseMat eye = DenseMat::identity(d);
  const DenseMat s0 = add(params.h0, transpose(params.h0));
  const DenseMat s1m = sub(add(params.h1, transpose(params.h1)), eye);
  const DenseMat g0 = matmul(params.h0, transpose(params.h0));
  const DenseMat g1m = sub(matmul(params.h1, transpose(params.h1)), eye);

  DenseMat out(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const double dinv = 1.0 / (l0 * ops.clique_deg[i] + l1 * ops.star_deg[i] + 1.0);
    std::vector<double> acc(d, 0.0);
    auto add_message = [&](std::size_t j, const DenseMat& wm) {
      for (std::size_t q = 0; q < d; ++q)
        for (std::size_t p = 0; p < d; ++p) acc[q] += y(j, p) * wm(p, q);
    };
    for (std::size_t j = 0; j < n; ++j) {
      if (ac(i, j) == 0.0) continue;
      DenseMat wij(d, d);
      for (std::size_t k = 0; k < d * d; ++k)
        wij.data[k] = a * dinv * (w * ac(i, j) * s0.data[k] + l1 * as(i, j) * s1m.data[k]);
      add_message(j, wij);
    }
    DenseMat wi(d, d);
    for (std::size_t k = 0; k < d * d; ++k)
      wi.data[k] = (1.0 - a) * eye.data[k] -
                   a * dinv * (ops.clique_deg[i] * (w * g0.data[k] - (l0 - w) * eye.data[k]) +
                               l1 * ops.star_deg[i] * g1m.data[k]);
    add_message(i, wi);
    for (std::size_t q = 0; q < d; ++q) {
      const double v = acc[q] + a * dinv * fx(i, q);
      out(i, q) = apply_relu ? std::max(v, 0.0) : v;
    }
  }
  return out;
}

/// Y^(0) = F followed by T layer applications; returns all T+1 states.
inline std::vector<DenseMat> propagate(const DenseMat& fx, const ExpansionOperators& ops, const ModelConfig& config,
                                       const EnergyParams& params) {
  std::vector<DenseMat> states{fx};
  for (std::size_t t = 0; t < config.layers; ++t) {
    const bool r = config.relu_after(t);
    states.push_back(config.variant == Variant::general ? layer_general(states.back(), fx, ops, params, r)
                                                        : layer_simple(states.back(), fx, ops, params.alpha, r));
  }
  return states;
}

struct ForwardResult {
  DenseMat embedding;  ///< Y^(T)
  DenseMat logits;
};

/// Inference forward pass (no dropout, no tape).
inline ForwardResult forward(const DenseMat& x, const Model& model, const ExpansionOperators& ops) {
  model.config.validate();
  const DenseMat fx = model.params.base.apply(x);
  const EnergyParams ep = model.energy_params();
  DenseMat y = fx;
  for (std::size_t t = 0; t < model.config.layers; ++t) {
    const bool r = model.config.relu_after(t);
    y = model.config.variant == Variant::general ? layer_general(y, fx, ops, ep, r)
                                                 : layer_simple(y, fx, ops, ep.alpha, r);
  }
  DenseMat logits = model.params.head.apply(y);
  return {std::move(y), std::move(logits)};
}

// ---------------------------------------------------------------------------
// Taped forward pass

struct DropoutPlan {
  double rate = 0.0;
  bool on_input = true;
  bool on_base_output = true;
  Rng* rng = nullptr;  ///< required when rate > 0
};

struct TapedForward {
  Tape tape;
  Tape::Var embedding = 0;
  Tape::Var logits = 0;
};

namespace detail {

inline DenseMat dropout_mask(std::size_t rows, std::size_t cols, double rate, Rng& rng) {
  DenseMat m(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (auto& v : m.data) v = rng.uniform() < rate ? 0.0 : keep;
  return m;
}

}  // namespace detail

/// Records the forward pass on a fresh tape with one slot per entry of
/// model.parameters().
inline TapedForward record_forward(const DenseMat& x, Model& model, const ExpansionOperators& ops,
                                   const DropoutPlan& dropout = {}) {
  const auto& cfg = model.config;
  cfg.validate();
  if (dropout.rate > 0.0 && dropout.rng == nullptr) throw Error("record_forward: dropout needs an rng");
  auto params = model.parameters();
  TapedForward fw{Tape(params.size())};
  Tape& tp = fw.tape;
  std::size_t slot = 0;

  Tape::Var h = tp.constant(x);
  if (dropout.rate > 0.0 && dropout.on_input) h = tp.mask(h, detail::dropout_mask(x.rows, x.cols, dropout.rate, *dropout.rng));
  const auto& layers = model.params.base.layers;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto wv = tp.parameter(slot++, layers[l].weight);
    const auto bv = tp.parameter(slot++, layers[l].bias);
    h = tp.add_row(tp.matmul(h, wv), bv);
    if (l + 1 < layers.size()) h = tp.relu(h);
  }
  Tape::Var fx = h;
  if (dropout.rate > 0.0 && dropout.on_base_output) {
    const auto& fv = tp.value(fx);
    fx = tp.mask(fx, detail::dropout_mask(fv.rows, fv.cols, dropout.rate, *dropout.rng));
  }

  const double alpha = cfg.alpha, l0 = cfg.lambda0, l1 = cfg.lambda1;
  const EnergyParams ep = model.energy_params();
  ep.validate(ops, cfg.hidden);
  Tape::Var y = fx;
  if (cfg.variant == Variant::general) {
    const double w = ep.clique_weight();
    const auto h0 = tp.parameter(slot++, model.params.h0);
    const auto h1 = tp.parameter(slot++, model.params.h1);
    const auto h0t = tp.transpose(h0);
    const auto h1t = tp.transpose(h1);
    const auto s0 = tp.add(h0, h0t);
    const auto g0 = tp.matmul(h0, h0t);
    const auto s1 = tp.add(h1, h1t);
    const auto g1 = tp.matmul(h1, h1t);
    for (std::size_t t = 0; t < cfg.layers; ++t) {
      const auto acy = tp.spmm(ops.clique_adj, y);
      const auto dcy = tp.row_scale(ops.clique_deg, y);
      const auto asy = tp.spmm(ops.star_adj, y);
      const auto dsy = tp.row_scale(ops.star_deg, y);
      const auto yc = tp.sub(tp.matmul(acy, s0), tp.matmul(dcy, g0));
      const auto ys = tp.sub(tp.matmul(asy, s1), tp.matmul(dsy, g1));
      auto bracket = tp.add(fx, tp.scale(dcy, l0 - w));
      bracket = tp.add(bracket, tp.scale(yc, w));
      bracket = tp.add(bracket, tp.scale(tp.add(tp.sub(dsy, asy), ys), l1));
      auto pre = tp.add(tp.scale(y, 1.0 - alpha), tp.scale(tp.row_scale(ops.precond_inv, bracket), alpha));
      y = cfg.relu_after(t) ? tp.relu(pre) : pre;
    }
  } else {
    for (std::size_t t = 0; t < cfg.layers; ++t) {
      const auto bracket = tp.add(tp.spmm(ops.combined_adj, y), fx);
      auto pre = tp.add(tp.scale(y, 1.0 - alpha), tp.scale(tp.row_scale(ops.precond_inv, bracket), alpha));
      y = cfg.relu_after(t) ? tp.relu(pre) : pre;
    }
  }
  fw.embedding = y;
  const auto hw = tp.parameter(slot++, model.params.head.linear.weight);
  const auto hb = tp.parameter(slot++, model.params.head.linear.bias);
  fw.logits = tp.add_row(tp.matmul(y, hw), hb);
  return fw;
}

// ---------------------------------------------------------------------------
// Step-size bounds

struct StepBound {
  double bound = 0.0;
  double sigma = 0.0;  ///< sigma_max (general) or sigma_min (simple)
  double d_clique_min = 0.0;
  double d_star_min = 0.0;
  EigenResult eigen;
};

inline EigenOptions step_bound_eigen_defaults() {
  EigenOptions o;
  o.iters = 5000;
  o.tol = 1e-12;
  return o;
}

namespace detail {

inline double bound_ratio(double num, double den) {
  return den > 0.0 ? num / den : std::numeric_limits<double>::infinity();
}

inline std::vector<double> abs_row_sums(const DenseMat& a) {
  std::vector<double> out(a.rows, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (double v : a.row(i)) out[i] += std::abs(v);
  return out;
}

}  // namespace detail

/// alpha < (1 + l0 dCmin + l1 dSmin) / (1 + l0 dCmin + l1 dSmin - sigma_min),
/// sigma_min the smallest eigenvalue of l0 A_C + l1 A_S.
inline StepBound step_bound_simple(const ExpansionOperators& ops, EigenOptions opts = step_bound_eigen_defaults()) {
  StepBound sb;
  sb.d_clique_min = ops.clique_deg.min();
  sb.d_star_min = ops.star_deg.min();
  const double num = 1.0 + ops.lambda0 * sb.d_clique_min + ops.lambda1 * sb.d_star_min;
  if (ops.lambda0 == 0.0 && ops.lambda1 == 0.0) {
    sb.eigen.converged = true;
    sb.sigma = 0.0;
  } else {
    if (!opts.radius_bound) opts.radius_bound = gershgorin_bound(ops.combined_adj);
    sb.eigen = extreme_eigenvalue(as_operator(ops.combined_adj), ops.n(), Extreme::min, opts);
    sb.sigma = sb.eigen.value;
  }
  sb.bound = detail::bound_ratio(num, num - sb.sigma);
  return sb;
}

/// The symmetric operator whose top eigenvalue enters the general bound,
/// acting on row-major n x d blocks:
///   R(Y) = (w - l0) D_C Y + w (D_C Y H0H0^T - A_C Y (H0+H0^T))
///          + l1 (A_S Y + D_S Y H1H1^T - A_S Y (H1+H1^T))
/// i.e. Q - P + l1 I(x)A_S (plus the (w - l0) I(x)D_C correction when the
/// clique weight differs from l0).
struct GeneralBoundOperator {
  const ExpansionOperators* ops;
  double w, l0, l1;
  DenseMat s0, g0, s1, g1;

  GeneralBoundOperator(const ExpansionOperators& o, const EnergyParams& p)
      : ops(&o), w(p.clique_weight()), l0(p.lambda0), l1(p.lambda1) {
    s0 = add(p.h0, transpose(p.h0));
    g0 = matmul(p.h0, transpose(p.h0));
    s1 = add(p.h1, transpose(p.h1));
    g1 = matmul(p.h1, transpose(p.h1));
  }

  std::size_t size() const { return ops->n() * s0.rows; }

  DenseMat apply(const DenseMat& y) const {
    DenseMat out = scale(row_scale(ops->clique_deg, y), w - l0);
    out = axpy(w, sub(kron_matvec(ops->clique_deg, g0, y), kron_matvec(ops->clique_adj, s0, y)), out);
    out = axpy(l1, add(spmm(ops->star_adj, y), sub(kron_matvec(ops->star_deg, g1, y), kron_matvec(ops->star_adj, s1, y))),
               out);
    return out;
  }

  /// Max absolute row sum of the Kronecker expansion.
  double radius_bound() const {
    const auto ac = ops->clique_adj.row_abs_sums();
    const auto as = ops->star_adj.row_abs_sums();
    const auto rs0 = detail::abs_row_sums(s0), rg0 = detail::abs_row_sums(g0);
    const auto rs1 = detail::abs_row_sums(s1), rg1 = detail::abs_row_sums(g1);
    double best = 0.0;
    for (std::size_t i = 0; i < ops->n(); ++i) {
      for (std::size_t p = 0; p < s0.rows; ++p) {
        const double dc = ops->clique_deg[i], ds = ops->star_deg[i];
        const double r = std::abs(w - l0) * dc + w * (dc * rg0[p] + ac[i] * rs0[p]) +
                         l1 * (as[i] + ds * rg1[p] + as[i] * rs1[p]);
        best = std::max(best, r);
      }
    }
    return best;
  }

  LinearOperator as_linear_operator() const {
    const std::size_t n = ops->n(), d = s0.rows;
    return [this, n, d](std::span<const double> x, std::span<double> out) {
      DenseMat y(n, d, std::vector<double>(x.begin(), x.end()));
      const DenseMat r = apply(y);
      std::copy(r.data.begin(), r.data.end(), out.begin());
    };
  }
};

/// alpha < (1 + l0 dCmin + l1 dSmin) / (1 + l0 dCmin + sigma_max),
/// sigma_max the top eigenvalue of GeneralBoundOperator.
inline StepBound step_bound_general(const ExpansionOperators& ops, const EnergyParams& params,
                                    EigenOptions opts = step_bound_eigen_defaults()) {
  params.validate(ops, params.h0.rows);
  StepBound sb;
  sb.d_clique_min = ops.clique_deg.min();
  sb.d_star_min = ops.star_deg.min();
  const double num = 1.0 + params.lambda0 * sb.d_clique_min + params.lambda1 * sb.d_star_min;
  GeneralBoundOperator op(ops, params);
  if (!opts.radius_bound) opts.radius_bound = op.radius_bound();
  if (*opts.radius_bound == 0.0) {
    sb.eigen.converged = true;
  } else {
    sb.eigen = extreme_eigenvalue(op.as_linear_operator(), op.size(), Extreme::max, opts);
  }
  sb.sigma = sb.eigen.value;
  sb.bound = detail::bound_ratio(num, 1.0 + params.lambda0 * sb.d_clique_min + sb.sigma);
  return sb;
}

inline StepBound step_bound(const Model& model, const ExpansionOperators& ops) {
  return model.config.variant == Variant::general ? step_bound_general(ops, model.energy_params())
                                                  : step_bound_simple(ops);
}

/// Throws when strict_alpha is set and alpha is not below the bound.
inline void check_alpha(const Model& model, const ExpansionOperators& ops) {
  if (!model.config.strict_alpha) return;
  const auto sb = step_bound(model, ops);
  if (!(model.config.alpha < sb.bound))
    throw Error("alpha " + std::to_string(model.config.alpha) + " is not below the convergence bound " +
                std::to_string(sb.bound));
}

// ---------------------------------------------------------------------------
// Checkpoints (JSON)

inline std::string to_string(Variant v) { return v == Variant::general ? "general" : "simple"; }
inline std::string to_string(ReluMode r) { return r == ReluMode::every_step ? "every_step" : "end_only"; }
inline std::string to_string(CliquePairs c) { return c == CliquePairs::unordered ? "unordered" : "ordered"; }

inline Variant parse_variant(const std::string& s) {
  if (s == "general") return Variant::general;
  if (s == "simple") return Variant::simple;
  throw Error("unknown variant '" + s + "' (expected general|simple)");
}
inline ReluMode parse_relu_mode(const std::string& s) {
  if (s == "every_step") return ReluMode::every_step;
  if (s == "end_only") return ReluMode::end_only;
  throw Error("unknown relu_mode '" + s + "' (expected every_step|end_only)");
}
inline CliquePairs parse_clique_pairs(const std::string& s) {
  if (s == "unordered") return CliquePairs::unordered;
  if (s == "ordered") return CliquePairs::ordered;
  throw Error("unknown clique_pairs '" + s + "' (expected unordered|ordered)");
}

inline nlohmann::json to_json(const DenseMat& m) { return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

inline DenseMat dense_from_json(const nlohmann::json& j) {
  return DenseMat(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                  j.at("data").get<std::vector<double>>());
}

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},   {"prop_step", c.layers},
          {"hidden", c.hidden},                {"relu_mode", to_string(c.relu_mode)},
          {"alpha", c.alpha},                  {"lambda0", c.lambda0},
          {"lambda1", c.lambda1},              {"mlp_layers", c.mlp_layers},
          {"strict_alpha", c.strict_alpha},    {"clique_pairs", to_string(c.clique_pairs)}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.layers = j.at("prop_step").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.relu_mode = parse_relu_mode(j.at("relu_mode").get<std::string>());
  c.alpha = j.at("alpha").get<double>();
  c.lambda0 = j.at("lambda0").get<double>();
  c.lambda1 = j.at("lambda1").get<double>();
  c.mlp_layers = j.at("mlp_layers").get<std::size_t>();
  c.strict_alpha = j.at("strict_alpha").get<bool>();
  c.clique_pairs = parse_clique_pairs(j.at("clique_pairs").get<std::string>());
  return c;
}

/// Checkpoint document:
///   {"format": "phenomnn-checkpoint", "version": 1, "config": {...},
///    "input_dim": dx, "class_count": c,
///    "tensors": {"base.<l>.weight", "base.<l>.bias", "h0", "h1",
///                "head.weight", "head.bias": {"rows", "cols", "data"}}}
/// Doubles are written in shortest round-trip form, so save/load is exact.
inline nlohmann::json checkpoint_to_json(const Model& m) {
  nlohmann::json tensors;
  for (std::size_t l = 0; l < m.params.base.layers.size(); ++l) {
    tensors["base." + std::to_string(l) + ".weight"] = to_json(m.params.base.layers[l].weight);
    tensors["base." + std::to_string(l) + ".bias"] = to_json(m.params.base.layers[l].bias);
  }
  tensors["h0"] = to_json(m.params.h0);
  tensors["h1"] = to_json(m.params.h1);
  tensors["head.weight"] = to_json(m.params.head.linear.weight);
  tensors["head.bias"] = to_json(m.params.head.linear.bias);
  return {{"format", "phenomnn-checkpoint"}, {"version", 1},          {"config", to_json(m.config)},
          {"input_dim", m.input_dim},        {"class_count", m.class_count}, {"tensors", tensors}};
}

inline Model checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "phenomnn-checkpoint") throw Error("checkpoint: unrecognized format");
  if (j.value("version", 0) != 1) throw Error("checkpoint: unsupported version");
  Model m;
  m.config = model_config_from_json(j.at("config"));
  m.input_dim = j.at("input_dim").get<std::size_t>();
  m.class_count = j.at("class_count").get<std::size_t>();
  const auto& t = j.at("tensors");
  for (std::size_t l = 0; l < m.config.mlp_layers; ++l) {
    m.params.base.layers.push_back({dense_from_json(t.at("base." + std::to_string(l) + ".weight")),
                                    dense_from_json(t.at("base." + std::to_string(l) + ".bias"))});
  }
  m.params.h0 = dense_from_json(t.at("h0"));
  m.params.h1 = dense_from_json(t.at("h1"));
  m.params.head.linear = {dense_from_json(t.at("head.weight")), dense_from_json(t.at("head.bias"))};
  auto expect = [](const DenseMat& a, std::size_t r, std::size_t c, const char* name) {
    if (a.rows != r || a.cols != c)
      throw Error(std::string("checkpoint: tensor ") + name + " has shape " + std::to_string(a.rows) + "x" +
                  std::to_string(a.cols) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
  };
  const std::size_t d = m.config.hidden;
  std::size_t in = m.input_dim;
  for (const auto& l : m.params.base.layers) {
    expect(l.weight, in, d, "base weight");
    expect(l.bias, 1, d, "base bias");
    in = d;
  }
  expect(m.params.h0, d, d, "h0");
  expect(m.params.h1, d, d, "h1");
  expect(m.params.head.linear.weight, d, m.class_count, "head.weight");
  expect(m.params.head.linear.bias, 1, m.class_count, "head.bias");
  return m;
}

inline void save_checkpoint(const Model& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << checkpoint_to_json(m).dump(1) << '\n';
}

inline Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path);
  try {
    return checkpoint_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint " + path + ": " + e.what());
  }
}

}  // namespace phenomnn
