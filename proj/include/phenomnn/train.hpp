#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "phenomnn/autodiff.hpp"
#include "phenomnn/data.hpp"
#include "phenomnn/energy.hpp"
#include "phenomnn/hypergraph.hpp"
#include "phenomnn/model.hpp"
#include "phenomnn/rng.hpp"

namespace phenomnn {

class DivergenceError : public Error {
public:
  using Error::Error;
};

enum class Optimizer { adam, sgd };

inline std::string to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }
inline Optimizer parse_optimizer(const std::string& s) {
  if (s == "adam") return Optimizer::adam;
  if (s == "sgd") return Optimizer::sgd;
  throw Error("unknown optimizer '" + s + "' (expected adam|sgd)");
}

struct TrainConfig {
  double lr = 0.01;
  double dropout = 0.0;
  std::size_t epochs = 200;
  double weight_decay = 0.0;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::size_t early_stop_patience = 100;  ///< 0 disables early stopping
  bool dropout_input = true;
  bool dropout_embedding = true;  ///< dropout on f(X; W)

  void validate() const {
    if (!(lr > 0.0)) throw Error("train: lr must be > 0");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("train: dropout must lie in [0, 1)");
    if (epochs < 1) throw Error("train: epochs must be >= 1");
    if (weight_decay < 0.0) throw Error("train: weight_decay must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw Error("train: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw Error("train: eps must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Loss and accuracy

/// Mean of -log softmax(logits_i)[label_i] over `rows`.
inline double cross_entropy(const DenseMat& logits, const std::vector<int>& labels,
                            const std::vector<std::size_t>& rows) {
  Tape tape;
  const auto z = tape.constant(logits);
  return tape.value(tape.softmax_cross_entropy(z, labels, rows))(0, 0);
}

/// Predicted class per row; ties go to the lowest class index.
inline std::vector<int> predict(const DenseMat& logits) {
  std::vector<int> out(logits.rows, 0);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < logits.cols; ++j)
      if (logits(i, j) > logits(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

inline double accuracy(const DenseMat& logits, const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw Error("accuracy: empty split");
  const auto pred = predict(logits);
  std::size_t hit = 0;
  for (auto i : rows) hit += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

inline double evaluate(const Model& model, const Dataset& ds, Split split) {
  if (split == Split::none) throw Error("evaluate: split 'none' holds no evaluation nodes");
  const auto rows = ds.indices(split);
  if (rows.empty()) throw Error("evaluate: split '" + to_string(split) + "' is empty");
  const auto ops = build_operators(ds.hypergraph, model.config.lambda0, model.config.lambda1);
  return accuracy(forward(ds.features, model, ops).logits, ds.labels, rows);
}

inline double evaluate(const Model& model, const Dataset& ds, const std::string& split) {
  return evaluate(model, ds, parse_split(split));
}

// ---------------------------------------------------------------------------
// Optimizers

struct AdamState {
  std::vector<DenseMat> m, v;
  std::size_t t = 0;
};

/// Bias-corrected Adam; weight decay is added to the gradient.
inline void adam_step(const std::vector<DenseMat*>& params, const GradStore& grads, AdamState& state,
                      const TrainConfig& cfg) {
  if (grads.size() != params.size()) throw Error("adam_step: gradient count does not match parameter count");
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->rows, p->cols);
      state.v.emplace_back(p->rows, p->cols);
    }
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto& p = params[s]->data;
    const auto& g = grads[s].data;
    auto& m = state.m[s].data;
    auto& v = state.v[s].data;
    if (g.size() != p.size() || m.size() != p.size()) throw Error("adam_step: state shape mismatch");
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k] + cfg.weight_decay * p[k];
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      p[k] -= cfg.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.eps);
    }
  }
}

inline void sgd_step(const std::vector<DenseMat*>& params, const GradStore& grads, const TrainConfig& cfg) {
  if (grads.size() != params.size()) throw Error("sgd_step: gradient count does not match parameter count");
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto& p = params[s]->data;
    const auto& g = grads[s].data;
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.lr * (g[k] + cfg.weight_decay * p[k]);
  }
}

// ---------------------------------------------------------------------------
// Training loop

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;  ///< NaN when the split is empty
  double test_acc = 0.0;
  double seconds = 0.0;  ///< cumulative wall time
};

struct Metrics {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_acc = 0.0;
  double test_acc = 0.0;       ///< at the best-validation checkpoint
  double last_test_acc = 0.0;  ///< after the final epoch
  double initial_loss = 0.0;
  double final_loss = 0.0;
  double seconds = 0.0;
  bool stopped_early = false;
  std::vector<double> energy_trace;  ///< energy of Y_0..Y_T for the best model, no dropout
};

struct TrainResult {
  Model best;
  Model last;
  Metrics metrics;
};

namespace detail {

inline double split_accuracy(const DenseMat& logits, const Dataset& ds, const std::vector<std::size_t>& rows) {
  return rows.empty() ? std::numeric_limits<double>::quiet_NaN() : accuracy(logits, ds.labels, rows);
}

}  // namespace detail

inline std::vector<double> energy_trace(const Model& model, const DenseMat& x, const ExpansionOperators& ops) {
  const DenseMat fx = model.params.base.apply(x);
  const EnergyParams ep = model.energy_params();
  std::vector<double> out;
  for (const auto& y : propagate(fx, ops, model.config, ep))
    out.push_back(model.config.variant == Variant::general ? energy_general(y, fx, ops, ep).value
                                                           : energy_simple(y, fx, ops).value);
  return out;
}

/// Full-batch training. Model selection uses validation accuracy (strict
/// improvement); without a validation split the last epoch is kept.
inline TrainResult train(const Dataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg) {
  mcfg.validate();
  tcfg.validate();
  ds.validate();
  const auto train_rows = ds.indices(Split::train);
  const auto val_rows = ds.indices(Split::val);
  const auto test_rows = ds.indices(Split::test);
  if (train_rows.empty()) throw Error("train: the train split is empty");

  const auto ops = build_operators(ds.hypergraph, mcfg.lambda0, mcfg.lambda1);
  Rng init_rng(tcfg.seed);
  Rng dropout_rng(tcfg.seed ^ 0x9e3779b97f4a7c15ULL);
  TrainResult result{Model::init(mcfg, ds.features.cols, ds.class_count, init_rng), {}, {}};
  Model& model = result.last;
  model = result.best;
  check_alpha(model, ops);

  const DropoutPlan dropout{tcfg.dropout, tcfg.dropout_input, tcfg.dropout_embedding, &dropout_rng};
  AdamState adam;
  Metrics& metrics = result.metrics;
  double best_val = -1.0;
  std::size_t since_best = 0;
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t e = 0; e < tcfg.epochs; ++e) {
    auto fw = record_forward(ds.features, model, ops, dropout);
    const auto loss_var = fw.tape.softmax_cross_entropy(fw.logits, ds.labels, train_rows);
    const double loss = fw.tape.value(loss_var)(0, 0);
    if (!std::isfinite(loss))
      throw DivergenceError("train: loss became " + std::to_string(loss) + " at epoch " + std::to_string(e) +
                            " (try a smaller lr or alpha)");
    const auto grads = fw.tape.backward(loss_var);
    const auto params = model.parameters();
    if (tcfg.optimizer == Optimizer::adam) adam_step(params, grads, adam, tcfg);
    else sgd_step(params, grads, tcfg);

    const DenseMat logits = forward(ds.features, model, ops).logits;
    EpochRecord rec;
    rec.epoch = e;
    rec.loss = loss;
    rec.train_acc = accuracy(logits, ds.labels, train_rows);
    rec.val_acc = detail::split_accuracy(logits, ds, val_rows);
    rec.test_acc = detail::split_accuracy(logits, ds, test_rows);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    metrics.epochs.push_back(rec);
    if (e == 0) metrics.initial_loss = loss;
    metrics.final_loss = loss;

    const double score = val_rows.empty() ? 0.0 : rec.val_acc;
    if (score > best_val || val_rows.empty()) {
      best_val = score;
      since_best = 0;
      result.best = model;
      metrics.best_epoch = e;
      metrics.best_val_acc = rec.val_acc;
      metrics.test_acc = rec.test_acc;
    } else if (tcfg.early_stop_patience > 0 && ++since_best >= tcfg.early_stop_patience) {
      metrics.stopped_early = true;
      break;
    }
  }
  metrics.last_test_acc = metrics.epochs.back().test_acc;
  metrics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  metrics.energy_trace = energy_trace(result.best, ds.features, ops);
  return result;
}

// ---------------------------------------------------------------------------
// Output files

namespace detail {

inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

inline nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json trace = nlohmann::json::array();
  for (double v : m.energy_trace) trace.push_back(detail::json_number(v));
  return {{"epochs_run", m.epochs.size()},
          {"best_epoch", m.best_epoch},
          {"best_val_acc", detail::json_number(m.best_val_acc)},
          {"test_acc", detail::json_number(m.test_acc)},
          {"last_test_acc", detail::json_number(m.last_test_acc)},
          {"initial_loss", m.initial_loss},
          {"final_loss", m.final_loss},
          {"seconds", m.seconds},
          {"stopped_early", m.stopped_early},
          {"energy_trace", trace}};
}

/// Writes metrics.json and epochs.csv into `dir`.
inline void write_metrics(const Metrics& m, const std::string& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(std::filesystem::path(dir) / "metrics.json");
    if (!out) throw Error("cannot write metrics.json in " + dir);
    out << metrics_to_json(m).dump(2) << '\n';
  }
  std::ofstream csv(std::filesystem::path(dir) / "epochs.csv");
  if (!csv) throw Error("cannot write epochs.csv in " + dir);
  csv << "epoch,loss,train_acc,val_acc,test_acc,seconds\n";
  char buf[256];
  for (const auto& r : m.epochs) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.6f\n", r.epoch, r.loss, r.train_acc, r.val_acc,
                  r.test_acc, r.seconds);
    csv << buf;
  }
}

}  // namespace phenomnn
