#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "phenomnn/data.hpp"
#include "phenomnn/energy.hpp"
#include "phenomnn/model.hpp"

namespace phenomnn {

struct ParameterCheck {
  std::string name;
  std::size_t rows = 0, cols = 0;
  GradCheckResult result;
};

struct GradientReport {
  std::vector<ParameterCheck> parameters;
  double threshold = 1e-4;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& p : parameters) m = std::max(m, p.result.max_rel_error);
    return m;
  }
  bool passed() const { return max_rel_error() <= threshold; }
};

/// Training loss without dropout: mean cross-entropy over the train split,
/// or over every labeled node when the train split is empty.
inline double training_loss(Model& model, const Dataset& ds, const ExpansionOperators& ops) {
  auto rows = ds.indices(Split::train);
  if (rows.empty())
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
      if (ds.labels[i] >= 0) rows.push_back(i);
  auto fw = record_forward(ds.features, model, ops);
  return fw.tape.value(fw.tape.softmax_cross_entropy(fw.logits, ds.labels, rows))(0, 0);
}

/// Compares the tape gradients of training_loss with central differences on
/// up to `samples` coordinates of every parameter.
inline GradientReport check_gradients(const Model& model_in, const Dataset& ds, std::size_t samples = 256,
                                      double step = 1e-5, std::uint64_t seed = 1) {
  Model model = model_in;
  const auto ops = build_operators(ds.hypergraph, model.config.lambda0, model.config.lambda1);
  auto rows = ds.indices(Split::train);
  if (rows.empty())
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
      if (ds.labels[i] >= 0) rows.push_back(i);
  auto fw = record_forward(ds.features, model, ops);
  const auto grads = fw.tape.backward(fw.tape.softmax_cross_entropy(fw.logits, ds.labels, rows));

  GradientReport report;
  const auto names = model.parameter_names();
  auto params = model.parameters();
  for (std::size_t s = 0; s < params.size(); ++s) {
    DenseMat* slot = params[s];
    const DenseMat base = *slot;
    auto f = [&](const DenseMat& probe) {
      *slot = probe;
      return training_loss(model, ds, ops);
    };
    ParameterCheck pc{names[s], base.rows, base.cols, central_difference_check(f, base, grads[s], samples, step, seed + s)};
    *slot = base;
    report.parameters.push_back(pc);
  }
  return report;
}

inline nlohmann::json to_json(const GradientReport& r) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& p : r.parameters)
    params.push_back({{"name", p.name},
                      {"rows", p.rows},
                      {"cols", p.cols},
                      {"coordinates", p.result.coordinates},
                      {"max_rel_error", p.result.max_rel_error},
                      {"max_abs_error", p.result.max_abs_error}});
  return {{"threshold", r.threshold}, {"max_rel_error", r.max_rel_error()}, {"passed", r.passed()}, {"parameters", params}};
}

}  // namespace phenomnn
