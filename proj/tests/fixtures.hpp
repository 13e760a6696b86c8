#pragma once

// Seeded random instances shared by the unit and acceptance tests.

#include <cstdint>
#include <string>
#include <vector>

#include "phenomnn/phenomnn.hpp"

namespace fixture {

inline phenomnn::DenseMat random_dense(std::size_t r, std::size_t c, phenomnn::Rng& rng, double sd = 1.0) {
  phenomnn::DenseMat m(r, c);
  for (auto& v : m.data) v = rng.normal(0.0, sd);
  return m;
}

inline phenomnn::DenseMat random_nonneg(std::size_t r, std::size_t c, phenomnn::Rng& rng) {
  phenomnn::DenseMat m(r, c);
  for (auto& v : m.data) v = rng.uniform();
  return m;
}

/// m edges of size 1..max_size with uniformly drawn distinct members.
inline phenomnn::Hypergraph random_hypergraph(std::size_t n, std::size_t m, std::size_t max_size, phenomnn::Rng& rng) {
  std::vector<std::vector<std::size_t>> edges;
  std::vector<std::size_t> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i] = i;
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t size = 1 + rng.below(std::min(max_size, n));
    rng.shuffle(std::span<std::size_t>(nodes));
    edges.emplace_back(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(size));
  }
  return phenomnn::Hypergraph::from_edges(n, edges);
}

/// Every edge has exactly `size` members.
inline phenomnn::Hypergraph uniform_hypergraph(std::size_t n, std::size_t m, std::size_t size, phenomnn::Rng& rng) {
  std::vector<std::vector<std::size_t>> edges;
  std::vector<std::size_t> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i] = i;
  for (std::size_t k = 0; k < m; ++k) {
    rng.shuffle(std::span<std::size_t>(nodes));
    edges.emplace_back(nodes.begin(), nodes.begin() + static_cast<std::ptrdiff_t>(size));
  }
  return phenomnn::Hypergraph::from_edges(n, edges);
}

/// Union of `rounds` random partitions of the node set into blocks of
/// `block` nodes (n divisible by block): every node has degree `rounds`.
inline phenomnn::Hypergraph node_regular_hypergraph(std::size_t n, std::size_t block, std::size_t rounds,
                                                    phenomnn::Rng& rng) {
  std::vector<std::vector<std::size_t>> edges;
  std::vector<std::size_t> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i] = i;
  for (std::size_t r = 0; r < rounds; ++r) {
    rng.shuffle(std::span<std::size_t>(nodes));
    for (std::size_t s = 0; s < n; s += block)
      edges.emplace_back(nodes.begin() + static_cast<std::ptrdiff_t>(s),
                         nodes.begin() + static_cast<std::ptrdiff_t>(s + block));
  }
  return phenomnn::Hypergraph::from_edges(n, edges);
}

inline phenomnn::DenseMat perturbed_identity(std::size_t d, double sd, phenomnn::Rng& rng) {
  phenomnn::DenseMat h = phenomnn::DenseMat::identity(d);
  for (auto& v : h.data) v += rng.normal(0.0, sd);
  return h;
}

/// Descent instance: n in [20,200], m in [5,100], d in [1,16], edge sizes
/// 1..6, lambdas in [0,5], F ~ N(0,1).
struct DescentInstance {
  phenomnn::Hypergraph h;
  phenomnn::ExpansionOperators ops;
  phenomnn::DenseMat fx;
  phenomnn::EnergyParams params;
};

inline DescentInstance descent_instance(std::uint64_t seed, double h_noise) {
  phenomnn::Rng rng(seed);
  const std::size_t n = 20 + rng.below(181), m = 5 + rng.below(96), d = 1 + rng.below(16);
  const double l0 = rng.uniform(0.0, 5.0), l1 = rng.uniform(0.0, 5.0);
  DescentInstance inst{random_hypergraph(n, m, 6, rng), {}, {}, {}};
  inst.ops = phenomnn::build_operators(inst.h, l0, l1);
  inst.fx = random_dense(n, d, rng);
  inst.params = phenomnn::EnergyParams::identity(d, l0, l1);
  inst.params.h0 = perturbed_identity(d, h_noise, rng);
  inst.params.h1 = perturbed_identity(d, h_noise, rng);
  return inst;
}

#ifdef PHENOMNN_TEST_DATA
inline std::string data_dir(const std::string& name) { return std::string(PHENOMNN_TEST_DATA) + "/" + name; }
#endif

}  // namespace fixture

namespace fixture {

/// Small labeled problem and a model sitting at a generic point (nonzero
/// biases, H away from identity) for finite-difference checks.
struct GradientSetup {
  phenomnn::Dataset ds;
  phenomnn::Model model;
};

inline GradientSetup gradient_setup(std::uint64_t seed, phenomnn::Variant variant) {
  phenomnn::SyntheticSpec spec;
  spec.nodes_per_community = 6;
  spec.edges = 8;
  spec.feature_dim = 4;
  spec.p_in = 0.7;
  spec.noise_std = 1.0;
  spec.seed = seed;
  auto ds = phenomnn::generate_synthetic(spec);
  phenomnn::ModelConfig cfg;
  cfg.variant = variant;
  cfg.hidden = 3;
  cfg.layers = 3;
  cfg.alpha = 0.2;
  cfg.lambda0 = 0.7;
  cfg.lambda1 = 1.3;
  cfg.mlp_layers = 2;
  phenomnn::Rng rng(seed + 1000);
  auto model = phenomnn::Model::init(cfg, ds.features.cols, ds.class_count, rng);
  for (auto& v : model.params.h0.data) v += rng.normal(0.0, 0.2);
  for (auto& v : model.params.h1.data) v += rng.normal(0.0, 0.2);
  for (auto& l : model.params.base.layers)
    for (auto& v : l.bias.data) v = rng.normal(0.0, 0.1);
  for (auto& v : model.params.head.linear.bias.data) v = rng.normal(0.0, 0.1);
  return {std::move(ds), std::move(model)};
}

}  // namespace fixture
