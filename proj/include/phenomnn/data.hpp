#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "phenomnn/hypergraph.hpp"
#include "phenomnn/linalg.hpp"
#include "phenomnn/rng.hpp"

namespace phenomnn {

class MissingFileError : public LoadError {
public:
  using LoadError::LoadError;
};

class ShapeError : public LoadError {
public:
  using LoadError::LoadError;
};

class LabelError : public LoadError {
public:
  using LoadError::LoadError;
};

enum class Split { none, train, val, test };

inline std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::none: break;
  }
  return "none";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "none") return Split::none;
  throw Error("unknown split '" + s + "' (expected train|val|test|none)");
}

struct Dataset {
  Hypergraph hypergraph;
  DenseMat features;        ///< n x d_x
  std::vector<int> labels;  ///< -1 = unlabeled
  std::vector<Split> splits;
  std::size_t class_count = 0;

  std::size_t n() const { return hypergraph.n; }

  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
      if (splits[i] == s) out.push_back(i);
    return out;
  }

  /// Checks row counts and that every train node carries a label.
  void validate() const {
    const std::size_t n = hypergraph.n;
    if (features.rows != n)
      throw ShapeError("features have " + std::to_string(features.rows) + " rows, hypergraph has n=" +
                       std::to_string(n));
    if (labels.size() != n)
      throw ShapeError("labels have " + std::to_string(labels.size()) + " lines, expected n=" + std::to_string(n));
    if (splits.size() != n)
      throw ShapeError("splits have " + std::to_string(splits.size()) + " lines, expected n=" + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] < -1) throw LabelError("node " + std::to_string(i) + ": invalid label " + std::to_string(labels[i]));
      if (labels[i] >= 0 && static_cast<std::size_t>(labels[i]) >= class_count)
        throw LabelError("node " + std::to_string(i) + ": label " + std::to_string(labels[i]) + " >= class count");
      if (splits[i] == Split::train && labels[i] < 0)
        throw LabelError("node " + std::to_string(i) + " is in the train split but unlabeled");
    }
  }

  bool operator==(const Dataset& o) const {
    return hypergraph.n == o.hypergraph.n && hypergraph.edges == o.hypergraph.edges && features == o.features &&
           labels == o.labels && splits == o.splits && class_count == o.class_count;
  }
};

// ---------------------------------------------------------------------------
// Text formats

/// CSV without header, every row with the same number of columns.
inline DenseMat load_features_csv(std::istream& in) {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const std::string cell = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        throw LoadError("features line " + std::to_string(rows + 1) + ": malformed value '" + cell + "'");
      }
      if (cell.find_first_not_of(" \t", pos) != std::string::npos)
        throw LoadError("features line " + std::to_string(rows + 1) + ": malformed value '" + cell + "'");
      data.push_back(v);
      ++count;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = count;
    if (count != cols)
      throw ShapeError("features line " + std::to_string(rows + 1) + ": " + std::to_string(count) +
                       " columns, expected " + std::to_string(cols));
    ++rows;
  }
  return DenseMat(rows, cols, std::move(data));
}

inline std::vector<int> load_labels(std::istream& in) {
  std::vector<int> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    long long v = 0;
    std::string extra;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (!(ls >> v) || (ls >> extra) || v < -1 || v > 1'000'000'000)
      throw LoadError("labels line " + std::to_string(lineno) + ": expected one integer class id or -1");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

inline std::vector<Split> load_splits(std::istream& in) {
  std::vector<Split> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok, extra;
    if (!(ls >> tok)) continue;
    if (ls >> extra) throw LoadError("splits line " + std::to_string(lineno) + ": expected a single split name");
    try {
      out.push_back(parse_split(tok));
    } catch (const Error& e) {
      throw LoadError("splits line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace detail {

inline std::ifstream open_required(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw MissingFileError("missing dataset file " + p.string());
  std::ifstream in(p);
  if (!in) throw MissingFileError("cannot open dataset file " + p.string());
  return in;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads hypergraph.txt, features.csv, labels.txt and splits.txt from `dir`.
/// The class count is one more than the largest label.
inline Dataset load_dataset(const std::string& dir) {
  const std::filesystem::path root(dir);
  if (!std::filesystem::is_directory(root)) throw MissingFileError("dataset directory not found: " + dir);
  Dataset ds;
  {
    auto in = detail::open_required(root / "hypergraph.txt");
    ds.hypergraph = load_hypergraph(in);
  }
  {
    auto in = detail::open_required(root / "features.csv");
    ds.features = load_features_csv(in);
  }
  {
    auto in = detail::open_required(root / "labels.txt");
    ds.labels = load_labels(in);
  }
  {
    auto in = detail::open_required(root / "splits.txt");
    ds.splits = load_splits(in);
  }
  int mx = -1;
  for (int l : ds.labels) mx = std::max(mx, l);
  ds.class_count = static_cast<std::size_t>(mx + 1);
  ds.validate();
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& dir) {
  const std::filesystem::path root(dir);
  std::filesystem::create_directories(root);
  auto open = [&](const char* name) {
    std::ofstream out(root / name);
    if (!out) throw Error("cannot write " + (root / name).string());
    return out;
  };
  {
    auto out = open("hypergraph.txt");
    save_hypergraph(out, ds.hypergraph);
  }
  {
    auto out = open("features.csv");
    for (std::size_t i = 0; i < ds.features.rows; ++i) {
      for (std::size_t j = 0; j < ds.features.cols; ++j)
        out << (j ? "," : "") << detail::format_double(ds.features(i, j));
      out << '\n';
    }
  }
  {
    auto out = open("labels.txt");
    for (int l : ds.labels) out << l << '\n';
  }
  {
    auto out = open("splits.txt");
    for (auto s : ds.splits) out << to_string(s) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Splits

struct SplitFractions {
  double train = 0.5;
  double val = 0.25;
  double test = 0.25;
};

/// Uniformly random disjoint assignment. Train and val counts are rounded to
/// the nearest integer; when the fractions sum to one, test takes the rest.
inline std::vector<Split> make_splits(std::size_t n, SplitFractions f, std::uint64_t seed) {
  if (f.train < 0.0 || f.val < 0.0 || f.test < 0.0) throw Error("make_splits: fractions must be nonnegative");
  const double total = f.train + f.val + f.test;
  if (total > 1.0 + 1e-9) throw Error("make_splits: fractions sum to more than 1");
  const auto count = [n](double frac) { return static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))); };
  const std::size_t ntrain = count(f.train), nval = count(f.val);
  if (ntrain + nval > n) throw Error("make_splits: train and val counts exceed n");
  const std::size_t ntest = std::abs(total - 1.0) <= 1e-9 ? n - ntrain - nval : count(f.test);
  if (ntrain + nval + ntest > n) throw Error("make_splits: split counts exceed n");

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<Split> out(n, Split::none);
  for (std::size_t k = 0; k < n; ++k) {
    if (k < ntrain) out[perm[k]] = Split::train;
    else if (k < ntrain + nval) out[perm[k]] = Split::val;
    else if (k < ntrain + nval + ntest) out[perm[k]] = Split::test;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic community hypergraphs

struct SyntheticSpec {
  std::size_t communities = 2;
  std::size_t nodes_per_community = 100;
  std::size_t edges = 150;
  std::size_t min_edge_size = 2;
  std::size_t max_edge_size = 6;
  double p_in = 1.0;
  std::size_t feature_dim = 2;
  double noise_std = 0.5;
  std::uint64_t seed = 0;
  SplitFractions fractions{};

  void validate() const {
    if (communities == 0 || nodes_per_community == 0) throw Error("synthetic: 0 nodes requested");
    if (feature_dim == 0) throw Error("synthetic: feature_dim must be >= 1");
    if (min_edge_size < 1 || max_edge_size < min_edge_size) throw Error("synthetic: need 1 <= min_edge_size <= max_edge_size");
    if (!(p_in >= 0.0 && p_in <= 1.0)) throw Error("synthetic: p_in must lie in [0, 1]");
    if (!(noise_std >= 0.0)) throw Error("synthetic: noise_std must be >= 0");
  }
};

/// Node i belongs to community i / nodes_per_community. Each hyperedge draws
/// a size uniformly from [min, max]; with probability p_in its members are
/// sampled without replacement from one uniformly chosen community,
/// otherwise from all nodes (sizes are clamped to the pool). Features are the
/// one-hot mean e_(c mod feature_dim) plus N(0, noise_std^2) per entry.
inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.communities * spec.nodes_per_community;
  Rng rng(spec.seed);

  std::vector<std::size_t> pool;
  std::vector<std::vector<std::size_t>> edges;
  edges.reserve(spec.edges);
  for (std::size_t k = 0; k < spec.edges; ++k) {
    const std::size_t size = spec.min_edge_size + rng.below(spec.max_edge_size - spec.min_edge_size + 1);
    pool.clear();
    if (rng.bernoulli(spec.p_in)) {
      const std::size_t c = rng.below(spec.communities);
      for (std::size_t i = 0; i < spec.nodes_per_community; ++i) pool.push_back(c * spec.nodes_per_community + i);
    } else {
      for (std::size_t i = 0; i < n; ++i) pool.push_back(i);
    }
    const std::size_t s = std::min(size, pool.size());
    // Partial Fisher-Yates: the first s slots become a uniform sample.
    for (std::size_t j = 0; j < s; ++j) std::swap(pool[j], pool[j + rng.below(pool.size() - j)]);
    edges.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(s));
  }

  Dataset ds;
  ds.hypergraph = Hypergraph::from_edges(n, std::move(edges));
  ds.class_count = spec.communities;
  ds.features = DenseMat(n, spec.feature_dim);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = i / spec.nodes_per_community;
    ds.labels[i] = static_cast<int>(c);
    for (std::size_t j = 0; j < spec.feature_dim; ++j)
      ds.features(i, j) = (j == c % spec.feature_dim ? 1.0 : 0.0) + spec.noise_std * rng.normal();
  }
  ds.splits = make_splits(n, spec.fractions, rng.next_u64());
  ds.validate();
  return ds;
}

/// Fraction of hyperedges whose members all share one community.
inline double single_community_fraction(const Dataset& ds) {
  if (ds.hypergraph.m == 0) return 0.0;
  std::size_t count = 0;
  for (const auto& e : ds.hypergraph.edges) {
    bool same = true;
    for (auto i : e) same = same && ds.labels[i] == ds.labels[e.front()];
    count += same ? 1 : 0;
  }
  return static_cast<double>(count) / static_cast<double>(ds.hypergraph.m);
}

}  // namespace phenomnn
