#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "phenomnn/linalg.hpp"

namespace phenomnn {

class LoadError : public Error {
public:
  using Error::Error;
};

/// Hypergraph with binary incidence B (n x m). Node ids inside each edge are
/// sorted and unique.
struct Hypergraph {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<std::vector<std::size_t>> edges;
  SparseMat incidence;
  std::vector<std::size_t> edge_sizes;
  std::vector<std::size_t> node_degrees;
  /// Repeated node ids dropped while building (B is binary).
  std::size_t duplicates_collapsed = 0;

  static Hypergraph from_edges(std::size_t node_count, std::vector<std::vector<std::size_t>> edge_list) {
    Hypergraph h;
    h.n = node_count;
    h.m = edge_list.size();
    h.node_degrees.assign(node_count, 0);
    std::vector<Triplet> t;
    for (std::size_t k = 0; k < edge_list.size(); ++k) {
      auto& e = edge_list[k];
      if (e.empty()) throw LoadError("hyperedge " + std::to_string(k) + " is empty");
      std::sort(e.begin(), e.end());
      const auto before = e.size();
      e.erase(std::unique(e.begin(), e.end()), e.end());
      h.duplicates_collapsed += before - e.size();
      for (auto i : e) {
        if (i >= node_count)
          throw LoadError("hyperedge " + std::to_string(k) + ": node id " + std::to_string(i) +
                          " out of range (n=" + std::to_string(node_count) + ")");
        ++h.node_degrees[i];
        t.push_back({i, k, 1.0});
      }
      h.edge_sizes.push_back(e.size());
    }
    h.incidence = SparseMat::from_triplets(node_count, h.m, std::move(t));
    h.edges = std::move(edge_list);
    return h;
  }

  /// Edges containing each node, in edge order.
  std::vector<std::vector<std::size_t>> node_edges() const {
    std::vector<std::vector<std::size_t>> out(n);
    for (std::size_t k = 0; k < m; ++k)
      for (auto i : edges[k]) out[i].push_back(k);
    return out;
  }
};

/// Parses the text format: first non-comment line `n m`, then exactly m
/// lines of 0-based node ids. Lines starting with `#` are comments.
inline Hypergraph load_hypergraph(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto fail = [&](const std::string& what) -> LoadError {
    return LoadError("hypergraph line " + std::to_string(lineno) + ": " + what);
  };
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first != std::string::npos && line[first] == '#') continue;
      return true;
    }
    return false;
  };

  if (!next_line()) throw LoadError("hypergraph: missing header line");
  std::size_t n = 0, m = 0;
  {
    std::istringstream hs(line);
    std::string extra;
    if (!(hs >> n >> m) || (hs >> extra)) throw fail("expected header `n m`");
  }
  std::vector<std::vector<std::size_t>> edges;
  edges.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    if (!next_line()) throw fail("expected " + std::to_string(m) + " hyperedge lines, got " + std::to_string(k));
    std::istringstream ls(line);
    std::vector<std::size_t> e;
    std::string tok;
    while (ls >> tok) {
      std::size_t pos = 0;
      long long id = 0;
      try {
        id = std::stoll(tok, &pos);
      } catch (const std::exception&) {
        throw fail("malformed node id '" + tok + "'");
      }
      if (pos != tok.size()) throw fail("malformed node id '" + tok + "'");
      if (id < 0 || static_cast<std::size_t>(id) >= n)
        throw fail("node id " + tok + " out of range (n=" + std::to_string(n) + ")");
      e.push_back(static_cast<std::size_t>(id));
    }
    if (e.empty()) throw fail("empty hyperedge");
    edges.push_back(std::move(e));
  }
  while (next_line())
    if (line.find_first_not_of(" \t") != std::string::npos) throw fail("unexpected content after last hyperedge");
  return Hypergraph::from_edges(n, std::move(edges));
}

inline Hypergraph load_hypergraph_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open hypergraph file " + path);
  return load_hypergraph(in);
}

inline void save_hypergraph(std::ostream& os, const Hypergraph& h) {
  os << h.n << ' ' << h.m << '\n';
  for (const auto& e : h.edges) {
    for (std::size_t j = 0; j < e.size(); ++j) os << (j ? " " : "") << e[j];
    os << '\n';
  }
}

struct Expansion {
  SparseMat adjacency;
  DiagMat degree;
};

namespace detail {

/// B * diag(weight) * B^T accumulated row by row.
inline SparseMat weighted_cooccurrence(const Hypergraph& h, const std::vector<double>& edge_weight) {
  const auto incident = h.node_edges();
  SparseMat out(h.n, h.n);
  std::vector<double> acc(h.n, 0.0);
  std::vector<char> seen(h.n, 0);
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < h.n; ++i) {
    touched.clear();
    for (auto k : incident[i]) {
      for (auto j : h.edges[k]) {
        if (!seen[j]) {
          seen[j] = 1;
          touched.push_back(j);
        }
        acc[j] += edge_weight[k];
      }
    }
    std::sort(touched.begin(), touched.end());
    for (auto j : touched) {
      out.indices.push_back(j);
      out.values.push_back(acc[j]);
      acc[j] = 0.0;
      seen[j] = 0;
    }
    out.offsets[i + 1] = out.indices.size();
  }
  return out;
}

}  // namespace detail

/// A_C = B B^T, keeping the diagonal and pair multiplicities; D_C = diag(A_C 1).
inline Expansion build_clique(const Hypergraph& h) {
  Expansion e;
  e.adjacency = detail::weighted_cooccurrence(h, std::vector<double>(h.m, 1.0));
  e.degree = DiagMat(e.adjacency.row_sums());
  return e;
}

/// A_S_bar = B D_H^{-1} B^T and its row-sum degree. Each row sums to the
/// node degree, so the degree is taken from the integer counts; summing the
/// 1/|e| weights in floating point would be off by rounding.
inline Expansion build_star_normalized(const Hypergraph& h) {
  std::vector<double> w(h.m);
  for (std::size_t k = 0; k < h.m; ++k) w[k] = 1.0 / static_cast<double>(h.edge_sizes[k]);
  Expansion e;
  e.adjacency = detail::weighted_cooccurrence(h, w);
  std::vector<double> deg(h.n);
  for (std::size_t i = 0; i < h.n; ++i) deg[i] = static_cast<double>(h.node_degrees[i]);
  e.degree = DiagMat(std::move(deg));
  return e;
}

struct StarBipartite {
  SparseMat adjacency;  ///< (n+m) x (n+m), B in the off-diagonal blocks
  DiagMat degree;
  SparseMat laplacian;
};

inline StarBipartite build_star_bipartite(const Hypergraph& h) {
  std::vector<Triplet> t;
  for (std::size_t k = 0; k < h.m; ++k) {
    for (auto i : h.edges[k]) {
      t.push_back({i, h.n + k, 1.0});
      t.push_back({h.n + k, i, 1.0});
    }
  }
  StarBipartite s;
  s.adjacency = SparseMat::from_triplets(h.n + h.m, h.n + h.m, std::move(t));
  s.degree = DiagMat(s.adjacency.row_sums());
  s.laplacian = diag_minus(s.degree, s.adjacency);
  return s;
}

inline std::optional<std::size_t> uniform_edge_size(const Hypergraph& h) {
  if (h.edge_sizes.empty()) return std::nullopt;
  for (auto s : h.edge_sizes)
    if (s != h.edge_sizes.front()) return std::nullopt;
  return h.edge_sizes.front();
}

/// Every operator the energies and layers read, for one (lambda0, lambda1).
struct ExpansionOperators {
  SparseMat incidence;   ///< B
  DiagMat edge_degree;   ///< D_H
  SparseMat clique_adj;  ///< A_C
  DiagMat clique_deg;    ///< D_C
  SparseMat star_adj;    ///< A_S_bar
  DiagMat star_deg;      ///< D_S_bar
  double lambda0 = 0.0;
  double lambda1 = 0.0;
  DiagMat precond;       ///< D_tilde = lambda0 D_C + lambda1 D_S_bar + I
  DiagMat precond_inv;
  SparseMat combined_adj;  ///< lambda0 A_C + lambda1 A_S_bar

  std::size_t n() const { return clique_deg.size(); }
};

/// D_tilde = lambda0 D_C + lambda1 D_S_bar + I.
inline DiagMat precondition_diag(const DiagMat& clique_deg, const DiagMat& star_deg, double lambda0,
                                 double lambda1) {
  if (lambda0 < 0.0 || lambda1 < 0.0) throw Error("precondition_diag: lambda0 and lambda1 must be >= 0");
  std::vector<double> d(clique_deg.size());
  for (std::size_t i = 0; i < d.size(); ++i)
    d[i] = lambda0 * clique_deg[i] + lambda1 * star_deg[i] + 1.0;
  return DiagMat(std::move(d));
}

inline DiagMat precondition_diag(const ExpansionOperators& ops, double lambda0, double lambda1) {
  return precondition_diag(ops.clique_deg, ops.star_deg, lambda0, lambda1);
}

inline ExpansionOperators build_operators(const Hypergraph& h, double lambda0, double lambda1) {
  ExpansionOperators ops;
  ops.incidence = h.incidence;
  std::vector<double> dh(h.m);
  for (std::size_t k = 0; k < h.m; ++k) dh[k] = static_cast<double>(h.edge_sizes[k]);
  ops.edge_degree = DiagMat(std::move(dh));
  auto clique = build_clique(h);
  auto star = build_star_normalized(h);
  ops.clique_adj = std::move(clique.adjacency);
  ops.clique_deg = std::move(clique.degree);
  ops.star_adj = std::move(star.adjacency);
  ops.star_deg = std::move(star.degree);
  ops.lambda0 = lambda0;
  ops.lambda1 = lambda1;
  ops.precond = precondition_diag(ops, lambda0, lambda1);
  ops.precond_inv = ops.precond.inverse();
  ops.combined_adj = sparse_combine(lambda0, ops.clique_adj, lambda1, ops.star_adj);
  return ops;
}

}  // namespace phenomnn
