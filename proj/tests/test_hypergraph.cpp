#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "phenomnn/hypergraph.hpp"

using namespace phenomnn;

namespace {

Hypergraph toy() { return Hypergraph::from_edges(3, {{0, 1}, {1, 2}}); }

Hypergraph parse(const std::string& text) {
  std::istringstream in(text);
  return load_hypergraph(in);
}

std::string load_error(const std::string& text) {
  try {
    parse(text);
  } catch (const LoadError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(LoadHypergraph, ReadsHeaderAndEdges) {
  const auto h = parse("3 2\n0 1\n1 2\n");
  EXPECT_EQ(h.n, 3u);
  EXPECT_EQ(h.m, 2u);
  EXPECT_EQ(h.edges[0], (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(h.edges[1], (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(h.incidence.to_dense(), DenseMat::from_rows({{1, 0}, {1, 1}, {0, 1}}));
  EXPECT_EQ(h.edge_sizes, (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(h.node_degrees, (std::vector<std::size_t>{1, 2, 1}));
}

TEST(LoadHypergraph, OutOfRangeIdNamesTheLine) {
  const auto msg = load_error("3 2\n0 1\n5\n");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("range"), std::string::npos) << msg;
}

TEST(LoadHypergraph, EmptyEdgeNamesTheLine) {
  const auto msg = load_error("3 2\n0 1\n\n");
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
  EXPECT_NE(msg.find("empty"), std::string::npos) << msg;
}

TEST(LoadHypergraph, MalformedTokensAreRejected) {
  EXPECT_NE(load_error("3 2\n0 x\n1 2\n").find("line 2"), std::string::npos);
  EXPECT_NE(load_error("three 2\n").find("line 1"), std::string::npos);
  EXPECT_FALSE(load_error("3 2\n0 1\n").empty());
  EXPECT_FALSE(load_error("3 1\n-1 2\n").empty());
}

TEST(LoadHypergraph, DuplicateIdsAreCollapsedAndCounted) {
  const auto h = parse("3 1\n0 0 2\n");
  EXPECT_EQ(h.edges[0], (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(h.duplicates_collapsed, 1u);
}

TEST(LoadHypergraph, SaveRoundTrip) {
  Rng rng(1);
  const auto h = fixture::random_hypergraph(12, 7, 5, rng);
  std::ostringstream os;
  save_hypergraph(os, h);
  const auto back = parse(os.str());
  EXPECT_EQ(back.edges, h.edges);
  EXPECT_EQ(back.n, h.n);
}

TEST(BuildClique, TwoEdgeToy) {
  const auto c = build_clique(toy());
  EXPECT_EQ(c.adjacency.to_dense(), DenseMat::from_rows({{1, 1, 0}, {1, 2, 1}, {0, 1, 1}}));
  EXPECT_EQ(c.degree.diagonal, (std::vector<double>{2, 4, 2}));
}

TEST(BuildClique, SingleNodeEdge) {
  const auto c = build_clique(Hypergraph::from_edges(1, {{0}}));
  EXPECT_EQ(c.adjacency.to_dense(), DenseMat::from_rows({{1}}));
  EXPECT_EQ(c.degree.diagonal, (std::vector<double>{1}));
}

TEST(BuildClique, DisjointEdgesAreBlockDiagonal) {
  const auto h = Hypergraph::from_edges(4, {{0, 1}, {2, 3}});
  const auto expect = oracle::clique(oracle::incidence(4, h.edges));
  EXPECT_EQ(oracle::from(build_clique(h).adjacency.to_dense()), expect);
  EXPECT_EQ(expect[0][2], 0.0);
  EXPECT_EQ(expect[1][3], 0.0);
}

TEST(BuildStarNormalized, TwoEdgeToy) {
  const auto s = build_star_normalized(toy());
  EXPECT_EQ(s.adjacency.to_dense(), scale(DenseMat::from_rows({{1, 1, 0}, {1, 2, 1}, {0, 1, 1}}), 0.5));
  EXPECT_EQ(s.degree.diagonal, (std::vector<double>{1, 2, 1}));
}

TEST(BuildStarNormalized, SingleNodeEdge) {
  EXPECT_EQ(build_star_normalized(Hypergraph::from_edges(1, {{0}})).adjacency.to_dense(), DenseMat::from_rows({{1}}));
}

TEST(BuildStarNormalized, UniformHypergraphIsScaledClique) {
  Rng rng(2);
  for (std::size_t me = 1; me <= 5; ++me) {
    const auto h = fixture::uniform_hypergraph(10, 8, me, rng);
    const auto s = build_star_normalized(h).adjacency.to_dense();
    const auto c = build_clique(h).adjacency.to_dense();
    EXPECT_LE(max_abs_diff(s, scale(c, 1.0 / static_cast<double>(me))), 1e-15);
  }
}

TEST(BuildStarBipartite, SingleEdgeBlocks) {
  const auto s = build_star_bipartite(Hypergraph::from_edges(2, {{0, 1}}));
  EXPECT_EQ(s.adjacency.to_dense(), DenseMat::from_rows({{0, 0, 1}, {0, 0, 1}, {1, 1, 0}}));
  EXPECT_EQ(s.degree.diagonal, (std::vector<double>{1, 1, 2}));
}

TEST(UniformEdgeSize, Examples) {
  EXPECT_EQ(uniform_edge_size(toy()), 2u);
  EXPECT_EQ(uniform_edge_size(Hypergraph::from_edges(3, {{0, 1}, {0, 1, 2}})), std::nullopt);
  EXPECT_EQ(uniform_edge_size(Hypergraph::from_edges(3, {{0, 1, 2}})), 3u);
}

TEST(Preconditioner, ToyExamples) {
  const auto h = toy();
  EXPECT_EQ(build_operators(h, 0, 0).precond.diagonal, (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(build_operators(h, 1, 0).precond.diagonal, (std::vector<double>{3, 5, 3}));
  EXPECT_EQ(build_operators(h, 0, 1).precond.diagonal, (std::vector<double>{2, 3, 2}));
}

TEST(Preconditioner, IsolatedNodeEntryIsOne) {
  const auto ops = build_operators(Hypergraph::from_edges(3, {{0, 1}}), 2.0, 3.0);
  EXPECT_EQ(ops.clique_deg[2], 0.0);
  EXPECT_EQ(ops.star_deg[2], 0.0);
  EXPECT_EQ(ops.precond[2], 1.0);
}

TEST(ExpansionProperties, SparsePathsMatchDenseOraclesOnRandomHypergraphs) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(30), m = 1 + rng.below(30);
    const auto h = fixture::random_hypergraph(n, m, 8, rng);
    const double l0 = rng.uniform(0, 3), l1 = rng.uniform(0, 3);
    const auto ops = build_operators(h, l0, l1);
    const auto b = oracle::incidence(n, h.edges);
    const auto ac = oracle::clique(b), as = oracle::star_normalized(b);
    EXPECT_LE(oracle::max_abs_diff(oracle::from(ops.clique_adj.to_dense()), ac), 1e-12);
    EXPECT_LE(oracle::max_abs_diff(oracle::from(ops.star_adj.to_dense()), as), 1e-12);
    EXPECT_TRUE(is_structurally_symmetric(ops.clique_adj));
    EXPECT_TRUE(is_structurally_symmetric(ops.star_adj));
    const auto dc = oracle::row_sums(ac), ds = oracle::row_sums(as);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_NEAR(ops.clique_deg[i], dc[i], 1e-12);
      EXPECT_NEAR(ops.star_deg[i], ds[i], 1e-12);
      EXPECT_EQ(ops.star_deg[i], static_cast<double>(h.node_degrees[i]));
      EXPECT_EQ(ops.precond[i], l0 * ops.clique_deg[i] + l1 * ops.star_deg[i] + 1.0);
    }
  }
}

TEST(ExpansionProperties, UniformLaplacianCollapse) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t me = 1 + rng.below(5);
    const auto h = fixture::uniform_hypergraph(5 + rng.below(26), 1 + rng.below(30), me, rng);
    ASSERT_EQ(uniform_edge_size(h), me);
    const auto ops = build_operators(h, 1, 1);
    const auto lc = diag_minus(ops.clique_deg, ops.clique_adj).to_dense();
    const auto ls = diag_minus(ops.star_deg, ops.star_adj).to_dense();
    EXPECT_LE(frobenius_norm(sub(ls, scale(lc, 1.0 / static_cast<double>(me)))), 1e-12);
  }
}

TEST(Hypergraph, EmptyEdgeThrows) {
  EXPECT_THROW(Hypergraph::from_edges(2, {{0}, {}}), LoadError);
}
