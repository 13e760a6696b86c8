#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "phenomnn/energy.hpp"

using namespace phenomnn;

namespace {

struct Small {
  Hypergraph h;
  DenseMat y, fx;
  double l0, l1;
};

Small small_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 2 + rng.below(19), m = 1 + rng.below(12), d = 1 + rng.below(4);
  Small s{fixture::random_hypergraph(n, m, 6, rng), {}, {}, rng.uniform(0.1, 3.0), rng.uniform(0.1, 3.0)};
  s.y = fixture::random_nonneg(n, d, rng);
  s.fx = fixture::random_dense(n, d, rng);
  return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

TEST(ProxNonneg, Examples) {
  EXPECT_EQ(prox_nonneg(DenseMat::from_rows({{-1, 2}, {3, -4}})), DenseMat::from_rows({{0, 2}, {3, 0}}));
  const auto pos = DenseMat::from_rows({{0, 1.5}, {2, 0.25}});
  EXPECT_EQ(prox_nonneg(pos), pos);
  EXPECT_EQ(prox_nonneg(DenseMat::from_rows({{-1, -2}})), DenseMat(1, 2));
}

TEST(ProxNonneg, BeatsRandomFeasibleCandidates) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto v = fixture::random_dense(4, 3, rng);
    const auto p = prox_nonneg(v);
    ASSERT_TRUE(is_nonnegative(p));
    const double best = 0.5 * std::pow(frobenius_norm(sub(v, p)), 2);
    for (int c = 0; c < 100; ++c) {
      const auto cand = relu(add(p, fixture::random_dense(4, 3, rng, 0.5)));
      EXPECT_LE(best, 0.5 * std::pow(frobenius_norm(sub(v, cand)), 2));
    }
  }
}

TEST(ZStar, MeanOfMembers) {
  const auto h = Hypergraph::from_edges(2, {{0, 1}});
  EXPECT_EQ(z_star(h, DenseMat::from_rows({{2, 0}, {0, 4}})), DenseMat::from_rows({{1, 2}}));
}

TEST(ZStar, SingletonEdgeCopiesRow) {
  const auto h = Hypergraph::from_edges(3, {{1}});
  const auto y = DenseMat::from_rows({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(z_star(h, y), DenseMat::from_rows({{3, 4}}));
}

TEST(ZStar, MatchesMeanLoopOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = fixture::random_hypergraph(6, 1 + rng.below(8), 6, rng);
    const auto y = fixture::random_dense(6, 3, rng);
    EXPECT_LE(oracle::max_abs_diff(oracle::from(z_star(h, y)), oracle::edge_means(h.edges, oracle::from(y))), 1e-12);
  }
}

TEST(Energy, ZeroWhenEmbeddingEqualsBaseAndNoGraphTerms) {
  Rng rng(3);
  const auto h = fixture::random_hypergraph(8, 5, 4, rng);
  const auto ops = build_operators(h, 0, 0);
  const auto y = fixture::random_nonneg(8, 3, rng);
  EXPECT_EQ(energy_simple(y, y, ops).value, 0.0);
  EXPECT_EQ(energy_general(y, y, ops, EnergyParams::identity(3, 0, 0)).value, 0.0);
}

TEST(Energy, BruteforceAllZero) {
  const auto h = Hypergraph::from_edges(3, {{0, 1}, {1, 2}});
  const auto v = energy_bruteforce(DenseMat(3, 2), DenseMat(2, 2), DenseMat(3, 2), h, EnergyParams::identity(2, 1, 1));
  EXPECT_EQ(v.value, 0.0);
  EXPECT_TRUE(v.feasible);
}

TEST(Energy, FeasibilityFlagTracksNegativeEntries) {
  const auto h = Hypergraph::from_edges(2, {{0, 1}});
  const auto ops = build_operators(h, 1, 1);
  const auto y = DenseMat::from_rows({{1}, {-1}});
  EXPECT_FALSE(energy_simple(y, y, ops).feasible);
  EXPECT_TRUE(std::isfinite(energy_simple(y, y, ops).value));
}

TEST(Energy, GeneralAtIdentityEqualsSimpleAndTraceForm) {
  Rng rng(4);
  const auto h = fixture::random_hypergraph(8, 6, 4, rng);
  const double l0 = 1.3, l1 = 0.7;
  const auto ops = build_operators(h, l0, l1);
  const auto y = fixture::random_nonneg(8, 3, rng);
  const auto fx = fixture::random_dense(8, 3, rng);
  const auto b = oracle::incidence(8, h.edges);
  const auto lc = oracle::laplacian(oracle::clique(b)), ls = oracle::laplacian(oracle::star_normalized(b));
  const double diff = std::pow(frobenius_norm(sub(y, fx)), 2);
  const double trace_form = diff + l0 * oracle::trace_form(lc, oracle::from(y)) + l1 * oracle::trace_form(ls, oracle::from(y));
  const double simple = energy_simple(y, fx, ops).value;
  const double general = energy_general(y, fx, ops, EnergyParams::identity(3, l0, l1)).value;
  EXPECT_LE(rel(simple, trace_form), 1e-10);
  EXPECT_LE(rel(general, trace_form), 1e-10);
}

TEST(Energy, OrderedPairsDoubleTheCliqueTerm) {
  Rng rng(5);
  const auto h = fixture::random_hypergraph(8, 6, 4, rng);
  const auto ops = build_operators(h, 1.3, 0.7);
  const auto y = fixture::random_nonneg(8, 3, rng);
  const auto fx = fixture::random_dense(8, 3, rng);
  auto p = EnergyParams::identity(3, 1.3, 0.7, 1.0, CliquePairs::ordered);
  const double literal = energy_bruteforce(y, z_star(h, y), fx, h, p).value;
  EXPECT_LE(rel(energy_general(y, fx, ops, p).value, literal), 1e-10);
  p.h0 = fixture::perturbed_identity(3, 0.3, rng);
  p.h1 = fixture::perturbed_identity(3, 0.3, rng);
  EXPECT_LE(rel(energy_general(y, fx, ops, p).value, energy_bruteforce(y, z_star(h, y), fx, h, p).value), 1e-10);
}

TEST(Energy, UnorderedPairsMatchHalvedBruteforce) {
  Rng rng(6);
  const auto h = fixture::random_hypergraph(9, 7, 5, rng);
  const auto ops = build_operators(h, 2.0, 0.5);
  const auto y = fixture::random_nonneg(9, 2, rng);
  const auto fx = fixture::random_dense(9, 2, rng);
  EnergyParams p{fixture::perturbed_identity(2, 0.3, rng), fixture::perturbed_identity(2, 0.3, rng), 2.0, 0.5};
  auto literal = p;
  literal.lambda0 = p.clique_weight();
  EXPECT_LE(rel(energy_general(y, fx, ops, p).value, energy_bruteforce(y, z_star(h, y), fx, h, literal).value), 1e-10);
}

TEST(Energy, TwoUniformBetaCollapse) {
  Rng rng(7);
  const auto h = fixture::uniform_hypergraph(10, 8, 2, rng);
  const double l0 = 1.0, l1 = 2.0;
  const auto y = fixture::random_nonneg(10, 3, rng);
  const auto p = EnergyParams::identity(3, l0, l1);
  const double graph = energy_bruteforce(y, z_star(h, y), y, h, p).value;
  const auto lc = oracle::laplacian(oracle::clique(oracle::incidence(10, h.edges)));
  EXPECT_LE(rel(graph, 3.0 * oracle::trace_form(lc, oracle::from(y))), 1e-10);
}

TEST(EnergyProperties, SummationTraceEquivalences) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    auto s = small_instance(100 + seed);
    const std::size_t d = s.y.cols;
    const auto b = oracle::incidence(s.h.n, s.h.edges);
    const auto lc = oracle::laplacian(oracle::clique(b)), ls = oracle::laplacian(oracle::star_normalized(b));
    const auto z = z_star(s.h, s.y);
    const double term_a = energy_bruteforce(s.y, z, s.y, s.h, EnergyParams::identity(d, 1, 0)).value;
    const double term_b = energy_bruteforce(s.y, z, s.y, s.h, EnergyParams::identity(d, 0, 1)).value;
    EXPECT_LE(rel(term_a, 2.0 * oracle::trace_form(lc, oracle::from(s.y))), 1e-10) << seed;
    EXPECT_LE(rel(term_b, oracle::trace_form(ls, oracle::from(s.y))), 1e-10) << seed;

    // Bipartite star Laplacian on the stacked [Y; Z*].
    const auto star = build_star_bipartite(s.h);
    DenseMat stacked(s.h.n + s.h.m, d);
    std::copy(s.y.data.begin(), s.y.data.end(), stacked.data.begin());
    std::copy(z.data.begin(), z.data.end(), stacked.data.begin() + static_cast<std::ptrdiff_t>(s.y.data.size()));
    EXPECT_LE(rel(term_b, trace_quadratic(star.laplacian, stacked)), 1e-10) << seed;
  }
}

TEST(EnergyProperties, ZStarMinimizesOverFeasibleZ) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = small_instance(200 + seed);
    Rng rng(seed);
    const std::size_t d = s.y.cols;
    EnergyParams p{fixture::perturbed_identity(d, 0.2, rng), fixture::perturbed_identity(d, 0.2, rng), s.l0, s.l1};
    // The optimal Z for term (b) under H1 is the mean of y_i H1; z_star is
    // that mean when H1 = I, so compare at identity H1.
    p.h1 = DenseMat::identity(d);
    const double best = energy_bruteforce(s.y, z_star(s.h, s.y), s.fx, s.h, p).value;
    for (int c = 0; c < 100; ++c) {
      const auto zc = fixture::random_nonneg(s.h.m, d, rng);
      EXPECT_LE(best, energy_bruteforce(s.y, zc, s.fx, s.h, p).value + 1e-12);
    }
  }
}

TEST(Gradient, ZeroAtGlobalMinimizer) {
  Rng rng(8);
  const auto h = fixture::random_hypergraph(7, 4, 3, rng);
  const auto ops = build_operators(h, 0, 0);
  const auto y = fixture::random_nonneg(7, 2, rng);
  EXPECT_EQ(frobenius_norm(grad_simple(y, y, ops)), 0.0);
  EXPECT_EQ(frobenius_norm(grad_general(y, y, ops, EnergyParams::identity(2, 0, 0))), 0.0);
}

TEST(Gradient, GeneralAtIdentityEqualsSimple) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = small_instance(300 + seed);
    const auto ops = build_operators(s.h, s.l0, s.l1);
    const auto p = EnergyParams::identity(s.y.cols, s.l0, s.l1);
    EXPECT_LE(max_abs_diff(grad_general(s.y, s.fx, ops, p), grad_simple(s.y, s.fx, ops)), 1e-12);
  }
}

TEST(Gradient, MatchesCentralDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto s = small_instance(400 + seed);
    Rng rng(seed);
    const auto ops = build_operators(s.h, s.l0, s.l1);
    for (auto pairs : {CliquePairs::unordered, CliquePairs::ordered}) {
      EnergyParams p{fixture::perturbed_identity(s.y.cols, 0.3, rng), fixture::perturbed_identity(s.y.cols, 0.3, rng),
                     s.l0, s.l1, 1.0, pairs};
      const auto g = central_difference_check([&](const DenseMat& y) { return energy_general(y, s.fx, ops, p).value; },
                                              s.y, grad_general(s.y, s.fx, ops, p));
      EXPECT_LE(g.max_rel_error, 1e-6) << seed;
    }
    const auto g = central_difference_check([&](const DenseMat& y) { return energy_simple(y, s.fx, ops).value; }, s.y,
                                            grad_simple(s.y, s.fx, ops));
    EXPECT_LE(g.max_rel_error, 1e-6) << seed;
  }
}

TEST(Gradient, ShapeMismatchThrows) {
  const auto ops = build_operators(Hypergraph::from_edges(3, {{0, 1}}), 1, 1);
  EXPECT_THROW(grad_simple(DenseMat(3, 2), DenseMat(3, 3), ops), DimensionError);
  EXPECT_THROW(grad_general(DenseMat(3, 2), DenseMat(3, 2), ops, EnergyParams::identity(3, 1, 1)), DimensionError);
  EXPECT_THROW(energy_general(DenseMat(3, 2), DenseMat(3, 2), ops, EnergyParams::identity(2, 2, 1)), Error);
}

TEST(CentralDifference, DetectsWrongGradient) {
  const auto x = DenseMat::from_rows({{1, 2}, {3, 4}});
  auto f = [](const DenseMat& v) { return frobenius_dot(v, v); };
  EXPECT_LE(central_difference_check(f, x, scale(x, 2.0)).max_rel_error, 1e-9);
  EXPECT_GE(central_difference_check(f, x, scale(x, 2.1)).max_rel_error, 1e-2);
}
