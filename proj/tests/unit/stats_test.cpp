#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>

#include <fixctx/stats/stats.hpp>

#include "support/dunn_oracle.hpp"

using namespace fixctx;
using namespace fixctx::stats;

namespace {

using oracle::brute_dunn;

std::vector<double> draw(std::mt19937_64& rng, std::size_t n, bool ties)
{
    std::vector<double> v(n);
    std::normal_distribution<double> g(0, 1);
    std::uniform_int_distribution<int> u(0, 6);
    for (auto& x : v) x = ties ? u(rng) : g(rng);
    return v;
}

} // namespace

TEST(Dunn, ConstantGroupsHaveZeroVariance)
{
    auto r = dunn_test({3, 3}, {3, 3, 3});
    EXPECT_TRUE(r.zero_variance);
    EXPECT_EQ(r.z, 0.0);
    EXPECT_EQ(r.p, 1.0);
    EXPECT_FALSE(r.relevant);
    EXPECT_THROW(dunn_test({}, {1.0}), Error);
}

TEST(Dunn, SeparatedGroupsMatchOracle)
{
    auto r = dunn_test({10, 11, 12}, {1, 2, 3, 4, 5});
    auto o = brute_dunn({10, 11, 12}, {1, 2, 3, 4, 5});
    EXPECT_NEAR(r.z, o.z, 1e-9);
    EXPECT_NEAR(r.p, o.p, 1e-9);
    // Ranks 6..8 vs 1..5: (7 - 3) / sqrt(6 * (1/3 + 1/5)).
    EXPECT_NEAR(r.z, 4.0 / std::sqrt(6.0 * (1.0 / 3 + 1.0 / 5)), 1e-12);
    EXPECT_TRUE(r.relevant);
}

TEST(Dunn, RandomUnevenGroupsMatchOracle)
{
    std::mt19937_64 rng(1);
    for (int iter = 0; iter < 300; ++iter) {
        bool ties = iter % 2 == 0;
        auto a = draw(rng, 1 + rng() % 12, ties);
        auto b = draw(rng, 1 + rng() % 60, ties);
        auto r = dunn_test(a, b);
        if (r.zero_variance) continue;
        auto o = brute_dunn(a, b);
        EXPECT_NEAR(r.z, o.z, 1e-9);
        EXPECT_NEAR(r.p, o.p, 1e-9);
        EXPECT_EQ(r.relevant, r.p < 0.05);
        EXPECT_GE(r.p, 0.0);
        EXPECT_LE(r.p, 1.0);
    }
}

TEST(Dunn, NoTiesReducesToUntiedFormula)
{
    std::mt19937_64 rng(2);
    for (int iter = 0; iter < 50; ++iter) {
        auto a = draw(rng, 5, false), b = draw(rng, 17, false);
        EXPECT_NEAR(dunn_test(a, b).z, brute_dunn(a, b, false).z, 1e-12);
    }
}

TEST(Dunn, RankInvarianceAndSymmetry)
{
    std::mt19937_64 rng(3);
    for (int iter = 0; iter < 100; ++iter) {
        auto a = draw(rng, 2 + rng() % 10, iter % 2);
        auto b = draw(rng, 2 + rng() % 30, iter % 2);
        auto r = dunn_test(a, b);
        auto f = [](double x) { return std::exp(x) * 3 + x * x * x; };  // strictly increasing
        std::vector<double> fa, fb;
        for (double x : a) fa.push_back(f(x));
        for (double x : b) fb.push_back(f(x));
        EXPECT_NEAR(dunn_test(fa, fb).z, r.z, 1e-12);
        auto s = dunn_test(b, a);
        EXPECT_NEAR(s.z, -r.z, 1e-12);
        EXPECT_NEAR(s.p, r.p, 1e-12);
    }
}

TEST(Dunn, NullCalibration)
{
    std::mt19937_64 rng(4);
    int hits = 0;
    const int sims = 1000;
    for (int s = 0; s < sims; ++s) hits += dunn_test(draw(rng, 25, false), draw(rng, 300, false)).relevant;
    double rate = static_cast<double>(hits) / sims;
    double se = std::sqrt(0.05 * 0.95 / sims);
    EXPECT_NEAR(rate, 0.05, 2 * se);
}

TEST(Dunn, TwoSidedTail)
{
    EXPECT_NEAR(two_sided_p(1.959963984540054), 0.05, 1e-12);
    EXPECT_EQ(two_sided_p(0), 1.0);
    boost::math::normal_distribution<double> nd;
    for (double z : {0.1, 0.5, 1.0, 2.5, 4.0, 7.5}) {
        EXPECT_NEAR(two_sided_p(z), 2 * boost::math::cdf(boost::math::complement(nd, z)), 1e-15);
        EXPECT_EQ(two_sided_p(-z), two_sided_p(z));
    }
}

TEST(Summary, Values)
{
    auto s = summary_stats({5, 5, 5});
    EXPECT_EQ(s.mean, 5.0);
    EXPECT_EQ(s.cv, 0.0);
    EXPECT_TRUE(s.cv_defined);
    auto z = summary_stats({0, 0});
    EXPECT_EQ(z.mean, 0.0);
    EXPECT_FALSE(z.cv_defined);
    auto q = summary_stats({4, 1, 3, 2});
    EXPECT_EQ(q.quantiles[2], 2.5);
    EXPECT_EQ(q.quantiles[1], 1.75);
    EXPECT_NEAR(q.quantiles[0], 1.15, 1e-12);
    EXPECT_NEAR(q.quantiles[4], 3.85, 1e-12);
    EXPECT_NEAR(q.cv, std::sqrt(1.25) / 2.5, 1e-15);
    EXPECT_THROW(summary_stats({}), Error);
}

namespace {

ContextDataset dataset(std::size_t n, std::mt19937_64& rng)
{
    ContextDataset d;
    std::uniform_int_distribution<int> body(2, 14), mod(5, 40);
    for (std::size_t i = 0; i < n; ++i) d.rows.push_back("h" + std::to_string(i));
    auto& fb = d.columns["ctx_FunctionDef_body_size"];
    auto& ms = d.columns["ctx_Module_size"];
    auto& call = d.columns["ctx_inner_add_Call_count"];
    for (std::size_t i = 0; i < n; ++i) {
        fb.push_back(body(rng));
        ms.push_back(mod(rng));
        call.push_back(static_cast<double>(rng() % 3));
    }
    return d;
}

cluster::ClusterAssignment assignment(std::size_t n, std::vector<std::vector<std::size_t>> groups)
{
    cluster::ClusterAssignment a;
    for (std::size_t i = 0; i < n; ++i) a.rows.push_back("h" + std::to_string(i));
    a.cluster_of.assign(n, cluster::kUnclustered);
    std::size_t id = 1;
    for (auto& g : groups) {
        for (auto r : g) a.cluster_of[r] = id;
        a.clusters[id++] = g;
    }
    return a;
}

} // namespace

TEST(Relevance, LargeFunctionsMakeFunctionSizeRelevant)
{
    std::mt19937_64 rng(5);
    auto d = dataset(200, rng);
    std::vector<std::size_t> big, other;
    for (std::size_t i = 0; i < 20; ++i) {
        big.push_back(i);
        d.columns["ctx_FunctionDef_body_size"][i] = 50;
    }
    for (std::size_t i = 20; i < 40; ++i) other.push_back(i);
    auto a = assignment(200, {big, other});
    using cluster::TriageLabel;
    auto m = relevance_matrix(a, d, {{1, TriageLabel::BugFix}, {2, TriageLabel::Refactoring}});
    ASSERT_EQ(m.clusters, (std::vector<std::size_t>{1}));
    const auto& cell = m.cells[static_cast<std::size_t>(features::Category::FunctionSize)][0];
    EXPECT_TRUE(cell.relevant);
    EXPECT_EQ(cell.relevant_features, (std::vector<std::string>{"ctx_FunctionDef_body_size"}));
    EXPECT_EQ(cell.lead_summary.mean, 50.0);
    ASSERT_EQ(m.tests.size(), 3u);
    // Category cells are the OR of their features.
    for (std::size_t k = 0; k < features::kCategoryCount; ++k) {
        bool any = false;
        for (const auto& t : m.tests) any |= t.dunn.relevant && static_cast<std::size_t>(t.category) == k;
        EXPECT_EQ(m.cells[k][0].relevant, any);
    }
    auto csv = relevance_csv(m);
    EXPECT_NE(csv.find("Function Size,1"), std::string::npos);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 18);
}

TEST(Relevance, WholeDatasetClusterHasNothingRelevant)
{
    std::mt19937_64 rng(6);
    auto d = dataset(50, rng);
    std::vector<std::size_t> all(50);
    std::iota(all.begin(), all.end(), 0);
    for (auto mode : {ControlGroup::ExcludeCluster, ControlGroup::WholeDataset}) {
        RelevanceConfig cfg;
        cfg.control = mode;
        auto m = relevance_matrix(assignment(50, {all}), d, {{1, cluster::TriageLabel::BugFix}}, cfg);
        for (const auto& t : m.tests) EXPECT_FALSE(t.dunn.relevant) << t.dunn.feature;
    }
}

TEST(Relevance, SharedRankingMatchesDirectTest)
{
    std::mt19937_64 rng(7);
    auto d = dataset(120, rng);
    std::vector<std::size_t> g1, g2;
    for (std::size_t i = 0; i < 120; ++i) (rng() % 4 == 0 ? g1 : g2).push_back(i);
    auto a = assignment(120, {g1, g2});
    auto m = relevance_matrix(a, d, {{1, cluster::TriageLabel::BugFix}, {2, cluster::TriageLabel::BugFix}});
    ASSERT_EQ(m.tests.size(), 6u);
    for (const auto& t : m.tests) {
        const auto& members = a.clusters.at(t.cluster);
        std::vector<double> mine, rest;
        std::vector<char> in(120, 0);
        for (auto r : members) in[r] = 1;
        const auto& col = d.columns.at(t.dunn.feature);
        for (std::size_t r = 0; r < 120; ++r) (in[r] ? mine : rest).push_back(col[r]);
        auto direct = dunn_test(mine, rest);
        EXPECT_NEAR(t.dunn.z, direct.z, 1e-12);
        EXPECT_NEAR(t.dunn.p, direct.p, 1e-12);
    }
}

TEST(Relevance, BonferroniTightensAlpha)
{
    std::mt19937_64 rng(8);
    auto d = dataset(60, rng);
    RelevanceConfig cfg;
    cfg.bonferroni = true;
    auto m = relevance_matrix(assignment(60, {{0, 1, 2, 3, 4}}), d, {{1, cluster::TriageLabel::BugFix}}, cfg);
    EXPECT_NEAR(m.effective_alpha, 0.05 / 3, 1e-15);
    for (const auto& t : m.tests) EXPECT_EQ(t.dunn.relevant, t.dunn.p < m.effective_alpha);
    auto long_csv = relevance_long_csv(m);
    EXPECT_EQ(long_csv.substr(0, long_csv.find('\n')), "cluster,feature,category,z,p,relevant,mean,cv,q05,q25,q50,q75,q95");
}

TEST(Relevance, DatasetFromContextVectors)
{
    features::ContextVector a, b;
    a.hunk_id = "x";
    a.scoped.module_size = 3;
    a.inner["ctx_inner_add_Call_count"] = 2;
    b.hunk_id = "y";
    b.ancestor.including = grammar::NodeKind::If;
    auto d = ContextDataset::from_vectors({a, b});
    EXPECT_EQ(d.rows, (std::vector<std::string>{"x", "y"}));
    EXPECT_EQ(d.columns.at("ctx_inner_add_Call_count"), (std::vector<double>{2, 0}));
    EXPECT_EQ(d.columns.at("ctx_including_If"), (std::vector<double>{0, 1}));
    EXPECT_EQ(d.columns.at("ctx_Module_size"), (std::vector<double>{3, 0}));
}
