#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include <fixctx/cluster/cluster.hpp>

#include "support/cluster_oracle.hpp"

using namespace fixctx;
using namespace fixctx::cluster;

namespace {

using Rows = std::vector<std::vector<std::pair<std::size_t, double>>>;

Rows dense_to_sparse(const std::vector<std::vector<double>>& pts)
{
    Rows rows;
    for (const auto& p : pts) {
        auto& r = rows.emplace_back();
        for (std::size_t k = 0; k < p.size(); ++k)
            if (p[k] != 0.0) r.emplace_back(k, p[k]);
    }
    return rows;
}

std::vector<std::vector<double>> random_points(std::mt19937_64& rng, std::size_t n, std::size_t dim, bool grid)
{
    std::uniform_real_distribution<double> u(0, 10);
    std::uniform_int_distribution<int> g(0, 3);
    std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
    for (auto& p : pts)
        for (auto& x : p) x = grid ? g(rng) : u(rng);
    return pts;
}

Dendrogram from_steps(const std::vector<oracle::Step>& s, std::size_t n)
{
    Dendrogram t;
    t.leaves = n;
    for (const auto& st : s) t.merges.push_back(Merge{st.a, st.b, st.h, 0});
    return t;
}

Dendrogram chain(std::initializer_list<double> heights)
{
    // ((0,1),2),3 ... with the given heights.
    Dendrogram t;
    t.leaves = heights.size() + 1;
    std::size_t prev = 0, k = 0;
    for (double h : heights) {
        std::size_t leaf = k + 1;
        t.merges.push_back(Merge{std::min(prev, leaf), std::max(prev, leaf), h, k + 2});
        prev = t.leaves + k++;
    }
    return t;
}

} // namespace

TEST(Distances, BasicValues)
{
    SparseEuclidean d(Rows{{}, {{0, 3.0}, {1, 4.0}}, {{0, 3.0}, {1, 4.0}}});
    EXPECT_EQ(d(0, 1), 5.0);
    EXPECT_EQ(d(1, 0), 5.0);
    EXPECT_EQ(d(1, 2), 0.0);
    auto c = materialize(d);
    EXPECT_EQ(c.values().size(), 3u);
    EXPECT_EQ(c(2, 0), 5.0);
    EXPECT_EQ(c(1, 1), 0.0);
}

TEST(Distances, SparseMatchesDenseLoop)
{
    std::mt19937_64 rng(1);
    for (int iter = 0; iter < 50; ++iter) {
        auto pts = random_points(rng, 4 + iter % 5, 12, false);
        for (auto& p : pts)
            for (auto& x : p)
                if (rng() % 3 != 0) x = 0;
        features::FeatureMatrix m;
        m.columns.resize(12);
        for (std::size_t i = 0; i < pts.size(); ++i) m.rows.push_back("r" + std::to_string(i));
        m.cells = dense_to_sparse(pts);
        auto want = oracle::euclidean(pts);
        for (unsigned threads : {1u, 3u}) {
            auto got = pairwise_distances(m, threads);
            for (std::size_t i = 0; i < pts.size(); ++i)
                for (std::size_t j = 0; j < pts.size(); ++j) EXPECT_NEAR(got(i, j), want[i][j], 1e-12 * (1 + want[i][j]));
        }
    }
}

TEST(Linkage, TwoPoints)
{
    auto t = single_linkage(SparseEuclidean(Rows{{{0, 1.0}}, {{0, 4.0}}}));
    ASSERT_EQ(t.merges.size(), 1u);
    EXPECT_EQ(t.merges[0].left, 0u);
    EXPECT_EQ(t.merges[0].right, 1u);
    EXPECT_EQ(t.merges[0].height, 3.0);
    EXPECT_EQ(t.merges[0].size, 2u);
}

TEST(Linkage, CollinearPoints)
{
    auto t = single_linkage(SparseEuclidean(Rows{{}, {{0, 1.0}}, {{0, 10.0}}}));
    ASSERT_EQ(t.merges.size(), 2u);
    EXPECT_EQ(t.merges[0].height, 1.0);
    EXPECT_EQ(t.merges[1].height, 9.0);
    EXPECT_EQ(t.merges[1].left, 2u);
    EXPECT_EQ(t.merges[1].right, 3u);
    EXPECT_EQ(t.merges[1].size, 3u);
}

TEST(Linkage, DuplicatesTieBreakBySmallestIds)
{
    // Four identical rows: (0,1)->4, (2,3)->5, (4,5)->6.
    auto t = single_linkage(SparseEuclidean(Rows(4, {{0, 1.0}})));
    ASSERT_EQ(t.merges.size(), 3u);
    EXPECT_EQ(t.merges[0].left, 0u);
    EXPECT_EQ(t.merges[0].right, 1u);
    EXPECT_EQ(t.merges[1].left, 2u);
    EXPECT_EQ(t.merges[1].right, 3u);
    EXPECT_EQ(t.merges[2].left, 4u);
    EXPECT_EQ(t.merges[2].right, 5u);
}

TEST(Linkage, MatchesBruteForceAgglomeration)
{
    std::mt19937_64 rng(2);
    for (int iter = 0; iter < 400; ++iter) {
        std::size_t n = 2 + iter % 9;
        bool grid = iter % 2 == 1;
        auto pts = random_points(rng, n, grid ? 2 : 3, grid);
        auto want = oracle::agglomerate(oracle::euclidean(pts));
        auto t = single_linkage(SparseEuclidean(dense_to_sparse(pts)));
        ASSERT_EQ(t.merges.size(), want.size());
        for (std::size_t k = 0; k < want.size(); ++k) {
            EXPECT_EQ(t.merges[k].left, want[k].a) << "iter " << iter << " merge " << k;
            EXPECT_EQ(t.merges[k].right, want[k].b) << "iter " << iter << " merge " << k;
            EXPECT_NEAR(t.merges[k].height, want[k].h, 1e-9);
            if (k > 0) EXPECT_GE(t.merges[k].height, t.merges[k - 1].height);
        }
    }
}

TEST(Linkage, CopheneticIsMinimaxPathDistance)
{
    std::mt19937_64 rng(3);
    for (int iter = 0; iter < 100; ++iter) {
        std::size_t n = 2 + iter % 9;
        auto pts = random_points(rng, n, 2, iter % 3 == 0);
        auto mm = oracle::minimax(oracle::euclidean(pts));
        auto t = single_linkage(SparseEuclidean(dense_to_sparse(pts)));
        auto coph = cophenetic_distances(t);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) EXPECT_NEAR(coph[CondensedDistances::index(n, i, j)], mm[i][j], 1e-9);
    }
}

TEST(Linkage, OnDemandAndStoredDistancesAgree)
{
    std::mt19937_64 rng(4);
    auto pts = random_points(rng, 300, 5, false);
    SparseEuclidean live(dense_to_sparse(pts));
    auto a = single_linkage(live);
    auto b = single_linkage(materialize(live));
    ASSERT_EQ(a.merges.size(), b.merges.size());
    for (std::size_t k = 0; k < a.merges.size(); ++k) {
        EXPECT_EQ(a.merges[k].left, b.merges[k].left);
        EXPECT_EQ(a.merges[k].height, b.merges[k].height);
    }
}

TEST(Cophenetic, UltrametricIsOne)
{
    // Two tight pairs far apart: distances already ultrametric.
    CondensedDistances d(4, {1, 5, 5, 5, 5, 1});
    auto t = single_linkage(d);
    auto c = cophenetic_coefficient(t, d);
    EXPECT_FALSE(c.degenerate);
    EXPECT_NEAR(c.coefficient, 1.0, 1e-12);
}

TEST(Cophenetic, AllEqualDistancesAreDegenerate)
{
    CondensedDistances d(3, {2, 2, 2});
    auto c = cophenetic_coefficient(single_linkage(d), d);
    EXPECT_TRUE(c.degenerate);
    EXPECT_TRUE(std::isnan(c.coefficient));
}

TEST(Cophenetic, MatchesBruteForcePearson)
{
    std::mt19937_64 rng(5);
    for (int iter = 0; iter < 200; ++iter) {
        std::size_t n = 3 + iter % 8;
        auto pts = random_points(rng, n, 3, false);
        auto dm = oracle::euclidean(pts);
        auto steps = oracle::agglomerate(dm);
        double want = oracle::pearson_upper(dm, oracle::cophenetic(steps, n));
        SparseEuclidean d(dense_to_sparse(pts));
        auto got = cophenetic_coefficient(single_linkage(d), d);
        ASSERT_FALSE(got.degenerate);
        EXPECT_NEAR(got.coefficient, want, 1e-9);
    }
}

TEST(Cophenetic, LargeMagnitudesStayAccurate)
{
    // Feature-scale values (1e15) with small relative spread.
    std::mt19937_64 rng(6);
    auto pts = random_points(rng, 9, 3, false);
    for (auto& p : pts)
        for (auto& x : p) x = 1e15 + x * 1e13;
    auto dm = oracle::euclidean(pts);
    double want = oracle::pearson_upper(dm, oracle::cophenetic(oracle::agglomerate(dm), pts.size()));
    SparseEuclidean d(dense_to_sparse(pts));
    EXPECT_NEAR(cophenetic_coefficient(single_linkage(d), d).coefficient, want, 1e-9);
}

TEST(Inconsistency, HandValues)
{
    auto t = chain({1.0, 2.0});
    auto rows = inconsistency(t, 2);
    EXPECT_EQ(rows[0].coefficient, 0.0);
    EXPECT_EQ(rows[0].count, 1u);
    EXPECT_EQ(rows[1].count, 2u);
    EXPECT_DOUBLE_EQ(rows[1].mean, 1.5);
    EXPECT_NEAR(rows[1].stddev, std::sqrt(0.5), 1e-15);
    EXPECT_NEAR(rows[1].coefficient, 0.5 / std::sqrt(0.5), 1e-12);
    for (double c : inconsistency_coefficients(t, 1)) EXPECT_EQ(c, 0.0);
    EXPECT_THROW(inconsistency(t, 0), Error);
}

TEST(Inconsistency, MatchesOracleAtSeveralDepths)
{
    std::mt19937_64 rng(7);
    for (int iter = 0; iter < 200; ++iter) {
        std::size_t n = 2 + iter % 9;
        auto pts = random_points(rng, n, 2, false);
        auto steps = oracle::agglomerate(oracle::euclidean(pts));
        auto t = from_steps(steps, n);
        for (int depth : {1, 2, 3, 5}) {
            auto want = oracle::inconsistency(steps, n, depth);
            auto got = inconsistency_coefficients(t, depth);
            ASSERT_EQ(got.size(), want.size());
            for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-9);
        }
    }
}

TEST(Inconsistency, EqualHeightsGiveExactlyZero)
{
    // ((0,1),(2,3)) then (4,5) with sqrt(3) everywhere: no spread, coefficient 0.
    double h = std::sqrt(3.0);
    Dendrogram t;
    t.leaves = 4;
    t.merges = {Merge{0, 1, h, 2}, Merge{2, 3, h, 2}, Merge{4, 5, h, 4}};
    auto rows = inconsistency(t, 2);
    EXPECT_EQ(rows[2].stddev, 0.0);
    EXPECT_EQ(rows[2].coefficient, 0.0);
    EXPECT_EQ(rows[2].mean, h);
}

TEST(Cutoff, LoneOutlierUsesScott)
{
    std::vector<double> c(9, 0.0);
    c.push_back(1.2);
    Histogram h;
    double cut = select_cutoff(c, &h);
    EXPECT_EQ(h.rule, BinRule::Scott);
    EXPECT_EQ(h.counts.size(), 3u);  // numpy.histogram_bin_edges(..., 'scott')
    EXPECT_NEAR(cut, 0.8, 1e-12);
    EXPECT_LE(cut, 1.2);
}

TEST(Cutoff, BimodalMatchesReferenceBinning)
{
    // Reference: numpy.histogram_bin_edges(x, 'fd') gives 21 bins, second to
    // last edge 2.491085714285714.
    std::vector<double> x = {
        0.708184, 0.0,      0.38362,  0.186446, 0.20947,  0.256881, 0.0,      0.253614, 0.126957, 0.9646,
        0.345157, 0.229474, 0.243743, 0.166391, 0.08897,  0.22184,  0.396389, 0.252289, 0.491552, 0.26004,
        0.304852, 0.609164, 0.409021, 0.198954, 0.263432, 0.408105, 0.687018, 0.246076, 0.251288, 0.500463,
        0.122708, 0.241656, 0.476508, 0.41607,  0.318303, 0.434021, 0.0,      0.504261, 0.108071, 0.0,
        0.355289, 0.440109, 0.211047, 0.084719, 0.305225, 0.289451, 0.58112,  0.449482, 0.338763, 0.522327,
        0.258895, 0.11482,  0.416812, 0.416508, 0.257034, 0.143438, 0.345831, 0.0,      0.438025, 0.398274,
        2.336114, 2.506135, 2.40359,  2.575722, 2.296583, 2.408551, 2.570958, 2.61564};
    Histogram h;
    double cut = select_cutoff(x, &h);
    EXPECT_EQ(h.rule, BinRule::FreedmanDiaconis);
    EXPECT_EQ(h.counts.size(), 21u);
    EXPECT_NEAR(cut, 2.491085714285714, 1e-12);
    EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}), x.size());
}

TEST(Cutoff, AllZeroRejected)
{
    EXPECT_THROW(select_cutoff({0.0, 0.0}), AllZero);
    EXPECT_THROW(select_cutoff({}), AllZero);
}

TEST(Cut, ThresholdExtremes)
{
    auto t = chain({1.0, 2.0, 4.0});
    auto coefs = inconsistency_coefficients(t);
    auto all = cut_clusters(t, coefs, 1e9, 1);
    EXPECT_EQ(all.clusters.size(), 1u);
    EXPECT_EQ(all.clusters.at(1).size(), 4u);
    auto none = cut_clusters(t, std::vector<double>(3, 5.0), 1.0, 2);
    EXPECT_TRUE(none.clusters.empty());
    EXPECT_EQ(none.raw_cluster_count, 4u);
    for (auto c : none.cluster_of) EXPECT_EQ(c, kUnclustered);
    EXPECT_THROW(cut_clusters(t, coefs, 0.0, 1), Error);
}

TEST(Cut, MaximalCleanSubtrees)
{
    // Leaves 0..5; (0,1)->6, (2,3)->7, (6,7)->8, (4,5)->9, (8,9)->10.
    Dendrogram t;
    t.leaves = 6;
    t.merges = {{0, 1, 1, 2}, {2, 3, 1, 2}, {6, 7, 2, 4}, {4, 5, 1, 2}, {8, 9, 5, 6}};
    std::vector<double> coefs = {0, 0, 0.5, 0, 2.0};
    auto a = cut_clusters(t, coefs, 1.0, 2, {"a", "b", "c", "d", "e", "f"});
    ASSERT_EQ(a.clusters.size(), 2u);
    EXPECT_EQ(a.clusters.at(1), (std::vector<std::size_t>{0, 1, 2, 3}));
    EXPECT_EQ(a.clusters.at(2), (std::vector<std::size_t>{4, 5}));
    auto filtered = cut_clusters(t, coefs, 1.0, 3);
    EXPECT_EQ(filtered.clusters.size(), 1u);
    EXPECT_EQ(filtered.cluster_of[4], kUnclustered);
    EXPECT_EQ(assignment_csv(a), "hunk_id,cluster_id\na,1\nb,1\nc,1\nd,1\ne,2\nf,2\n");
}

TEST(Cut, PermutationChangesIdsNotMemberships)
{
    std::mt19937_64 rng(8);
    for (int iter = 0; iter < 30; ++iter) {
        std::size_t n = 40;
        auto pts = random_points(rng, n, 2, false);
        for (std::size_t i = 0; i < n / 2; ++i) pts[i][0] += 40;  // two groups
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<std::vector<double>> shuffled;
        for (auto p : perm) shuffled.push_back(pts[p]);

        auto run = [](const std::vector<std::vector<double>>& ps) {
            auto t = single_linkage(SparseEuclidean(dense_to_sparse(ps)));
            auto coefs = inconsistency_coefficients(t);
            return cut_clusters(t, coefs, select_cutoff(coefs), 3);
        };
        auto a = run(pts);
        auto b = run(shuffled);
        std::set<std::set<std::size_t>> sa, sb;
        for (const auto& [_, m] : a.clusters) sa.insert(std::set<std::size_t>(m.begin(), m.end()));
        for (const auto& [_, m] : b.clusters) {
            std::set<std::size_t> orig;
            for (auto r : m) orig.insert(perm[r]);
            sb.insert(orig);
        }
        EXPECT_EQ(sa, sb);
        for (const auto& [_, m] : a.clusters) EXPECT_GE(m.size(), 3u);
    }
}

TEST(Sample, SizesAndDeterminism)
{
    Dendrogram t;
    std::size_t n = 103;
    t.leaves = n;
    // 100-leaf caterpillar plus three far leaves.
    std::size_t prev = 0;
    for (std::size_t k = 1; k < 100; ++k) {
        t.merges.push_back(Merge{prev, k, 1.0, k + 1});
        prev = n + t.merges.size() - 1;
    }
    t.merges.push_back(Merge{100, 101, 1.0, 2});
    t.merges.push_back(Merge{102, n + t.merges.size() - 1, 1.0, 3});
    t.merges.push_back(Merge{prev, n + t.merges.size() - 1, 50.0, n});
    std::vector<double> coefs(t.merges.size(), 0.0);
    coefs.back() = 9.0;
    auto a = cut_clusters(t, coefs, 1.0, 1);
    ASSERT_EQ(a.clusters.size(), 2u);
    EXPECT_EQ(a.clusters.at(1).size(), 100u);
    EXPECT_EQ(sample_cluster(a, 2, 5, 1).size(), 3u);
    auto s1 = sample_cluster(a, 1, 5, 42);
    EXPECT_EQ(s1.size(), 5u);
    EXPECT_EQ(s1, sample_cluster(a, 1, 5, 42));
    EXPECT_EQ(std::set<std::string>(s1.begin(), s1.end()).size(), 5u);
    EXPECT_NE(s1, sample_cluster(a, 1, 5, 43));
    EXPECT_THROW(sample_cluster(a, 9, 5, 1), UnknownCluster);
}

TEST(Export, DendrogramJsonRoundTrip)
{
    auto t = chain({0.5, 1.25, 3.0});
    auto back = dendrogram_from_json(to_json(t));
    ASSERT_EQ(back.merges.size(), 3u);
    EXPECT_EQ(back.merges[2].height, 3.0);
    EXPECT_EQ(back.merges[2].size, 4u);
    EXPECT_EQ(to_json(back).dump(), to_json(t).dump());
    EXPECT_EQ(triage_from_name("FIX-INDUCED"), TriageLabel::FixInduced);
    EXPECT_FALSE(triage_from_name("bugfix"));
}
