#include <fixctx/stats/stats.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <fixctx/util/csv.hpp>
#include <fixctx/util/text.hpp>

namespace fixctx::stats {

namespace {

/// Midranks (1-based) of `values` and the tie term sum(t^3 - t).
std::vector<double> midranks(const std::vector<double>& values, double& tie_sum)
{
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    tie_sum = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i + 1;
        while (j < n && values[order[j]] == values[order[i]]) ++j;
        double r = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
        double t = static_cast<double>(j - i);
        tie_sum += t * t * t - t;
        i = j;
    }
    return ranks;
}

DunnResult from_rank_sums(double r1, std::size_t n1, double r2, std::size_t n2, double tie_sum, double alpha)
{
    DunnResult out;
    const double N = static_cast<double>(n1 + n2);
    double var = N * (N + 1) / 12.0 - tie_sum / (12.0 * (N - 1));
    if (n1 + n2 < 2 || var <= 0) {
        out.zero_variance = true;
        return out;
    }
    double se = std::sqrt(var * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
    out.z = (r1 / static_cast<double>(n1) - r2 / static_cast<double>(n2)) / se;
    out.p = two_sided_p(out.z);
    out.relevant = out.p < alpha;
    return out;
}

} // namespace

double two_sided_p(double z)
{
    return std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
}

DunnResult dunn_test(const std::vector<double>& cluster, const std::vector<double>& control, double alpha)
{
    if (cluster.empty() || control.empty()) throw Error("Dunn test needs two nonempty groups");
    std::vector<double> pooled(cluster);
    pooled.insert(pooled.end(), control.begin(), control.end());
    double tie_sum = 0;
    auto ranks = midranks(pooled, tie_sum);
    double r1 = std::accumulate(ranks.begin(), ranks.begin() + static_cast<std::ptrdiff_t>(cluster.size()), 0.0);
    double r2 = std::accumulate(ranks.begin() + static_cast<std::ptrdiff_t>(cluster.size()), ranks.end(), 0.0);
    return from_rank_sums(r1, cluster.size(), r2, control.size(), tie_sum, alpha);
}

double quantile(const std::vector<double>& sorted, double q)
{
    if (sorted.empty()) throw Error("quantile of no values");
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Summary summary_stats(std::vector<double> values)
{
    if (values.empty()) throw Error("summary of no values");
    std::sort(values.begin(), values.end());
    Summary s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    double sd = std::sqrt(ss / n);
    if (s.mean == 0) {
        s.cv_defined = false;
        s.cv = std::nan("");
    } else {
        s.cv = sd / s.mean;
    }
    const double qs[5] = {0.05, 0.25, 0.5, 0.75, 0.95};
    for (int i = 0; i < 5; ++i) s.quantiles[i] = quantile(values, qs[i]);
    return s;
}

ContextDataset ContextDataset::from_vectors(const std::vector<features::ContextVector>& vs)
{
    ContextDataset d;
    std::set<std::string> names;
    std::vector<std::map<std::string, double>> named;
    for (const auto& v : vs) {
        d.rows.push_back(v.hunk_id);
        named.push_back(v.named());
        for (const auto& [k, _] : named.back()) names.insert(k);
    }
    for (const auto& name : names) {
        auto& col = d.columns[name];
        col.reserve(vs.size());
        for (const auto& m : named) {
            auto it = m.find(name);
            col.push_back(it == m.end() ? 0.0 : it->second);
        }
    }
    return d;
}

RelevanceMatrix relevance_matrix(const cluster::ClusterAssignment& a, const ContextDataset& ctx,
                                 const std::map<std::size_t, cluster::TriageLabel>& triage, const RelevanceConfig& cfg,
                                 const features::CategoryTable& categories)
{
    if (ctx.rows != a.rows) throw Error("context dataset rows differ from the clustered rows");
    RelevanceMatrix m;
    for (const auto& [id, label] : triage) {
        if (label == cluster::TriageLabel::BugFix && a.clusters.count(id)) m.clusters.push_back(id);
    }
    std::sort(m.clusters.begin(), m.clusters.end());
    m.effective_alpha = cfg.alpha;
    if (cfg.bonferroni && !ctx.columns.empty()) m.effective_alpha = cfg.alpha / static_cast<double>(ctx.columns.size());
    for (auto& row : m.cells) row.assign(m.clusters.size(), RelevanceCell{});

    const std::size_t n = ctx.rows.size();
    // Cluster plus the rest is the whole dataset, so one joint ranking per
    // feature serves every cluster.
    struct Ranked {
        std::vector<double> ranks;
        double tie_sum = 0;
        double total = 0;
    };
    std::map<std::string, Ranked> ranked;
    if (cfg.control == ControlGroup::ExcludeCluster && !m.clusters.empty()) {
        for (const auto& [feature, values] : ctx.columns) {
            auto& r = ranked[feature];
            r.ranks = midranks(values, r.tie_sum);
            r.total = std::accumulate(r.ranks.begin(), r.ranks.end(), 0.0);
        }
    }
    for (std::size_t col = 0; col < m.clusters.size(); ++col) {
        const std::size_t cid = m.clusters[col];
        const auto& members = a.clusters.at(cid);
        std::array<double, features::kCategoryCount> best_p;
        best_p.fill(2.0);
        for (const auto& [feature, values] : ctx.columns) {
            std::vector<double> mine;
            for (std::size_t r : members) mine.push_back(values[r]);
            DunnResult res;
            if (cfg.control == ControlGroup::WholeDataset) {
                res = dunn_test(mine, values, m.effective_alpha);
            } else if (members.size() == n) {
                res.zero_variance = true;  // no control rows left
            } else {
                const auto& rk = ranked.at(feature);
                double r1 = 0;
                for (std::size_t r : members) r1 += rk.ranks[r];
                res = from_rank_sums(r1, members.size(), rk.total - r1, n - members.size(), rk.tie_sum,
                                     m.effective_alpha);
            }
            res.feature = feature;
            FeatureTest t{cid, res, summary_stats(mine), categories.categorize(feature)};
            auto& cell = m.cells[static_cast<std::size_t>(t.category)][col];
            if (res.relevant) {
                cell.relevant = true;
                cell.relevant_features.push_back(feature);
            }
            if (res.p < best_p[static_cast<std::size_t>(t.category)]) {
                best_p[static_cast<std::size_t>(t.category)] = res.p;
                cell.lead_feature = feature;
                cell.lead_summary = t.summary;
            }
            m.tests.push_back(std::move(t));
        }
    }
    return m;
}

std::string relevance_csv(const RelevanceMatrix& m)
{
    util::CsvWriter w;
    std::vector<std::string> header{"category"};
    for (auto c : m.clusters) header.push_back(std::to_string(c));
    w.row(header);
    for (std::size_t k = 0; k < features::kCategoryCount; ++k) {
        std::vector<std::string> row{std::string(features::category_name(static_cast<features::Category>(k)))};
        for (const auto& cell : m.cells[k]) row.push_back(cell.relevant ? "1" : "0");
        w.row(row);
    }
    return w.str();
}

std::string relevance_long_csv(const RelevanceMatrix& m)
{
    util::CsvWriter w;
    w.row({"cluster", "feature", "category", "z", "p", "relevant", "mean", "cv", "q05", "q25", "q50", "q75", "q95"});
    for (const auto& t : m.tests) {
        std::vector<std::string> row{std::to_string(t.cluster), t.dunn.feature,
                                     std::string(features::category_name(t.category)),
                                     util::format_double(t.dunn.z), util::format_double(t.dunn.p),
                                     t.dunn.relevant ? "1" : "0", util::format_double(t.summary.mean),
                                     t.summary.cv_defined ? util::format_double(t.summary.cv) : "undefined"};
        for (double q : t.summary.quantiles) row.push_back(util::format_double(q));
        w.row(row);
    }
    return w.str();
}

} // namespace fixctx::stats
