#include <fixctx/cluster/cluster.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <nlohmann/json.hpp>

#include <fixctx/util/csv.hpp>

namespace fixctx::cluster {

namespace {

/// Linear-interpolation quantile of sorted data.
double quantile(const std::vector<double>& sorted, double q)
{
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

} // namespace

Histogram auto_histogram(const std::vector<double>& values)
{
    if (values.empty()) throw Error("histogram of no values");
    std::vector<double> v(values);
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    Histogram h;
    double iqr = quantile(v, 0.75) - quantile(v, 0.25);
    if (iqr > 0) {
        h.rule = BinRule::FreedmanDiaconis;
        h.width = 2.0 * iqr / std::cbrt(n);
    } else {
        h.rule = BinRule::Scott;
        double mean = 0;
        for (double x : v) mean += x;
        mean /= n;
        double var = 0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= n;
        h.width = std::cbrt(24.0 * std::sqrt(std::numbers::pi) / n) * std::sqrt(var);
    }
    double lo = v.front(), hi = v.back();
    if (lo == hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    std::size_t bins = h.width > 0 ? static_cast<std::size_t>(std::max(1.0, std::ceil((hi - lo) / h.width))) : 1;
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    h.counts.assign(bins, 0);
    for (double x : v) {
        auto b = static_cast<std::size_t>((x - lo) / (hi - lo) * static_cast<double>(bins));
        ++h.counts[std::min(b, bins - 1)];
    }
    return h;
}

double select_cutoff(const std::vector<double>& coefs, Histogram* histogram)
{
    if (std::none_of(coefs.begin(), coefs.end(), [](double c) { return c != 0.0; })) throw AllZero();
    Histogram h = auto_histogram(coefs);
    std::size_t last = h.counts.size();
    while (last > 0 && h.counts[last - 1] == 0) --last;
    double c = h.edges[last - 1];
    if (histogram) *histogram = std::move(h);
    return c;
}

ClusterAssignment cut_clusters(const Dendrogram& t, const std::vector<double>& coefs, double c, std::size_t min_size,
                               std::vector<std::string> row_ids)
{
    if (!(c > 0)) throw Error("cutoff must be positive");
    if (coefs.size() != t.merges.size()) throw Error("one coefficient per merge required");
    const std::size_t n = t.leaves;
    if (row_ids.empty()) {
        for (std::size_t i = 0; i < n; ++i) row_ids.push_back(std::to_string(i));
    }
    if (row_ids.size() != n) throw Error("one row id per leaf required");

    // Merges come in creation order, so children precede parents.
    std::vector<char> clean(t.merges.size());
    for (std::size_t k = 0; k < t.merges.size(); ++k) {
        const auto& m = t.merges[k];
        bool ok = coefs[k] < c;
        for (std::size_t ch : {m.left, m.right})
            if (ch >= n) ok = ok && clean[ch - n];
        clean[k] = ok;
    }

    std::vector<std::vector<std::size_t>> flat;
    if (n == 1) flat.push_back({0});
    std::vector<std::size_t> stack;
    if (n > 1) stack.push_back(n + t.merges.size() - 1);
    while (!stack.empty()) {
        std::size_t id = stack.back();
        stack.pop_back();
        if (id < n) {
            flat.push_back({id});
        } else if (clean[id - n]) {
            flat.push_back(t.members(id));
        } else {
            stack.push_back(t.merges[id - n].right);
            stack.push_back(t.merges[id - n].left);
        }
    }
    std::sort(flat.begin(), flat.end(), [](const auto& a, const auto& b) {
        return a.size() != b.size() ? a.size() > b.size() : a.front() < b.front();
    });

    ClusterAssignment out;
    out.rows = std::move(row_ids);
    out.cluster_of.assign(n, kUnclustered);
    out.raw_cluster_count = flat.size();
    out.min_size = min_size;
    std::size_t next = 1;
    for (auto& members : flat) {
        if (members.size() < min_size) continue;
        for (std::size_t r : members) out.cluster_of[r] = next;
        out.clusters.emplace(next++, std::move(members));
    }
    return out;
}

std::vector<std::string> sample_cluster(const ClusterAssignment& a, std::size_t cluster_id, std::size_t n,
                                        std::uint64_t seed)
{
    auto it = a.clusters.find(cluster_id);
    if (it == a.clusters.end()) throw UnknownCluster(cluster_id);
    std::vector<std::size_t> picked;
    std::mt19937_64 rng(seed);
    std::sample(it->second.begin(), it->second.end(), std::back_inserter(picked), n, rng);
    std::vector<std::string> out;
    for (std::size_t r : picked) out.push_back(a.rows[r]);
    return out;
}

std::string_view triage_name(TriageLabel l)
{
    switch (l) {
    case TriageLabel::BugFix:
        return "BUG-FIX";
    case TriageLabel::FixInduced:
        return "FIX-INDUCED";
    case TriageLabel::Refactoring:
        return "REFACTORING";
    default:
        return "UNREVIEWED";
    }
}

std::optional<TriageLabel> triage_from_name(std::string_view name)
{
    for (auto l : {TriageLabel::BugFix, TriageLabel::FixInduced, TriageLabel::Refactoring, TriageLabel::Unreviewed}) {
        if (triage_name(l) == name) return l;
    }
    return std::nullopt;
}

nlohmann::json to_json(const Dendrogram& t)
{
    nlohmann::json j;
    j["leaves"] = t.leaves;
    auto& arr = j["merges"] = nlohmann::json::array();
    for (const auto& m : t.merges) arr.push_back({m.left, m.right, m.height, m.size});
    return j;
}

Dendrogram dendrogram_from_json(const nlohmann::json& j)
{
    Dendrogram t;
    t.leaves = j.at("leaves").get<std::size_t>();
    for (const auto& m : j.at("merges")) {
        t.merges.push_back(Merge{m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(), m.at(2).get<double>(),
                                 m.at(3).get<std::size_t>()});
    }
    if (t.leaves > 0 && t.merges.size() != t.leaves - 1) throw Error("dendrogram needs leaves - 1 merges");
    return t;
}

std::string assignment_csv(const ClusterAssignment& a)
{
    util::CsvWriter w;
    w.row({"hunk_id", "cluster_id"});
    for (std::size_t r = 0; r < a.rows.size(); ++r) {
        w.row({a.rows[r], a.cluster_of[r] == kUnclustered ? "unclustered" : std::to_string(a.cluster_of[r])});
    }
    return w.str();
}

} // namespace fixctx::cluster
