#include <fixctx/pipeline/pipeline.hpp>

#include <fmt/format.h>

#include <fixctx/util/csv.hpp>

namespace fixctx::pipeline {

namespace {

std::string cell(std::string s)
{
    for (auto& ch : s) {
        if (ch == '|') ch = '/';
        if (ch == '\n' || ch == '\r') ch = ' ';
    }
    return s;
}

std::string share(std::size_t part, std::size_t whole)
{
    return whole == 0 ? "0%" : fmt::format("{:.0f}%", 100.0 * static_cast<double>(part) / static_cast<double>(whole));
}

std::string number(double v)
{
    return fmt::format("{:.4f}", v);
}

} // namespace

std::vector<Annotation> parse_annotations(std::string_view csv)
{
    auto table = util::parse_csv(csv);
    if (table.empty()) return {};
    const auto& header = table[0];
    if (header.size() < 3 || header[0] != "cluster_id" || header[1] != "label" || header[2] != "description" ||
        (header.size() > 3 && header[3] != "category") || header.size() > 4)
        throw Error("annotation CSV header must be cluster_id,label,description[,category]");
    std::vector<Annotation> out;
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& row = table[r];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != header.size()) throw Error("annotation CSV row " + std::to_string(r) + " has the wrong width");
        Annotation a;
        try {
            std::size_t used = 0;
            a.cluster = std::stoul(row[0], &used);
            if (used != row[0].size()) throw std::invalid_argument(row[0]);
        } catch (const std::exception&) {
            throw Error("annotation CSV row " + std::to_string(r) + ": bad cluster id '" + row[0] + "'");
        }
        auto label = cluster::triage_from_name(row[1]);
        if (!label) throw Error("annotation CSV row " + std::to_string(r) + ": unknown label '" + row[1] + "'");
        a.label = *label;
        a.description = row[2];
        if (row.size() > 3) a.category = row[3];
        out.push_back(std::move(a));
    }
    return out;
}

std::string annotations_csv(const std::vector<Annotation>& rows)
{
    util::CsvWriter w;
    w.row({"cluster_id", "label", "description", "category"});
    for (const auto& a : rows)
        w.row({std::to_string(a.cluster), std::string(cluster::triage_name(a.label)), a.description, a.category});
    return w.str();
}

std::string render_report(const RunReport& r)
{
    std::string o;
    auto line = [&o](const std::string& s = {}) { o += s + "\n"; };

    line("# Bug-fix pattern report");
    line();
    line("## Corpus");
    line();
    line("| Measure | Count |");
    line("|---|---:|");
    line(fmt::format("| Changes retrieved | {} |", r.changes_seen));
    line(fmt::format("| Bug-fix changes kept | {} |", r.changes));
    line(fmt::format("| Files | {} |", r.files));
    line(fmt::format("| Files parsed | {} |", r.parsed));
    line(fmt::format("| Files skipped | {} |", r.skipped));
    line(fmt::format("| Hunks | {} |", r.hunks));
    line();

    line("## Clustering");
    line();
    line("- Cophenetic coefficient: " + (r.cophenetic ? number(*r.cophenetic) : std::string("undefined")));
    line("- Inconsistency cutoff: " + (r.cutoff ? number(*r.cutoff) : std::string("none")) +
         (r.cutoff_overridden ? " (configured)" : " (histogram rule)"));
    line(fmt::format("- Flat clusters before the size filter: {}", r.raw_clusters));
    line(fmt::format("- Retained clusters: {}", r.clusters.size()));
    line(fmt::format("- Unclustered hunks: {}", r.unclustered));
    line();

    line("## Clusters");
    line();
    if (r.clusters.empty()) {
        line("No cluster reached the minimum size.");
    } else {
        line("| Cluster | Size | Triage | Category | Description | Signature |");
        line("|---:|---:|---|---|---|---|");
        for (const auto& c : r.clusters) {
            std::string sig;
            for (const auto& s : c.signature) sig += (sig.empty() ? "" : ", ") + s;
            line(fmt::format("| {} | {} | {} | {} | {} | {} |", c.id, c.size, cluster::triage_name(c.label),
                             cell(c.category), cell(c.description), sig));
        }
    }
    line();

    line("## Triage distribution");
    line();
    line("| Triage | Clusters | Share |");
    line("|---|---:|---:|");
    for (auto label : {cluster::TriageLabel::BugFix, cluster::TriageLabel::FixInduced, cluster::TriageLabel::Refactoring,
                       cluster::TriageLabel::Unreviewed}) {
        auto it = r.triage_distribution.find(label);
        std::size_t n = it == r.triage_distribution.end() ? 0 : it->second;
        line(fmt::format("| {} | {} | {} |", cluster::triage_name(label), n, share(n, r.clusters.size())));
    }
    line();

    line("## BUG-FIX categories");
    line();
    std::size_t bugfix = 0;
    for (const auto& [_, n] : r.bugfix_categories) bugfix += n;
    if (bugfix == 0) {
        line("No cluster is triaged as BUG-FIX.");
    } else {
        line("| Category | Clusters | Share |");
        line("|---|---:|---:|");
        for (const auto& [cat, n] : r.bugfix_categories) line(fmt::format("| {} | {} | {} |", cell(cat), n, share(n, bugfix)));
    }
    line();

    line("## Context relevance");
    line();
    if (!r.relevance_available) {
        line("Withheld: the relevance analysis needs at least one cluster triaged as BUG-FIX.");
    } else {
        line(fmt::format("Dunn test per context feature, cluster against the remaining hunks, alpha = {}.",
                         fmt::format("{:g}", r.effective_alpha)));
        line();
        std::string head = "| Category |", rule = "|---|";
        for (auto id : r.relevance_clusters) {
            head += fmt::format(" {} |", id);
            rule += ":---:|";
        }
        line(head);
        line(rule);
        for (const auto& [cat, cells] : r.relevance_rows) {
            std::string row = "| " + cat + " |";
            for (bool b : cells) row += b ? " \u2713 |" : "  |";
            line(row);
        }
        line();
        line("### Per-feature tests");
        line();
        line("| Cluster | Feature | Category | z | p | Relevant | Median |");
        line("|---:|---|---|---:|---:|:---:|---:|");
        auto table = util::parse_csv(r.relevance_tests_csv);
        for (std::size_t i = 1; i < table.size(); ++i) {
            const auto& t = table[i];
            if (t.size() < 13) continue;
            line(fmt::format("| {} | {} | {} | {} | {} | {} | {} |", t[0], t[1], t[2], number(util::parse_double(t[3])),
                             fmt::format("{:.3g}", util::parse_double(t[4])), t[5] == "1" ? "\u2713" : "",
                             fmt::format("{:g}", util::parse_double(t[10]))));
        }
    }
    line();

    std::vector<const FileCount*> skipped;
    for (const auto& f : r.per_file)
        if (!f.parsed) skipped.push_back(&f);
    if (!skipped.empty()) {
        line("## Skipped files");
        line();
        line("| Change | File | Reason |");
        line("|---|---|---|");
        for (const auto* f : skipped) line(fmt::format("| {} | {} | {} |", cell(f->change_id), cell(f->path), cell(f->error)));
        line();
    }

    line("## Configuration");
    line();
    line("```yaml");
    o += r.config_echo;
    line("```");
    line();
    line("Taxonomy checksum: " + r.taxonomy_checksum);
    line();
    line("Context category table checksum: " + r.category_table_checksum);
    return o;
}

} // namespace fixctx::pipeline
