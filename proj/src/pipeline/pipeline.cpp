#include <fixctx/pipeline/pipeline.hpp>

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>
#include <cmath>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fixctx/diff/diff.hpp>
#include <fixctx/features/context.hpp>
#include <fixctx/util/csv.hpp>
#include <fixctx/util/hash.hpp>
#include <fixctx/util/text.hpp>

namespace fs = std::filesystem;

namespace fixctx::pipeline {

namespace {

constexpr std::array<std::string_view, kStageCount> kStageNames = {"ingest",  "extract",  "features", "cluster",
                                                                   "sample",  "annotate", "stats",    "report"};

std::string join(const std::vector<std::string>& v)
{
    std::string out;
    for (const auto& s : v) out += s + ",";
    return out;
}

nlohmann::json read_json(const std::string& path)
{
    return nlohmann::json::parse(util::read_file(path));
}

std::string dump(const nlohmann::json& j)
{
    return j.dump(2) + "\n";
}

cluster::ClusterAssignment assignment_from_csv(std::string_view text, std::size_t min_size, std::size_t raw)
{
    auto table = util::parse_csv(text);
    if (table.empty() || table[0] != std::vector<std::string>{"hunk_id", "cluster_id"})
        throw Error("assignment CSV has an unexpected header");
    cluster::ClusterAssignment a;
    a.min_size = min_size;
    a.raw_cluster_count = raw;
    for (std::size_t r = 1; r < table.size(); ++r) {
        if (table[r].size() != 2) throw Error("assignment CSV row " + std::to_string(r) + " is malformed");
        a.rows.push_back(table[r][0]);
        std::size_t id = table[r][1] == "unclustered" ? cluster::kUnclustered : std::stoul(table[r][1]);
        a.cluster_of.push_back(id);
        if (id != cluster::kUnclustered) a.clusters[id].push_back(r - 1);
    }
    return a;
}

/// The fixed context fields every vector carries, zeros included.
const std::vector<std::string>& fixed_context_names()
{
    static const auto names = [] {
        std::vector<std::string> out;
        for (const auto& [k, _] : features::ContextVector{}.named()) out.push_back(k);
        return out;
    }();
    return names;
}

stats::ContextDataset context_dataset(const std::vector<features::FeatureVector>& vs)
{
    stats::ContextDataset d;
    std::set<std::string> names(fixed_context_names().begin(), fixed_context_names().end());
    for (const auto& v : vs) {
        d.rows.push_back(v.hunk_id);
        for (const auto& [k, _] : v.entries) names.insert(k);
    }
    for (const auto& name : names) {
        auto& col = d.columns[name];
        col.reserve(vs.size());
        for (const auto& v : vs) {
            auto it = v.entries.find(name);
            col.push_back(it == v.entries.end() ? 0.0 : it->second);
        }
    }
    return d;
}

std::vector<std::string> source_lines(const std::string& text, int first, int last)
{
    std::vector<std::string> out;
    auto lines = util::split_lines(text);
    for (int l = std::max(first, 1); l <= last && l <= static_cast<int>(lines.size()); ++l)
        out.emplace_back(lines[static_cast<std::size_t>(l - 1)]);
    return out;
}

} // namespace

std::string_view stage_name(Stage s)
{
    return kStageNames.at(static_cast<std::size_t>(s));
}

std::optional<Stage> stage_from_name(std::string_view name)
{
    for (std::size_t i = 0; i < kStageNames.size(); ++i)
        if (kStageNames[i] == name) return static_cast<Stage>(i);
    return std::nullopt;
}

std::vector<Stage> stage_dependencies(Stage s)
{
    switch (s) {
    case Stage::Ingest:
        return {};
    case Stage::Extract:
        return {Stage::Ingest};
    case Stage::Features:
        return {Stage::Extract};
    case Stage::Cluster:
        return {Stage::Features};
    case Stage::Sample:
    case Stage::Annotate:
        return {Stage::Cluster};
    case Stage::Stats:
        return {Stage::Features, Stage::Cluster, Stage::Annotate};
    case Stage::Report:
        return {Stage::Ingest, Stage::Extract, Stage::Features, Stage::Cluster, Stage::Sample, Stage::Annotate,
                Stage::Stats};
    }
    return {};
}

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg))
{
    cfg_.validate();
}

std::string Pipeline::artifact(std::string_view name) const
{
    return (fs::path(cfg_.output_dir) / name).string();
}

std::string Pipeline::snapshot_dir() const
{
    return artifact("snapshot");
}

std::string Pipeline::input_digest(Stage s) const
{
    std::string text = "stage=" + std::string(stage_name(s)) + "\n";
    const auto& c = cfg_;
    switch (s) {
    case Stage::Ingest:
        text += "kind=" + c.source.kind + "\nlocation=" + c.source.location + "\nprojects=" + join(c.source.projects) +
                "\nbranches=" + join(c.source.branches) + "\nafter=" + c.source.after + "\nbefore=" + c.source.before +
                "\nkeywords=" + join(c.filters.keywords) + "\nword_bounded=" + std::to_string(c.filters.word_bounded) +
                "\ntest_prefixes=" + join(c.filters.test_prefixes) + "\ntest_suffixes=" + join(c.filters.test_suffixes) +
                "\nextensions=" + join(c.filters.extensions) + "\n";
        if (c.source.kind == "snapshot") {
            auto listing = (fs::path(c.source.location) / "changes.jsonl").string();
            text += "snapshot=" + (fs::exists(listing) ? util::sha256_hex(util::read_file(listing)) : "missing") + "\n";
        } else if (c.source.kind == "git") {
            std::vector<std::string> argv{"git", "-C", c.source.location, "rev-parse"};
            for (const auto& b : c.source.branches.empty() ? std::vector<std::string>{"HEAD"} : c.source.branches)
                argv.push_back(b);
            int status = 0;
            try {
                text += "heads=" + ingest::run_process(argv, &status) + "\n";
            } catch (const Error&) {
                text += "heads=unavailable\n";
            }
        }
        break;
    case Stage::Extract:
        text += "dialect=" + std::string(grammar::dialect_tag(c.extract.dialect)) +
                "\nmax_gap=" + std::to_string(c.extract.max_gap) + "\n";
        break;
    case Stage::Features:
        text += "w_type=" + util::format_double(c.weights.w_type) + "\nw_role=" + util::format_double(c.weights.w_role) +
                "\nr=" + util::format_double(c.weights.r) + "\nc=" + util::format_double(c.weights.c) + "\n";
        break;
    case Stage::Cluster:
        text += "metric=" + c.cluster.metric + "\nlinkage=" + c.cluster.linkage +
                "\ndepth=" + std::to_string(c.cluster.depth) + "\nmin_size=" + std::to_string(c.cluster.min_size) +
                "\ncutoff=" + (c.cluster.cutoff ? util::format_double(*c.cluster.cutoff) : "auto") + "\n";
        break;
    case Stage::Sample:
        text += "sample_size=" + std::to_string(c.cluster.sample_size) + "\nseed=" + std::to_string(c.seed) + "\n";
        break;
    case Stage::Annotate:
        if (c.annotations.empty()) text += "annotations=none\n";
        else if (fs::exists(c.annotations)) text += "annotations=" + util::sha256_hex(util::read_file(c.annotations)) + "\n";
        else text += "annotations=missing:" + c.annotations + "\n";
        break;
    case Stage::Stats:
        text += "alpha=" + util::format_double(c.stats.alpha) +
                "\ncontrol=" + std::to_string(static_cast<int>(c.stats.control)) +
                "\nbonferroni=" + std::to_string(c.stats.bonferroni) +
                "\ncategories=" + features::category_table().checksum() + "\n";
        break;
    case Stage::Report:
        text += c.to_text();
        break;
    }
    for (Stage d : stage_dependencies(s)) text += "dep." + std::string(stage_name(d)) + "=" + checkpoint_digest(d) + "\n";
    return util::sha256_hex(text);
}

std::string Pipeline::checkpoint_digest(Stage s) const
{
    auto path = artifact("checkpoints/" + std::string(stage_name(s)) + ".json");
    if (!fs::exists(path)) throw MissingCheckpoint(s);
    nlohmann::json j;
    try {
        j = read_json(path);
    } catch (const std::exception&) {
        throw MissingCheckpoint(s);
    }
    if (j.value("input", "") != input_digest(s)) throw MissingCheckpoint(s);
    for (const auto& [name, digest] : j.at("outputs").items()) {
        auto file = artifact(name);
        if (!fs::exists(file) || util::sha256_hex(util::read_file(file)) != digest.get<std::string>())
            throw MissingCheckpoint(s);
    }
    return j.at("digest").get<std::string>();
}

bool Pipeline::checkpoint_valid(Stage s) const
{
    try {
        checkpoint_digest(s);
        return true;
    } catch (const MissingCheckpoint&) {
        return false;
    }
}

void Pipeline::write_checkpoint(Stage s, const std::vector<std::string>& outputs) const
{
    nlohmann::json j;
    j["stage"] = stage_name(s);
    j["input"] = input_digest(s);
    std::string all = j["input"].get<std::string>();
    auto& out = j["outputs"] = nlohmann::json::object();
    for (const auto& name : outputs) {
        auto digest = util::sha256_hex(util::read_file(artifact(name)));
        out[name] = digest;
        all += "\n" + name + "=" + digest;
    }
    j["digest"] = util::sha256_hex(all);
    fs::create_directories(artifact("checkpoints"));
    util::write_file_atomic(artifact("checkpoints/" + std::string(stage_name(s)) + ".json"), dump(j));
}

void Pipeline::run_stage(Stage s)
{
    for (Stage d : stage_dependencies(s)) {
        if (!checkpoint_valid(d)) throw MissingCheckpoint(d);
    }
    if (checkpoint_valid(s)) {
        spdlog::info("stage {}: checkpoint valid, skipping", stage_name(s));
        return;
    }
    execute(s);
}

void Pipeline::execute(Stage s)
{
    fs::create_directories(cfg_.output_dir);
    fs::remove(artifact("checkpoints/" + std::string(stage_name(s)) + ".json"));
    spdlog::info("stage {}: running", stage_name(s));
    try {
        switch (s) {
        case Stage::Ingest:
            do_ingest();
            break;
        case Stage::Extract:
            do_extract();
            break;
        case Stage::Features:
            do_features();
            break;
        case Stage::Cluster:
            do_cluster();
            break;
        case Stage::Sample:
            do_sample();
            break;
        case Stage::Annotate:
            do_annotate();
            break;
        case Stage::Stats:
            do_stats();
            break;
        case Stage::Report:
            do_report();
            break;
        }
    } catch (const MissingCheckpoint&) {
        throw;
    } catch (const StageFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw StageFailure(s, e.what());
    }
    executed_.push_back(s);
}

RunReport Pipeline::run()
{
    for (std::size_t i = 0; i < kStageCount; ++i) run_stage(static_cast<Stage>(i));
    return load_report();
}

std::vector<std::string> Pipeline::export_dataset(Stage s, const std::string& dest) const
{
    if (!checkpoint_valid(s)) throw MissingCheckpoint(s);
    auto j = read_json(artifact("checkpoints/" + std::string(stage_name(s)) + ".json"));
    std::vector<std::string> names;
    for (const auto& [name, _] : j.at("outputs").items()) {
        auto target = fs::path(dest) / name;
        fs::create_directories(target.parent_path());
        util::write_file_atomic(target.string(), util::read_file(artifact(name)));
        names.push_back(name);
    }
    return names;
}

// --- stages ----------------------------------------------------------------

void Pipeline::do_ingest()
{
    std::unique_ptr<ingest::ChangeSource> built;
    std::unique_ptr<ingest::BlobCache> cache;
    ingest::ChangeSource* source = source_.get();
    if (!source) {
        const auto& sc = cfg_.source;
        if (sc.location.empty()) throw Error("source.location is empty");
        if (sc.kind == "snapshot") {
            built = std::make_unique<ingest::SnapshotSource>(sc.location);
        } else if (sc.kind == "git") {
            built = std::make_unique<ingest::GitSource>(sc.location, sc.projects.empty() ? "" : sc.projects.front());
        } else {
            if (!sc.cache_dir.empty()) cache = std::make_unique<ingest::BlobCache>(sc.cache_dir);
            built = std::make_unique<ingest::ReviewApiSource>(
                ingest::make_http_transport(sc.location, std::chrono::seconds(60)), cache.get());
        }
        source = built.get();
    }

    ingest::IngestConfig ic;
    ic.query = ingest::Query{cfg_.source.projects, cfg_.source.branches, cfg_.source.after, cfg_.source.before};
    ic.keywords.keywords = cfg_.filters.keywords;
    ic.keywords.word_bounded = cfg_.filters.word_bounded;
    ic.tests.segment_prefixes = cfg_.filters.test_prefixes;
    ic.tests.stem_suffixes = cfg_.filters.test_suffixes;
    ic.extensions = cfg_.filters.extensions;
    ic.concurrency = cfg_.source.concurrency;

    fs::remove_all(snapshot_dir());
    ingest::Snapshot snap(snapshot_dir());
    auto st = ingest::ingest(*source, ic, snap);
    snap.write();

    nlohmann::json j{{"changes_seen", st.changes_seen},
                     {"changes_kept", st.changes_kept},
                     {"files_kept", st.files_kept},
                     {"files_excluded", st.files_excluded},
                     {"decode_warnings", st.decode_warnings}};
    util::write_file_atomic(artifact("ingest.json"), dump(j));
    write_checkpoint(Stage::Ingest, {"snapshot/changes.jsonl", "ingest.json"});
}

void Pipeline::do_extract()
{
    auto snap = ingest::Snapshot::read(snapshot_dir());
    std::string hunks_out;
    nlohmann::json files = nlohmann::json::array();
    std::size_t n_files = 0, parsed = 0, skipped = 0, n_hunks = 0, deep = 0, conflicts = 0, fallbacks = 0;
    for (const auto& c : snap.changes()) {
        for (const auto& f : c.files) {
            ++n_files;
            nlohmann::json fj{{"change_id", c.record.change_id}, {"path", f.path}};
            try {
                auto pair = snap.file_pair(c, f);
                auto before = grammar::parse_source(pair.before_text, cfg_.extract.dialect, f.path);
                auto after = grammar::parse_source(pair.after_text, cfg_.extract.dialect, f.path);
                auto script = diff::align_versions(pair.before_text, pair.after_text);
                auto e = diff::build_diff_ast(before, after, script, c.record.change_id, f.path);
                conflicts += e.alignment_conflicts;
                fallbacks += e.alignment_fallback ? 1 : 0;
                auto hunks = diff::extract_hunks(e, cfg_.extract.max_gap);
                for (const auto& h : hunks) {
                    if (diff::hunk_height(h) > 15) ++deep;
                    hunks_out += diff::to_json(h).dump();
                    hunks_out += '\n';
                }
                ++parsed;
                n_hunks += hunks.size();
                fj["parsed"] = true;
                fj["hunks"] = hunks.size();
            } catch (const grammar::SyntaxError& e) {
                ++skipped;
                spdlog::warn("skipping {} in {}: {}", f.path, c.record.change_id, e.what());
                fj["parsed"] = false;
                fj["hunks"] = 0;
                fj["error"] = e.what();
            }
            files.push_back(std::move(fj));
        }
    }
    nlohmann::json j{{"changes", snap.changes().size()},
                     {"files", n_files},
                     {"parsed", parsed},
                     {"skipped", skipped},
                     {"hunks", n_hunks},
                     {"deep_hunks", deep},
                     {"alignment_conflicts", conflicts},
                     {"alignment_fallbacks", fallbacks},
                     {"per_file", files}};
    util::write_file_atomic(artifact("hunks.jsonl"), hunks_out);
    util::write_file_atomic(artifact("extract.json"), dump(j));
    spdlog::info("extract: {} files, {} parsed, {} skipped, {} hunks", n_files, parsed, skipped, n_hunks);
    write_checkpoint(Stage::Extract, {"hunks.jsonl", "extract.json"});
}

void Pipeline::do_features()
{
    auto text = util::read_file(artifact("hunks.jsonl"));
    std::vector<features::FeatureVector> change;
    std::vector<features::FeatureVector> context;
    for (auto line : util::split_lines(text)) {
        if (util::trim(line).empty()) continue;
        auto h = diff::hunk_from_json(nlohmann::json::parse(line));
        change.push_back(features::hunk_feature_vector(h, cfg_.weights));
        context.push_back(features::context_vector(h).sparse());
    }
    auto m = features::assemble_matrix(change);
    util::write_file_atomic(artifact("features.csv"), features::to_csv(m));
    util::write_file_atomic(artifact("features.jsonl"), features::to_jsonl(change));
    util::write_file_atomic(artifact("context.jsonl"), features::to_jsonl(context));
    spdlog::info("features: {} hunks, {} change features", m.rows.size(), m.columns.size());
    write_checkpoint(Stage::Features, {"features.csv", "features.jsonl", "context.jsonl"});
}

void Pipeline::do_cluster()
{
    auto m = features::matrix_from_csv(util::read_file(artifact("features.csv")));
    const std::size_t n = m.rows.size();
    cluster::Dendrogram t;
    t.leaves = n;
    std::vector<cluster::InconsistencyRow> incon;
    std::vector<double> coefs;
    nlohmann::json info;
    info["hunks"] = n;
    info["cophenetic"] = nullptr;
    info["cophenetic_degenerate"] = false;
    info["cutoff"] = nullptr;
    info["cutoff_overridden"] = cfg_.cluster.cutoff.has_value();
    info["histogram"] = nullptr;
    double c = cfg_.cluster.cutoff.value_or(std::numeric_limits<double>::infinity());
    if (n >= 2) {
        constexpr std::size_t kStoredLimit = 6000;
        std::unique_ptr<cluster::Distances> d;
        if (n <= kStoredLimit) d = std::make_unique<cluster::CondensedDistances>(cluster::pairwise_distances(m, cfg_.cluster.threads));
        else d = std::make_unique<cluster::SparseEuclidean>(m);
        t = cluster::single_linkage(*d);
        auto coph = cluster::cophenetic_coefficient(t, *d);
        info["cophenetic_degenerate"] = coph.degenerate;
        if (!coph.degenerate) info["cophenetic"] = coph.coefficient;
        incon = cluster::inconsistency(t, cfg_.cluster.depth);
        for (const auto& r : incon) coefs.push_back(r.coefficient);
        if (!cfg_.cluster.cutoff) {
            cluster::Histogram hist;
            try {
                c = cluster::select_cutoff(coefs, &hist);
            } catch (const cluster::AllZero& e) {
                throw Error(std::string(e.what()) + "; set cluster.cutoff explicitly");
            }
            info["histogram"] = {{"rule", hist.rule == cluster::BinRule::Scott ? "scott" : "freedman-diaconis"},
                                 {"width", hist.width},
                                 {"edges", hist.edges},
                                 {"counts", hist.counts}};
        }
        info["cutoff"] = c;
    } else if (cfg_.cluster.cutoff) {
        info["cutoff"] = c;
    }
    auto a = cluster::cut_clusters(t, coefs, c, cfg_.cluster.min_size, m.rows);
    info["min_size"] = cfg_.cluster.min_size;
    info["raw_clusters"] = a.raw_cluster_count;
    std::size_t unclustered = 0;
    for (auto id : a.cluster_of) unclustered += id == cluster::kUnclustered;
    info["unclustered"] = unclustered;
    auto& cl = info["clusters"] = nlohmann::json::array();
    for (const auto& [id, members] : a.clusters) cl.push_back({{"id", id}, {"size", members.size()}});

    util::CsvWriter w;
    w.row({"merge", "left", "right", "height", "size", "mean", "stddev", "count", "coefficient"});
    for (std::size_t k = 0; k < incon.size(); ++k) {
        const auto& mg = t.merges[k];
        const auto& r = incon[k];
        w.row({std::to_string(n + k), std::to_string(mg.left), std::to_string(mg.right), util::format_double(mg.height),
               std::to_string(mg.size), util::format_double(r.mean), util::format_double(r.stddev),
               std::to_string(r.count), util::format_double(r.coefficient)});
    }
    util::write_file_atomic(artifact("dendrogram.json"), cluster::to_json(t).dump() + "\n");
    util::write_file_atomic(artifact("assignment.csv"), cluster::assignment_csv(a));
    util::write_file_atomic(artifact("inconsistency.csv"), w.str());
    util::write_file_atomic(artifact("cluster.json"), dump(info));
    spdlog::info("cluster: {} hunks, {} flat clusters, {} retained", n, a.raw_cluster_count, a.clusters.size());
    write_checkpoint(Stage::Cluster, {"dendrogram.json", "assignment.csv", "inconsistency.csv", "cluster.json"});
}

namespace {

cluster::ClusterAssignment load_assignment(const Pipeline& p)
{
    auto info = read_json(p.artifact("cluster.json"));
    return assignment_from_csv(util::read_file(p.artifact("assignment.csv")), info.at("min_size").get<std::size_t>(),
                               info.at("raw_clusters").get<std::size_t>());
}

} // namespace

void Pipeline::do_sample()
{
    auto a = load_assignment(*this);
    std::map<std::string, nlohmann::json> hunks;
    std::set<std::string> wanted;
    std::map<std::size_t, std::vector<std::string>> picked;
    for (const auto& [id, members] : a.clusters) {
        picked[id] = cluster::sample_cluster(a, id, std::min(cfg_.cluster.sample_size, members.size()), cfg_.seed);
        wanted.insert(picked[id].begin(), picked[id].end());
    }
    auto hunk_text = util::read_file(artifact("hunks.jsonl"));
    for (auto line : util::split_lines(hunk_text)) {
        if (util::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        auto id = j.at("id").get<std::string>();
        if (wanted.count(id)) hunks.emplace(id, std::move(j));
    }
    auto snap = ingest::Snapshot::read(snapshot_dir());
    std::map<std::string, const ingest::Snapshot::StoredChange*> by_change;
    for (const auto& c : snap.changes()) by_change.emplace(c.record.change_id, &c);

    util::CsvWriter csv;
    csv.row({"cluster_id", "hunk_id"});
    std::string md = "# Cluster samples\n";
    std::vector<Annotation> templ;
    for (const auto& [id, ids] : picked) {
        templ.push_back(Annotation{id, cluster::TriageLabel::Unreviewed, "", ""});
        md += "\n## Cluster " + std::to_string(id) + " (" + std::to_string(a.clusters.at(id).size()) + " hunks)\n";
        for (const auto& hid : ids) {
            csv.row({std::to_string(id), hid});
            md += "\n### " + hid + "\n\n";
            const auto& h = hunks.at(hid);
            auto change = by_change.find(h.at("change_id").get<std::string>());
            if (change == by_change.end()) continue;
            auto path = h.at("path").get<std::string>();
            for (const auto& f : change->second->files) {
                if (f.path != path) continue;
                auto pair = snap.file_pair(*change->second, f);
                const auto& w = h.at("window");
                md += "```python\n";
                for (const auto& l : source_lines(pair.after_text, w.at(0).get<int>(), w.at(2).get<int>())) md += l + "\n";
                md += "```\n";
                auto msg = util::split_lines(change->second->record.message);
                md += "Message: " + (msg.empty() ? std::string() : std::string(util::trim(msg[0]))) + "\n";
            }
        }
    }
    util::write_file_atomic(artifact("samples.csv"), csv.str());
    util::write_file_atomic(artifact("samples.md"), md);
    util::write_file_atomic(artifact("annotations.template.csv"), annotations_csv(templ));
    write_checkpoint(Stage::Sample, {"samples.csv", "samples.md", "annotations.template.csv"});
}

void Pipeline::do_annotate()
{
    auto a = load_assignment(*this);
    std::map<std::size_t, Annotation> by_id;
    for (const auto& [id, _] : a.clusters) by_id[id] = Annotation{id, cluster::TriageLabel::Unreviewed, "", ""};
    if (!cfg_.annotations.empty()) {
        if (!fs::exists(cfg_.annotations)) throw Error("annotation file not found: " + cfg_.annotations);
        std::set<std::size_t> seen;
        for (auto& row : parse_annotations(util::read_file(cfg_.annotations))) {
            if (!by_id.count(row.cluster)) throw cluster::UnknownCluster(row.cluster);
            if (!seen.insert(row.cluster).second)
                throw Error("cluster " + std::to_string(row.cluster) + " is annotated twice");
            by_id[row.cluster] = std::move(row);
        }
    }
    std::vector<Annotation> rows;
    for (auto& [_, r] : by_id) rows.push_back(std::move(r));
    util::write_file_atomic(artifact("annotations.csv"), annotations_csv(rows));
    write_checkpoint(Stage::Annotate, {"annotations.csv"});
}

void Pipeline::do_stats()
{
    auto a = load_assignment(*this);
    std::map<std::size_t, cluster::TriageLabel> triage;
    bool any_bugfix = false;
    for (const auto& row : parse_annotations(util::read_file(artifact("annotations.csv")))) {
        triage[row.cluster] = row.label;
        any_bugfix = any_bugfix || row.label == cluster::TriageLabel::BugFix;
    }
    nlohmann::json info;
    std::vector<std::string> outputs{"stats.json"};
    if (!any_bugfix) {
        info["withheld"] = true;
        info["reason"] = "no cluster is triaged as BUG-FIX";
    } else {
        auto ctx = context_dataset(features::vectors_from_jsonl(util::read_file(artifact("context.jsonl"))));
        stats::RelevanceConfig rc{cfg_.stats.alpha, cfg_.stats.bonferroni, cfg_.stats.control};
        auto m = stats::relevance_matrix(a, ctx, triage, rc);
        util::write_file_atomic(artifact("relevance.csv"), stats::relevance_csv(m));
        util::write_file_atomic(artifact("relevance_long.csv"), stats::relevance_long_csv(m));
        outputs.push_back("relevance.csv");
        outputs.push_back("relevance_long.csv");
        info["withheld"] = false;
        info["effective_alpha"] = m.effective_alpha;
        info["clusters"] = m.clusters;
        info["tests"] = m.tests.size();
    }
    util::write_file_atomic(artifact("stats.json"), dump(info));
    write_checkpoint(Stage::Stats, outputs);
}

void Pipeline::do_report()
{
    auto r = load_report();
    util::write_file_atomic(artifact("report.md"), render_report(r));
    write_checkpoint(Stage::Report, {"report.md"});
}

RunReport Pipeline::load_report() const
{
    RunReport r;
    auto ing = read_json(artifact("ingest.json"));
    r.changes_seen = ing.at("changes_seen").get<std::size_t>();
    auto ex = read_json(artifact("extract.json"));
    r.changes = ex.at("changes").get<std::size_t>();
    r.files = ex.at("files").get<std::size_t>();
    r.parsed = ex.at("parsed").get<std::size_t>();
    r.skipped = ex.at("skipped").get<std::size_t>();
    r.hunks = ex.at("hunks").get<std::size_t>();
    std::size_t total = 0;
    for (const auto& f : ex.at("per_file")) {
        FileCount fc{f.at("change_id").get<std::string>(), f.at("path").get<std::string>(), f.at("parsed").get<bool>(),
                     f.at("hunks").get<std::size_t>(), f.value("error", "")};
        total += fc.hunks;
        r.per_file.push_back(std::move(fc));
    }
    if (total != r.hunks || r.parsed + r.skipped != r.files)
        throw Error("extract counts do not reconcile");

    auto cl = read_json(artifact("cluster.json"));
    if (!cl.at("cophenetic").is_null()) r.cophenetic = cl["cophenetic"].get<double>();
    if (!cl.at("cutoff").is_null()) r.cutoff = cl["cutoff"].get<double>();
    r.cutoff_overridden = cl.at("cutoff_overridden").get<bool>();
    r.raw_clusters = cl.at("raw_clusters").get<std::size_t>();
    r.unclustered = cl.at("unclustered").get<std::size_t>();

    auto a = load_assignment(*this);
    auto m = features::matrix_from_csv(util::read_file(artifact("features.csv")));
    if (m.rows != a.rows) throw Error("feature rows differ from clustered rows");
    std::map<std::size_t, Annotation> notes;
    for (auto& row : parse_annotations(util::read_file(artifact("annotations.csv")))) notes[row.cluster] = row;

    for (const auto& [id, members] : a.clusters) {
        ClusterRow row;
        row.id = id;
        row.size = members.size();
        if (auto it = notes.find(id); it != notes.end()) {
            row.label = it->second.label;
            row.description = it->second.description;
            row.category = it->second.category;
        }
        std::vector<double> sums(m.columns.size(), 0.0);
        for (auto mr : members)
            for (const auto& [col, v] : m.cells[mr]) sums[col] += v;
        std::vector<std::size_t> order(m.columns.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sums[x] > sums[y]; });
        for (std::size_t k = 0; k < order.size() && k < 3 && sums[order[k]] > 0; ++k)
            row.signature.push_back(m.columns[order[k]]);
        ++r.triage_distribution[row.label];
        if (row.label == cluster::TriageLabel::BugFix)
            ++r.bugfix_categories[row.category.empty() ? "Uncategorized" : row.category];
        r.clusters.push_back(std::move(row));
    }
    std::sort(r.clusters.begin(), r.clusters.end(), [](const ClusterRow& x, const ClusterRow& y) { return x.id < y.id; });

    auto st = read_json(artifact("stats.json"));
    r.relevance_available = !st.at("withheld").get<bool>();
    if (r.relevance_available) {
        r.effective_alpha = st.at("effective_alpha").get<double>();
        auto table = util::parse_csv(util::read_file(artifact("relevance.csv")));
        for (std::size_t c = 1; c < table.at(0).size(); ++c) r.relevance_clusters.push_back(std::stoul(table[0][c]));
        for (std::size_t i = 1; i < table.size(); ++i) {
            std::vector<bool> cells;
            for (std::size_t c = 1; c < table[i].size(); ++c) cells.push_back(table[i][c] == "1");
            r.relevance_rows.emplace_back(table[i][0], std::move(cells));
        }
        r.relevance_tests_csv = util::read_file(artifact("relevance_long.csv"));
    }
    r.config_echo = cfg_.to_text();
    r.taxonomy_checksum = grammar::taxonomy().checksum();
    r.category_table_checksum = features::category_table().checksum();
    return r;
}

} // namespace fixctx::pipeline
