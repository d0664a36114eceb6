#include <fixctx/pipeline/pipeline.hpp>

#include <cmath>
#include <set>

#include <yaml-cpp/yaml.h>

#include <fixctx/util/text.hpp>

namespace fixctx::pipeline {

namespace {

using Keys = std::set<std::string>;

void check_keys(const YAML::Node& node, const std::string& where, const Keys& allowed)
{
    if (!node.IsMap()) throw ConfigError(where + ": expected a mapping");
    for (const auto& kv : node) {
        auto key = kv.first.as<std::string>();
        if (!allowed.count(key)) throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where)
{
    auto v = node[key];
    if (!v || v.IsNull()) return;
    try {
        out = v.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError("bad value for '" + where + "." + key + "'");
    }
}

void read_list(const YAML::Node& node, const char* key, std::vector<std::string>& out, const std::string& where)
{
    auto v = node[key];
    if (!v || v.IsNull()) return;
    if (!v.IsSequence()) throw ConfigError("'" + where + "." + key + "' must be a list");
    out.clear();
    for (const auto& item : v) out.push_back(item.as<std::string>());
}

std::string control_name(stats::ControlGroup g)
{
    return g == stats::ControlGroup::WholeDataset ? "whole-dataset" : "exclude-cluster";
}

void emit_list(YAML::Emitter& e, const char* key, const std::vector<std::string>& values)
{
    e << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& v : values) e << v;
    e << YAML::EndSeq;
}

void emit_double(YAML::Emitter& e, const char* key, double v)
{
    e << YAML::Key << key << YAML::Value << util::format_double(v);
}

} // namespace

PipelineConfig PipelineConfig::parse(std::string_view text)
{
    YAML::Node root;
    try {
        root = YAML::Load(std::string(text));
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("config is not valid YAML: ") + e.what());
    }
    if (!root.IsMap()) throw ConfigError("config must be a mapping");
    check_keys(root, "", {"version", "source", "filters", "extract", "weights", "cluster", "stats", "output_dir",
                          "annotations", "seed"});
    if (!root["version"]) throw ConfigError("config lacks 'version'");
    int version = 0;
    read(root, "version", version, "");
    if (version != kVersion)
        throw ConfigError("unsupported config version " + std::to_string(version) + " (expected " +
                          std::to_string(kVersion) + ")");

    PipelineConfig c;
    if (auto s = root["source"]) {
        check_keys(s, "source", {"kind", "location", "projects", "branches", "after", "before", "concurrency", "cache_dir"});
        read(s, "kind", c.source.kind, "source");
        read(s, "location", c.source.location, "source");
        read_list(s, "projects", c.source.projects, "source");
        read_list(s, "branches", c.source.branches, "source");
        read(s, "after", c.source.after, "source");
        read(s, "before", c.source.before, "source");
        read(s, "concurrency", c.source.concurrency, "source");
        read(s, "cache_dir", c.source.cache_dir, "source");
    }
    if (auto f = root["filters"]) {
        check_keys(f, "filters", {"keywords", "word_bounded", "test_prefixes", "test_suffixes", "extensions"});
        read_list(f, "keywords", c.filters.keywords, "filters");
        read(f, "word_bounded", c.filters.word_bounded, "filters");
        read_list(f, "test_prefixes", c.filters.test_prefixes, "filters");
        read_list(f, "test_suffixes", c.filters.test_suffixes, "filters");
        read_list(f, "extensions", c.filters.extensions, "filters");
    }
    if (auto x = root["extract"]) {
        check_keys(x, "extract", {"dialect", "max_gap"});
        std::string dialect(grammar::dialect_tag(c.extract.dialect));
        read(x, "dialect", dialect, "extract");
        try {
            c.extract.dialect = grammar::parse_dialect(dialect);
        } catch (const Error& e) {
            throw ConfigError(e.what());
        }
        read(x, "max_gap", c.extract.max_gap, "extract");
    }
    if (auto w = root["weights"]) {
        check_keys(w, "weights", {"w_type", "w_role", "r", "c"});
        read(w, "w_type", c.weights.w_type, "weights");
        read(w, "w_role", c.weights.w_role, "weights");
        read(w, "r", c.weights.r, "weights");
        read(w, "c", c.weights.c, "weights");
    }
    if (auto k = root["cluster"]) {
        check_keys(k, "cluster", {"metric", "linkage", "depth", "min_size", "cutoff", "sample_size", "threads"});
        read(k, "metric", c.cluster.metric, "cluster");
        read(k, "linkage", c.cluster.linkage, "cluster");
        read(k, "depth", c.cluster.depth, "cluster");
        read(k, "min_size", c.cluster.min_size, "cluster");
        std::string cutoff = "auto";
        read(k, "cutoff", cutoff, "cluster");
        if (cutoff != "auto") {
            try {
                c.cluster.cutoff = k["cutoff"].as<double>();
            } catch (const YAML::Exception&) {
                throw ConfigError("'cluster.cutoff' must be 'auto' or a number");
            }
        }
        read(k, "sample_size", c.cluster.sample_size, "cluster");
        read(k, "threads", c.cluster.threads, "cluster");
    }
    if (auto s = root["stats"]) {
        check_keys(s, "stats", {"alpha", "control", "bonferroni"});
        read(s, "alpha", c.stats.alpha, "stats");
        std::string control = control_name(c.stats.control);
        read(s, "control", control, "stats");
        if (control == "exclude-cluster") c.stats.control = stats::ControlGroup::ExcludeCluster;
        else if (control == "whole-dataset") c.stats.control = stats::ControlGroup::WholeDataset;
        else throw ConfigError("'stats.control' must be exclude-cluster or whole-dataset");
        read(s, "bonferroni", c.stats.bonferroni, "stats");
    }
    read(root, "output_dir", c.output_dir, "");
    read(root, "annotations", c.annotations, "");
    read(root, "seed", c.seed, "");
    c.validate();
    return c;
}

PipelineConfig PipelineConfig::load(const std::string& path)
{
    std::string text;
    try {
        text = util::read_file(path);
    } catch (const std::exception& e) {
        throw ConfigError("cannot read config '" + path + "': " + e.what());
    }
    return parse(text);
}

void PipelineConfig::validate() const
{
    static const std::set<std::string> kinds{"snapshot", "git", "review"};
    if (!kinds.count(source.kind)) throw ConfigError("'source.kind' must be snapshot, git or review");
    if (source.concurrency == 0) throw ConfigError("'source.concurrency' must be positive");
    if (extract.max_gap < 0) throw ConfigError("'extract.max_gap' must be non-negative");
    try {
        weights.validate();
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    if (cluster.metric != "euclidean") throw ConfigError("'cluster.metric' supports only euclidean");
    if (cluster.linkage != "single") throw ConfigError("'cluster.linkage' supports only single");
    if (cluster.depth < 1) throw ConfigError("'cluster.depth' must be at least 1");
    if (cluster.min_size < 1) throw ConfigError("'cluster.min_size' must be at least 1");
    if (cluster.cutoff && !std::isfinite(*cluster.cutoff)) throw ConfigError("'cluster.cutoff' must be finite");
    if (!(stats.alpha > 0 && stats.alpha < 1)) throw ConfigError("'stats.alpha' must lie in (0, 1)");
    if (output_dir.empty()) throw ConfigError("'output_dir' must not be empty");
}

std::string PipelineConfig::to_text() const
{
    YAML::Emitter e;
    e << YAML::BeginMap;
    e << YAML::Key << "version" << YAML::Value << kVersion;

    e << YAML::Key << "source" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "kind" << YAML::Value << source.kind;
    e << YAML::Key << "location" << YAML::Value << source.location;
    emit_list(e, "projects", source.projects);
    emit_list(e, "branches", source.branches);
    e << YAML::Key << "after" << YAML::Value << source.after;
    e << YAML::Key << "before" << YAML::Value << source.before;
    e << YAML::Key << "concurrency" << YAML::Value << source.concurrency;
    e << YAML::Key << "cache_dir" << YAML::Value << source.cache_dir;
    e << YAML::EndMap;

    e << YAML::Key << "filters" << YAML::Value << YAML::BeginMap;
    emit_list(e, "keywords", filters.keywords);
    e << YAML::Key << "word_bounded" << YAML::Value << filters.word_bounded;
    emit_list(e, "test_prefixes", filters.test_prefixes);
    emit_list(e, "test_suffixes", filters.test_suffixes);
    emit_list(e, "extensions", filters.extensions);
    e << YAML::EndMap;

    e << YAML::Key << "extract" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "dialect" << YAML::Value << std::string(grammar::dialect_tag(extract.dialect));
    e << YAML::Key << "max_gap" << YAML::Value << extract.max_gap;
    e << YAML::EndMap;

    e << YAML::Key << "weights" << YAML::Value << YAML::BeginMap;
    emit_double(e, "w_type", weights.w_type);
    emit_double(e, "w_role", weights.w_role);
    emit_double(e, "r", weights.r);
    emit_double(e, "c", weights.c);
    e << YAML::EndMap;

    e << YAML::Key << "cluster" << YAML::Value << YAML::BeginMap;
    e << YAML::Key << "metric" << YAML::Value << cluster.metric;
    e << YAML::Key << "linkage" << YAML::Value << cluster.linkage;
    e << YAML::Key << "depth" << YAML::Value << cluster.depth;
    e << YAML::Key << "min_size" << YAML::Value << cluster.min_size;
    e << YAML::Key << "cutoff" << YAML::Value << (cluster.cutoff ? util::format_double(*cluster.cutoff) : "auto");
    e << YAML::Key << "sample_size" << YAML::Value << cluster.sample_size;
    e << YAML::Key << "threads" << YAML::Value << cluster.threads;
    e << YAML::EndMap;

    e << YAML::Key << "stats" << YAML::Value << YAML::BeginMap;
    emit_double(e, "alpha", stats.alpha);
    e << YAML::Key << "control" << YAML::Value << control_name(stats.control);
    e << YAML::Key << "bonferroni" << YAML::Value << stats.bonferroni;
    e << YAML::EndMap;

    e << YAML::Key << "output_dir" << YAML::Value << output_dir;
    e << YAML::Key << "annotations" << YAML::Value << annotations;
    e << YAML::Key << "seed" << YAML::Value << seed;
    e << YAML::EndMap;
    return std::string(e.c_str()) + "\n";
}

} // namespace fixctx::pipeline
