#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fixctx/cluster/cluster.hpp>
#include <fixctx/error.hpp>
#include <fixctx/features/features.hpp>
#include <fixctx/grammar/parser.hpp>
#include <fixctx/ingest/ingest.hpp>
#include <fixctx/stats/stats.hpp>

namespace fixctx::pipeline {

class ConfigError : public Error {
public:
    using Error::Error;
};

struct SourceConfig {
    /// snapshot: read an existing snapshot directory; git: local repository;
    /// review: review REST API base URL.
    std::string kind = "snapshot";
    std::string location;
    std::vector<std::string> projects;
    std::vector<std::string> branches;
    std::string after;
    std::string before;
    std::size_t concurrency = 4;
    std::string cache_dir;
};

struct FilterConfig {
    std::vector<std::string> keywords{"bug", "fix", "fault", "fail", "patch"};
    bool word_bounded = false;
    std::vector<std::string> test_prefixes{"test"};
    std::vector<std::string> test_suffixes{"_test"};
    std::vector<std::string> extensions{".py"};
};

struct ExtractConfig {
    grammar::Dialect dialect = grammar::Dialect::Py27;
    int max_gap = 3;
};

struct ClusterConfig {
    std::string metric = "euclidean";
    std::string linkage = "single";
    int depth = 2;
    std::size_t min_size = 10;
    std::optional<double> cutoff;  ///< overrides the histogram rule
    std::size_t sample_size = 5;
    unsigned threads = 0;
};

struct StatsConfig {
    double alpha = 0.05;
    stats::ControlGroup control = stats::ControlGroup::ExcludeCluster;
    bool bonferroni = false;
};

struct PipelineConfig {
    static constexpr int kVersion = 1;

    SourceConfig source;
    FilterConfig filters;
    ExtractConfig extract;
    features::WeightConfig weights;
    ClusterConfig cluster;
    StatsConfig stats;
    std::string output_dir = "fixctx-out";
    std::string annotations;  ///< annotation CSV; empty = none
    std::uint64_t seed = 42;

    /// Throws ConfigError on unknown keys, bad values or a version mismatch.
    static PipelineConfig parse(std::string_view yaml);
    static PipelineConfig load(const std::string& path);
    /// Canonical YAML; parse(to_text()) reproduces the config.
    std::string to_text() const;
    void validate() const;
};

enum class Stage { Ingest, Extract, Features, Cluster, Sample, Annotate, Stats, Report };

inline constexpr std::size_t kStageCount = 8;

std::string_view stage_name(Stage s);
std::optional<Stage> stage_from_name(std::string_view name);
std::vector<Stage> stage_dependencies(Stage s);

class MissingCheckpoint : public Error {
public:
    explicit MissingCheckpoint(Stage s)
        : Error("no valid checkpoint for stage '" + std::string(stage_name(s)) + "'"), stage(s)
    {
    }
    Stage stage;
};

class StageFailure : public Error {
public:
    StageFailure(Stage s, const std::string& what)
        : Error("stage '" + std::string(stage_name(s)) + "' failed: " + what), stage(s)
    {
    }
    Stage stage;
};

struct Annotation {
    std::size_t cluster = 0;
    cluster::TriageLabel label = cluster::TriageLabel::Unreviewed;
    std::string description;
    std::string category;  ///< free-text change category, e.g. "Function call"
};

/// CSV with header `cluster_id,label,description[,category]`.
std::vector<Annotation> parse_annotations(std::string_view csv);
std::string annotations_csv(const std::vector<Annotation>& rows);

struct ClusterRow {
    std::size_t id = 0;
    std::size_t size = 0;
    cluster::TriageLabel label = cluster::TriageLabel::Unreviewed;
    std::string description;
    std::string category;
    /// Highest-mean change features of the members.
    std::vector<std::string> signature;
};

struct FileCount {
    std::string change_id;
    std::string path;
    bool parsed = false;
    std::size_t hunks = 0;
    std::string error;
};

struct RunReport {
    std::size_t changes_seen = 0;
    std::size_t changes = 0;
    std::size_t files = 0;
    std::size_t parsed = 0;
    std::size_t skipped = 0;
    std::size_t hunks = 0;
    std::vector<FileCount> per_file;

    std::optional<double> cophenetic;  ///< empty when undefined
    std::optional<double> cutoff;
    bool cutoff_overridden = false;
    std::size_t raw_clusters = 0;
    std::size_t unclustered = 0;
    std::vector<ClusterRow> clusters;
    std::map<cluster::TriageLabel, std::size_t> triage_distribution;
    std::map<std::string, std::size_t> bugfix_categories;

    bool relevance_available = false;
    std::vector<std::size_t> relevance_clusters;
    /// [category name] -> per BUG-FIX cluster column, relevant or not.
    std::vector<std::pair<std::string, std::vector<bool>>> relevance_rows;
    std::string relevance_tests_csv;  ///< long-format per-feature tests
    double effective_alpha = 0.05;

    std::string config_echo;
    std::string taxonomy_checksum;
    std::string category_table_checksum;
};

/// Self-contained Markdown document.
std::string render_report(const RunReport& r);

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg);

    /// Injects a change source, replacing the one built from the config.
    void set_source(std::unique_ptr<ingest::ChangeSource> source) { source_ = std::move(source); }

    /// Runs one stage; its dependencies must hold valid checkpoints. A
    /// stage whose checkpoint is already valid is not re-executed.
    void run_stage(Stage s);
    /// Every stage in order, resuming from valid checkpoints.
    RunReport run();

    bool checkpoint_valid(Stage s) const;
    /// Copies the stage's exported files into `dest`; returns their names.
    std::vector<std::string> export_dataset(Stage s, const std::string& dest) const;
    RunReport load_report() const;

    const PipelineConfig& config() const { return cfg_; }
    /// Stages executed (not resumed) by this object, in order.
    const std::vector<Stage>& executed() const { return executed_; }
    std::string artifact(std::string_view name) const;

private:
    std::string input_digest(Stage s) const;
    std::string checkpoint_digest(Stage s) const;
    void write_checkpoint(Stage s, const std::vector<std::string>& outputs) const;
    void execute(Stage s);

    void do_ingest();
    void do_extract();
    void do_features();
    void do_cluster();
    void do_sample();
    void do_annotate();
    void do_stats();
    void do_report();

    std::string snapshot_dir() const;

    PipelineConfig cfg_;
    std::unique_ptr<ingest::ChangeSource> source_;
    std::vector<Stage> executed_;
};

} // namespace fixctx::pipeline
