#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <fixctx/pipeline/pipeline.hpp>
#include <fixctx/synth/synth.hpp>
#include <fixctx/util/csv.hpp>
#include <fixctx/util/text.hpp>

namespace fs = std::filesystem;
using namespace fixctx;

namespace {

constexpr int kUsage = 1;
constexpr int kStageFailure = 2;

/// Command-line overrides; unset options leave the loaded config untouched.
struct Overrides {
    std::string config_file;
    std::optional<std::string> source_kind, source, after, before, cache_dir, output, annotations, dialect, control,
        cutoff;
    std::vector<std::string> projects, branches;
    std::optional<std::size_t> concurrency, min_size, sample_size;
    std::optional<int> depth, max_gap;
    std::optional<unsigned> threads;
    std::optional<double> w_type, w_role, r, c, alpha;
    std::optional<std::uint64_t> seed;
    bool bonferroni = false;

    void attach(CLI::App* cmd)
    {
        cmd->add_option("--config", config_file, "Pipeline config (YAML); defaults to <output>/config.yaml");
        cmd->add_option("-o,--output", output, "Output directory");
        cmd->add_option("--source-kind", source_kind, "snapshot, git or review")
            ->check(CLI::IsMember({"snapshot", "git", "review"}));
        cmd->add_option("--source", source, "Snapshot directory, repository path or review server URL");
        cmd->add_option("--project", projects, "Project to ingest (repeatable)");
        cmd->add_option("--branch", branches, "Branch to ingest (repeatable)");
        cmd->add_option("--after", after, "First day of the window, YYYY-MM-DD");
        cmd->add_option("--before", before, "Day after the window, YYYY-MM-DD");
        cmd->add_option("--concurrency", concurrency, "Parallel file fetches")->check(CLI::PositiveNumber);
        cmd->add_option("--cache-dir", cache_dir, "Blob cache for the review source");
        cmd->add_option("--dialect", dialect, "py27 or py3");
        cmd->add_option("--max-gap", max_gap, "Line gap joining labeled nodes into one hunk");
        cmd->add_option("--w-type", w_type, "Node type weight");
        cmd->add_option("--w-role", w_role, "Node role weight");
        cmd->add_option("--decay", r, "Per-level decay r");
        cmd->add_option("--role-factor", c, "Role factor c");
        cmd->add_option("--depth", depth, "Inconsistency depth");
        cmd->add_option("--min-size", min_size, "Minimum retained cluster size");
        cmd->add_option("--cutoff", cutoff, "Inconsistency cutoff, or 'auto'");
        cmd->add_option("--sample-size", sample_size, "Hunks sampled per cluster");
        cmd->add_option("--threads", threads, "Distance workers (0 = all cores)");
        cmd->add_option("--alpha", alpha, "Significance level");
        cmd->add_option("--control", control, "exclude-cluster or whole-dataset")
            ->check(CLI::IsMember({"exclude-cluster", "whole-dataset"}));
        cmd->add_flag("--bonferroni", bonferroni, "Divide alpha by the number of features");
        cmd->add_option("--annotations", annotations, "Annotation CSV (cluster_id,label,description[,category])");
        cmd->add_option("--seed", seed, "Sampling seed");
    }

    pipeline::PipelineConfig resolve() const
    {
        pipeline::PipelineConfig cfg;
        std::string file = config_file;
        if (file.empty() && output) {
            auto persisted = (fs::path(*output) / "config.yaml").string();
            if (fs::exists(persisted)) file = persisted;
        }
        if (!file.empty()) cfg = pipeline::PipelineConfig::load(file);
        if (output) cfg.output_dir = *output;
        if (source_kind) cfg.source.kind = *source_kind;
        if (source) cfg.source.location = *source;
        if (!projects.empty()) cfg.source.projects = projects;
        if (!branches.empty()) cfg.source.branches = branches;
        if (after) cfg.source.after = *after;
        if (before) cfg.source.before = *before;
        if (concurrency) cfg.source.concurrency = *concurrency;
        if (cache_dir) cfg.source.cache_dir = *cache_dir;
        if (dialect) {
            try {
                cfg.extract.dialect = grammar::parse_dialect(*dialect);
            } catch (const Error& e) {
                throw pipeline::ConfigError(e.what());
            }
        }
        if (max_gap) cfg.extract.max_gap = *max_gap;
        if (w_type) cfg.weights.w_type = *w_type;
        if (w_role) cfg.weights.w_role = *w_role;
        if (r) cfg.weights.r = *r;
        if (c) cfg.weights.c = *c;
        if (depth) cfg.cluster.depth = *depth;
        if (min_size) cfg.cluster.min_size = *min_size;
        if (cutoff) {
            if (*cutoff == "auto") cfg.cluster.cutoff.reset();
            else {
                try {
                    cfg.cluster.cutoff = util::parse_double(*cutoff);
                } catch (const std::exception&) {
                    throw pipeline::ConfigError("--cutoff must be 'auto' or a number");
                }
            }
        }
        if (sample_size) cfg.cluster.sample_size = *sample_size;
        if (threads) cfg.cluster.threads = *threads;
        if (alpha) cfg.stats.alpha = *alpha;
        if (control)
            cfg.stats.control = *control == "whole-dataset" ? stats::ControlGroup::WholeDataset
                                                            : stats::ControlGroup::ExcludeCluster;
        if (bonferroni) cfg.stats.bonferroni = true;
        if (annotations) cfg.annotations = *annotations;
        if (seed) cfg.seed = *seed;
        cfg.validate();
        return cfg;
    }
};

void persist(const pipeline::PipelineConfig& cfg)
{
    fs::create_directories(cfg.output_dir);
    util::write_file_atomic((fs::path(cfg.output_dir) / "config.yaml").string(), cfg.to_text());
}

void print_summary(const pipeline::RunReport& r, const std::string& dir)
{
    std::cout << "hunks: " << r.hunks << "\nretained clusters: " << r.clusters.size()
              << "\nreport: " << (fs::path(dir) / "report.md").string() << "\n";
}

} // namespace

int main(int argc, char** argv)
{
    auto logger = spdlog::stderr_color_mt("fixctx");
    spdlog::set_default_logger(logger);
    spdlog::set_pattern("%^%l%$: %v");

    CLI::App app{"Mine recurring bug-fix patterns and their code context from change histories"};
    app.require_subcommand(1);
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

    Overrides ov;
    std::map<CLI::App*, pipeline::Stage> stage_cmds;
    const std::vector<std::pair<pipeline::Stage, std::string>> stages{
        {pipeline::Stage::Ingest, "Fetch and filter bug-fix changes into a snapshot"},
        {pipeline::Stage::Extract, "Parse file versions and extract hunks"},
        {pipeline::Stage::Features, "Compute change and context feature vectors"},
        {pipeline::Stage::Cluster, "Single-linkage clustering and inconsistency cut"},
        {pipeline::Stage::Sample, "Sample hunks per cluster for manual triage"},
        {pipeline::Stage::Annotate, "Merge the triage annotation CSV"},
        {pipeline::Stage::Stats, "Context relevance tests for BUG-FIX clusters"},
        {pipeline::Stage::Report, "Render the report"}};
    for (const auto& [stage, help] : stages) {
        auto* cmd = app.add_subcommand(std::string(pipeline::stage_name(stage)), help);
        ov.attach(cmd);
        stage_cmds[cmd] = stage;
    }
    auto* run = app.add_subcommand("run", "Run every stage, resuming from valid checkpoints");
    ov.attach(run);

    auto* exp = app.add_subcommand("export", "Copy a stage's datasets to a directory");
    ov.attach(exp);
    std::string export_stage, export_dest;
    exp->add_option("stage", export_stage, "Stage name")->required();
    exp->add_option("dest", export_dest, "Destination directory")->required();

    auto* show = app.add_subcommand("config", "Print the effective configuration");
    ov.attach(show);

    auto* syn = app.add_subcommand("synth", "Write a synthetic corpus snapshot with injected change families");
    std::string synth_out;
    bool demo = false;
    synth::CorpusSpec spec;
    syn->add_option("out", synth_out, "Snapshot directory")->required();
    syn->add_flag("--demo", demo, "The 300-change demo corpus");
    syn->add_option("--per-family", spec.per_family, "Instances per injected family");
    syn->add_option("--noise", spec.noise, "Bug-fix changes outside the families");
    syn->add_option("--non-fix", spec.non_fix, "Changes without bug-fix keywords");
    syn->add_option("--seed", spec.seed, "Generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        if (syn->parsed()) {
            if (demo) spec = synth::demo_spec();
            synth::write_corpus(spec, synth_out);
            std::cout << "wrote " << synth_out << "\n";
            return 0;
        }
        pipeline::PipelineConfig cfg;
        try {
            cfg = ov.resolve();
        } catch (const pipeline::ConfigError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return kUsage;
        }
        if (show->parsed()) {
            std::cout << cfg.to_text();
            return 0;
        }
        std::optional<pipeline::Stage> export_as;
        if (exp->parsed()) {
            export_as = pipeline::stage_from_name(export_stage);
            if (!export_as) {
                std::cerr << "error: unknown stage '" << export_stage << "'\n";
                return kUsage;
            }
        }
        persist(cfg);
        pipeline::Pipeline p(cfg);
        if (run->parsed()) {
            print_summary(p.run(), cfg.output_dir);
            return 0;
        }
        if (exp->parsed()) {
            for (const auto& name : p.export_dataset(*export_as, export_dest)) std::cout << name << "\n";
            return 0;
        }
        for (const auto& [cmd, stage] : stage_cmds) {
            if (!cmd->parsed()) continue;
            p.run_stage(stage);
            if (stage == pipeline::Stage::Report) print_summary(p.load_report(), cfg.output_dir);
            return 0;
        }
    } catch (const pipeline::MissingCheckpoint& e) {
        std::cerr << "error: " << e.what() << "; run that stage first\n";
        return kStageFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kStageFailure;
    }
    return kUsage;
}
