#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <fixctx/cluster/cluster.hpp>
#include <fixctx/features/context.hpp>

namespace fixctx::stats {

struct DunnResult {
    std::string feature;
    double z = 0;
    double p = 1;
    bool relevant = false;
    bool zero_variance = false;  ///< all pooled values identical; z = 0, p = 1
};

/// Two-group Dunn test on the joint midranks of both samples.
DunnResult dunn_test(const std::vector<double>& cluster, const std::vector<double>& control, double alpha = 0.05);

/// Two-sided standard normal tail probability 2(1 - Phi(|z|)).
double two_sided_p(double z);

struct Summary {
    double mean = 0;
    double cv = 0;
    bool cv_defined = true;  ///< false when the mean is 0
    std::array<double, 5> quantiles{};  ///< q05, q25, q50, q75, q95
};

/// Mean, population coefficient of variation and linear-interpolation quantiles.
Summary summary_stats(std::vector<double> values);
double quantile(const std::vector<double>& sorted, double q);

/// Dense per-feature columns over all hunks.
struct ContextDataset {
    std::vector<std::string> rows;
    std::map<std::string, std::vector<double>> columns;

    static ContextDataset from_vectors(const std::vector<features::ContextVector>& vs);
};

enum class ControlGroup { ExcludeCluster, WholeDataset };

struct RelevanceConfig {
    double alpha = 0.05;
    bool bonferroni = false;
    ControlGroup control = ControlGroup::ExcludeCluster;
};

struct FeatureTest {
    std::size_t cluster = 0;
    DunnResult dunn;
    Summary summary;  ///< of the cluster members' values
    features::Category category = features::Category::Globals;
};

struct RelevanceCell {
    bool relevant = false;
    std::vector<std::string> relevant_features;
    /// Summary of the cell's most significant feature, if any feature was tested.
    std::optional<std::string> lead_feature;
    Summary lead_summary;
};

struct RelevanceMatrix {
    std::vector<std::size_t> clusters;  ///< BUG-FIX clusters, ascending
    /// [category][cluster column]
    std::array<std::vector<RelevanceCell>, features::kCategoryCount> cells;
    std::vector<FeatureTest> tests;  ///< ordered by (cluster, feature)
    double effective_alpha = 0.05;
};

RelevanceMatrix relevance_matrix(const cluster::ClusterAssignment& a, const ContextDataset& ctx,
                                 const std::map<std::size_t, cluster::TriageLabel>& triage,
                                 const RelevanceConfig& cfg = {},
                                 const features::CategoryTable& categories = features::category_table());

std::string relevance_csv(const RelevanceMatrix& m);
std::string relevance_long_csv(const RelevanceMatrix& m);

} // namespace fixctx::stats
