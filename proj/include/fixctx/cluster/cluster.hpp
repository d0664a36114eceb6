#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include <fixctx/error.hpp>
#include <fixctx/features/features.hpp>

namespace fixctx::cluster {

/// Symmetric pairwise distance over `size()` points.
class Distances {
public:
    virtual ~Distances() = default;
    virtual std::size_t size() const = 0;
    virtual double operator()(std::size_t i, std::size_t j) const = 0;
};

/// Euclidean distance evaluated on demand from sparse rows; O(nnz) memory.
class SparseEuclidean final : public Distances {
public:
    explicit SparseEuclidean(const features::FeatureMatrix& m);
    SparseEuclidean(std::vector<std::vector<std::pair<std::size_t, double>>> rows);

    std::size_t size() const override { return rows_.size(); }
    double operator()(std::size_t i, std::size_t j) const override;

private:
    std::vector<std::vector<std::pair<std::size_t, double>>> rows_;
};

/// Upper triangle stored row-major, i < j.
class CondensedDistances final : public Distances {
public:
    CondensedDistances() = default;
    CondensedDistances(std::size_t n, std::vector<double> values);

    std::size_t size() const override { return n_; }
    double operator()(std::size_t i, std::size_t j) const override;
    const std::vector<double>& values() const { return values_; }
    static std::size_t index(std::size_t n, std::size_t i, std::size_t j);

private:
    std::size_t n_ = 0;
    std::vector<double> values_;
};

/// Euclidean distances over the matrix rows, computed over row blocks on
/// `threads` workers (0 = hardware concurrency).
CondensedDistances pairwise_distances(const features::FeatureMatrix& m, unsigned threads = 0);
CondensedDistances materialize(const Distances& d);

struct Merge {
    std::size_t left = 0;   ///< cluster id; leaves are 0..n-1, merge k creates n+k
    std::size_t right = 0;  ///< left < right
    double height = 0;
    std::size_t size = 0;
};

struct Dendrogram {
    std::size_t leaves = 0;
    std::vector<Merge> merges;

    /// Leaf ids under cluster `id`, ascending.
    std::vector<std::size_t> members(std::size_t id) const;
};

/// Single linkage. Among equal-height candidate merges the pair of current
/// cluster ids that is lexicographically smallest is merged first.
Dendrogram single_linkage(const Distances& d);

struct Cophenetic {
    double coefficient = 0;
    bool degenerate = false;  ///< correlation undefined; coefficient is NaN
};

Cophenetic cophenetic_coefficient(const Dendrogram& t, const Distances& d);
/// Height of the merge at which i and j first share a cluster.
std::vector<double> cophenetic_distances(const Dendrogram& t);

struct InconsistencyRow {
    double mean = 0;
    double stddev = 0;
    std::size_t count = 0;
    double coefficient = 0;
};

/// One row per merge; each statistic covers the merge and its non-leaf
/// descendants less than `depth` levels below it. Sample standard deviation.
std::vector<InconsistencyRow> inconsistency(const Dendrogram& t, int depth = 2);
std::vector<double> inconsistency_coefficients(const Dendrogram& t, int depth = 2);

enum class BinRule { FreedmanDiaconis, Scott };

struct Histogram {
    BinRule rule = BinRule::FreedmanDiaconis;
    double width = 0;
    std::vector<double> edges;  ///< bins + 1 edges
    std::vector<std::size_t> counts;
};

class AllZero : public Error {
public:
    AllZero() : Error("every inconsistency coefficient is zero; cutoff undefined") {}
};

/// Fixed-width histogram; width from Freedman-Diaconis, or Scott when the
/// interquartile range is zero.
Histogram auto_histogram(const std::vector<double>& values);
/// Left edge of the highest nonempty bin.
double select_cutoff(const std::vector<double>& coefs, Histogram* histogram = nullptr);

inline constexpr std::size_t kUnclustered = 0;

struct ClusterAssignment {
    std::vector<std::string> rows;
    /// Per row: retained cluster id (1-based) or kUnclustered.
    std::vector<std::size_t> cluster_of;
    /// Retained cluster id -> member row indices, ascending.
    std::map<std::size_t, std::vector<std::size_t>> clusters;
    /// Flat clusters before the size filter.
    std::size_t raw_cluster_count = 0;
    std::size_t min_size = 1;
};

/// Flat clusters are the maximal subtrees whose links all have coefficient
/// < c (single leaves otherwise). Clusters smaller than `min_size` become
/// unclustered; the rest are numbered by decreasing size, then first row.
ClusterAssignment cut_clusters(const Dendrogram& t, const std::vector<double>& coefs, double c, std::size_t min_size,
                               std::vector<std::string> row_ids = {});

class UnknownCluster : public Error {
public:
    explicit UnknownCluster(std::size_t id) : Error("unknown cluster " + std::to_string(id)) {}
};

std::vector<std::string> sample_cluster(const ClusterAssignment& a, std::size_t cluster_id, std::size_t n,
                                        std::uint64_t seed);

enum class TriageLabel { BugFix, FixInduced, Refactoring, Unreviewed };

std::string_view triage_name(TriageLabel l);
std::optional<TriageLabel> triage_from_name(std::string_view name);

nlohmann::json to_json(const Dendrogram& t);
Dendrogram dendrogram_from_json(const nlohmann::json& j);
std::string assignment_csv(const ClusterAssignment& a);

} // namespace fixctx::cluster
