#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fixctx/diff/diff.hpp>
#include <fixctx/error.hpp>

namespace fixctx::features {

struct WeightConfig {
    double w_type = 1e15;
    double w_role = 1e15;
    double r = 10.0;
    double c = 0.1;

    /// Throws fixctx::Error unless every weight is finite and strictly positive.
    void validate() const;
};

enum class Direction { Add, Rem };

/// Decoded feature name: `<add|rem>_<Kind>` or `<add|rem>_<Role>_<Kind>`.
struct FeatureId {
    Direction direction = Direction::Add;
    grammar::NodeKind kind = grammar::NodeKind::Module;
    std::optional<grammar::RoleKind> role;

    std::string name() const;
    static FeatureId parse(std::string_view name);
};

/// Sparse map feature name -> value; no zero entries.
struct FeatureVector {
    std::string hunk_id;
    std::map<std::string, double> entries;
};

FeatureVector hunk_feature_vector(const diff::Hunk& h, const WeightConfig& w = {});

class DuplicateHunkId : public Error {
public:
    explicit DuplicateHunkId(const std::string& id) : Error("duplicate hunk id " + id) {}
};

/// Rows in input order; columns are the occurring feature names, sorted.
struct FeatureMatrix {
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    /// Per row: (column index, value), column-sorted.
    std::vector<std::vector<std::pair<std::size_t, double>>> cells;

    double at(std::size_t row, std::size_t col) const;
    std::vector<double> dense_row(std::size_t row) const;
};

FeatureMatrix assemble_matrix(const std::vector<FeatureVector>& vectors);

std::string to_csv(const FeatureMatrix& m);
FeatureMatrix matrix_from_csv(std::string_view csv);
std::string to_jsonl(const std::vector<FeatureVector>& vectors);
std::vector<FeatureVector> vectors_from_jsonl(std::string_view text);

} // namespace fixctx::features
