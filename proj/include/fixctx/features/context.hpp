#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <fixctx/diff/diff.hpp>
#include <fixctx/error.hpp>
#include <fixctx/features/features.hpp>

namespace fixctx::features {

/// Kinds that can be reported as the closest enclosing construct.
inline constexpr std::array<grammar::NodeKind, 15> kAncestorKinds = {
    grammar::NodeKind::For,       grammar::NodeKind::While,    grammar::NodeKind::If,
    grammar::NodeKind::Assign,    grammar::NodeKind::ClassDef, grammar::NodeKind::FunctionDef,
    grammar::NodeKind::Module,    grammar::NodeKind::TryExcept, grammar::NodeKind::TryFinally,
    grammar::NodeKind::Attribute, grammar::NodeKind::BinOp,    grammar::NodeKind::BoolOp,
    grammar::NodeKind::Call,      grammar::NodeKind::Return,   grammar::NodeKind::Subscript,
};

struct ScopedFeatures {
    std::size_t class_size = 0;        ///< ctx_ClassDef_size (body statements)
    std::size_t class_bases_size = 0;  ///< ctx_ClassDef_bases_size
    std::size_t function_args_size = 0;
    std::size_t function_body_size = 0;
    bool function_private = false;
    std::size_t module_size = 0;
};

struct AncestorFeatures {
    grammar::NodeKind including = grammar::NodeKind::Module;
    std::size_t node_size = 0;
};

struct ContextVector {
    std::string hunk_id;
    ScopedFeatures scoped;
    AncestorFeatures ancestor;
    /// ctx_inner_<add|rem>_<kind|role>_count -> count; no zero entries.
    std::map<std::string, std::size_t> inner;

    /// Every field by its exported name: the 6 scoped fields, the 15 one-hot
    /// flags and the ancestor size (zeros included), then the inner counts.
    std::map<std::string, double> named() const;
    /// `named()` without zero entries.
    FeatureVector sparse() const;
};

ScopedFeatures outer_scoped_features(const diff::Hunk& h);
AncestorFeatures closest_ancestor_features(const diff::Hunk& h);
std::map<std::string, std::size_t> inner_context_features(const diff::Hunk& h);
ContextVector context_vector(const diff::Hunk& h);

enum class Category : std::uint8_t {
    ModuleSize, ClassSize, FunctionSize, ClosestDefinition, ClosestException, ClosestIteration,
    ClosestSelection, ClosestAttribute, ClosestCall, ClosestAssign, ClosestSize, AssignOperators,
    ControlFlow, DataContainers, Function, Globals, SpecialOperators,
};
inline constexpr std::size_t kCategoryCount = 17;

std::string_view category_name(Category c);
std::optional<Category> category_from_name(std::string_view name);

class UnmappedFeature : public Error {
public:
    explicit UnmappedFeature(const std::string& name) : Error("context feature without category: " + name) {}
};

/// Mapping from context feature names to categories, loaded from a table of
/// `field|kind|role <name> = <Category>` lines. Roles missing from the table
/// fall back to their parent kind's category.
class CategoryTable {
public:
    static CategoryTable parse(std::string_view text);

    Category categorize(std::string_view feature) const;
    const std::string& version() const { return version_; }
    const std::string& checksum() const { return checksum_; }

private:
    std::unordered_map<std::string, Category> fields_;
    std::array<std::optional<Category>, grammar::kNodeKindCount> kinds_{};
    std::unordered_map<std::uint16_t, Category> roles_;
    std::string version_;
    std::string checksum_;
};

const CategoryTable& category_table();
std::string_view category_table_text();

/// Every context feature name the extractor can emit.
std::vector<std::string> all_context_feature_names();

} // namespace fixctx::features
