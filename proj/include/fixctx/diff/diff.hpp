#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include <fixctx/grammar/ast.hpp>

namespace fixctx::diff {

using grammar::AstNode;
using grammar::NodeKind;
using grammar::RoleKind;
using grammar::SourceSpan;

/// 1-based line range. An empty range (count 0) marks the insertion point:
/// the line that follows it.
struct LineRange {
    int start = 1;
    int count = 0;

    int end() const { return start + count; }  // exclusive
    friend bool operator==(const LineRange&, const LineRange&) = default;
};

struct EditBlock {
    LineRange removed;
    LineRange added;

    friend bool operator==(const EditBlock&, const EditBlock&) = default;
};

struct Alignment {
    std::vector<EditBlock> blocks;
    /// before line -> after line, 0 when the line was removed. Index 0 unused.
    std::vector<int> before_to_after;
    std::vector<int> after_to_before;
    /// True when the middle section was too large to align and was treated
    /// as wholly replaced.
    bool fallback = false;
};

/// Longest-common-subsequence line alignment. Deterministic, and swapping
/// the inputs swaps removed and added ranges exactly.
Alignment align_versions(std::string_view before_text, std::string_view after_text,
                         std::size_t max_cells = 16'000'000);

enum class ChangeLabel : std::uint8_t { Unchanged, Plus, Minus };

std::string_view label_name(ChangeLabel label);

struct DiffNode {
    NodeKind kind = NodeKind::Module;
    std::optional<RoleKind> role;
    ChangeLabel label = ChangeLabel::Unchanged;
    /// Span in the node's own version: before for Minus, after otherwise.
    SourceSpan span;
    /// Span projected onto after-version lines; equals `span` unless Minus.
    SourceSpan pos;
    std::string text;
    std::vector<DiffNode> children;
};

struct EnhancedAst {
    DiffNode root;
    std::string change_id;
    std::string path;
    std::size_t alignment_conflicts = 0;
    bool alignment_fallback = false;
};

EnhancedAst build_diff_ast(const AstNode& before, const AstNode& after, const Alignment& script,
                           std::string change_id = {}, std::string path = {});

/// Summary of an Unchanged ancestor of a hunk, computed on the after version.
struct ContextNode {
    NodeKind kind = NodeKind::Module;
    std::optional<RoleKind> role;
    SourceSpan span;
    std::string text;
    std::size_t child_count = 0;  ///< Unchanged + Plus children
    std::size_t arg_count = 0;    ///< Call: arguments excluding the callee; defs: parameters incl. * and **
    std::size_t body_count = 0;   ///< Module/ClassDef/FunctionDef body statements
    std::size_t bases_count = 0;  ///< ClassDef bases
};

struct Hunk {
    std::string id;
    std::string change_id;
    std::string path;
    std::size_t ordinal = 0;
    std::vector<DiffNode> labeled_roots;
    /// Nearest ancestor first, ending at Module.
    std::vector<ContextNode> context_chain;
    /// Projected after-version window covering the labeled roots.
    SourceSpan line_window;
};

/// Labeled roots grouped by the transitive `gap <= max_gap` line relation.
std::vector<Hunk> extract_hunks(const EnhancedAst& e, int max_gap = 3);

const ContextNode& scoped_ancestor(const Hunk& h);
const ContextNode& closest_ancestor(const Hunk& h);

std::size_t tree_height(const DiffNode& n);
std::size_t hunk_height(const Hunk& h);

nlohmann::json to_json(const DiffNode& n);
DiffNode diff_node_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Hunk& h);
Hunk hunk_from_json(const nlohmann::json& j);

} // namespace fixctx::diff
