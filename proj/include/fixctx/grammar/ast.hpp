#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include <fixctx/grammar/taxonomy.hpp>

namespace fixctx::grammar {

/// Lines are 1-based; columns are 0-based byte offsets.
struct SourceSpan {
    int start_line = 1;
    int start_col = 0;
    int end_line = 1;
    int end_col = 0;

    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;

    bool encloses(const SourceSpan& other) const;
    bool valid() const;
};

/// Canonical syntax tree node. `text` carries the lexeme of identifier and
/// literal leaves, and the identifier attribute of interior nodes that have
/// one (def/class names, attribute names, keyword names, import aliases).
struct AstNode {
    NodeKind kind = NodeKind::Module;
    std::optional<RoleKind> role;
    SourceSpan span;
    std::string text;
    std::vector<AstNode> children;

    bool is_leaf() const { return children.empty(); }
};

std::size_t tree_height(const AstNode& node);
std::size_t tree_size(const AstNode& node);

RoleKind node_role(const AstNode& parent, std::string_view slot);

nlohmann::json to_json(const AstNode& node);

} // namespace fixctx::grammar
