#include <fixctx/grammar/ast.hpp>

#include <algorithm>
#include <tuple>

#include <nlohmann/json.hpp>

namespace fixctx::grammar {

bool SourceSpan::encloses(const SourceSpan& o) const
{
    return std::tie(start_line, start_col) <= std::tie(o.start_line, o.start_col) &&
           std::tie(o.end_line, o.end_col) <= std::tie(end_line, end_col);
}

bool SourceSpan::valid() const
{
    return start_line >= 1 && start_col >= 0 && std::tie(start_line, start_col) <= std::tie(end_line, end_col);
}

std::size_t tree_height(const AstNode& node)
{
    std::size_t h = 0;
    for (const auto& c : node.children) h = std::max(h, tree_height(c) + 1);
    return h;
}

std::size_t tree_size(const AstNode& node)
{
    std::size_t n = 1;
    for (const auto& c : node.children) n += tree_size(c);
    return n;
}

RoleKind node_role(const AstNode& parent, std::string_view slot)
{
    return taxonomy().role(parent.kind, slot);
}

nlohmann::json to_json(const AstNode& node)
{
    nlohmann::json j;
    j["kind"] = kind_name(node.kind);
    if (node.role) j["role"] = role_name(*node.role);
    if (!node.text.empty()) j["text"] = node.text;
    j["span"] = {node.span.start_line, node.span.start_col, node.span.end_line, node.span.end_col};
    if (!node.children.empty()) {
        auto& arr = j["children"] = nlohmann::json::array();
        for (const auto& c : node.children) arr.push_back(to_json(c));
    }
    return j;
}

} // namespace fixctx::grammar
