#include <fixctx/diff/diff.hpp>

#include <algorithm>
#include <tuple>

#include <nlohmann/json.hpp>

namespace fixctx::diff {

namespace {

struct RootRef {
    const DiffNode* node;
    std::vector<std::size_t> path;
};

void collect_roots(const DiffNode& n, std::vector<std::size_t>& path, std::vector<RootRef>& out)
{
    for (std::size_t i = 0; i < n.children.size(); ++i) {
        const auto& c = n.children[i];
        path.push_back(i);
        if (c.label != ChangeLabel::Unchanged) out.push_back(RootRef{&c, path});
        else collect_roots(c, path, out);
        path.pop_back();
    }
}

RoleKind role_of(NodeKind k, std::string_view slot)
{
    return grammar::taxonomy().role(k, slot);
}

std::size_t count_role(const DiffNode& n, RoleKind r)
{
    std::size_t c = 0;
    for (const auto& ch : n.children) {
        if (ch.label != ChangeLabel::Minus && ch.role == r) ++c;
    }
    return c;
}

std::size_t parameter_count(const DiffNode& def)
{
    for (const auto& ch : def.children) {
        if (ch.kind != NodeKind::arguments || ch.label == ChangeLabel::Minus) continue;
        std::size_t n = count_role(ch, role_of(NodeKind::arguments, "args"));
        if (!ch.text.empty()) n += static_cast<std::size_t>(std::count(ch.text.begin(), ch.text.end(), ' ')) + 1;
        return n;
    }
    return 0;
}

ContextNode summarize(const DiffNode& n)
{
    ContextNode c;
    c.kind = n.kind;
    c.role = n.role;
    c.span = n.span;
    c.text = n.text;
    for (const auto& ch : n.children) {
        if (ch.label != ChangeLabel::Minus) ++c.child_count;
    }
    switch (n.kind) {
    case NodeKind::Call:
        c.arg_count = count_role(n, role_of(NodeKind::Call, "args")) + count_role(n, role_of(NodeKind::Call, "keywords")) +
                      count_role(n, role_of(NodeKind::Call, "starargs")) + count_role(n, role_of(NodeKind::Call, "kwargs"));
        break;
    case NodeKind::FunctionDef:
        c.arg_count = parameter_count(n);
        c.body_count = count_role(n, role_of(NodeKind::FunctionDef, "body"));
        break;
    case NodeKind::Lambda:
        c.arg_count = parameter_count(n);
        break;
    case NodeKind::ClassDef:
        c.body_count = count_role(n, role_of(NodeKind::ClassDef, "body"));
        c.bases_count = count_role(n, role_of(NodeKind::ClassDef, "bases"));
        break;
    case NodeKind::Module:
        c.body_count = count_role(n, role_of(NodeKind::Module, "body"));
        break;
    default:
        break;
    }
    return c;
}

nlohmann::json span_json(const SourceSpan& s)
{
    return {s.start_line, s.start_col, s.end_line, s.end_col};
}

SourceSpan span_from_json(const nlohmann::json& j)
{
    return SourceSpan{j.at(0).get<int>(), j.at(1).get<int>(), j.at(2).get<int>(), j.at(3).get<int>()};
}

std::optional<RoleKind> role_from_json(const nlohmann::json& j)
{
    if (!j.contains("role")) return std::nullopt;
    auto r = grammar::taxonomy().find_role(j["role"].get<std::string>());
    if (!r) throw Error("unknown role " + j["role"].get<std::string>());
    return r;
}

NodeKind kind_from_json(const nlohmann::json& j)
{
    auto k = grammar::kind_from_name(j.at("kind").get<std::string>());
    if (!k) throw Error("unknown node kind " + j["kind"].get<std::string>());
    return *k;
}

} // namespace

std::vector<Hunk> extract_hunks(const EnhancedAst& e, int max_gap)
{
    std::vector<RootRef> roots;
    std::vector<std::size_t> path;
    collect_roots(e.root, path, roots);
    std::stable_sort(roots.begin(), roots.end(), [](const RootRef& a, const RootRef& b) {
        return std::tie(a.node->pos.start_line, a.node->pos.start_col) <
               std::tie(b.node->pos.start_line, b.node->pos.start_col);
    });

    std::vector<Hunk> hunks;
    std::size_t k = 0;
    while (k < roots.size()) {
        std::size_t end = k + 1;
        int reach = roots[k].node->pos.end_line;
        while (end < roots.size() && roots[end].node->pos.start_line - reach <= max_gap) {
            reach = std::max(reach, roots[end].node->pos.end_line);
            ++end;
        }

        Hunk h;
        h.change_id = e.change_id;
        h.path = e.path;
        h.ordinal = hunks.size();
        h.id = e.change_id + ":" + e.path + ":" + std::to_string(h.ordinal);

        std::size_t prefix = roots[k].path.size() - 1;
        for (std::size_t r = k + 1; r < end; ++r) {
            const auto& p = roots[r].path;
            std::size_t common = 0;
            while (common < prefix && common < p.size() && p[common] == roots[k].path[common]) ++common;
            prefix = common;
        }
        std::vector<const DiffNode*> chain{&e.root};
        for (std::size_t d = 0; d < prefix; ++d) chain.push_back(&chain.back()->children[roots[k].path[d]]);
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) h.context_chain.push_back(summarize(**it));

        h.line_window = roots[k].node->pos;
        for (std::size_t r = k; r < end; ++r) {
            const auto& p = roots[r].node->pos;
            if (std::tie(p.end_line, p.end_col) > std::tie(h.line_window.end_line, h.line_window.end_col)) {
                h.line_window.end_line = p.end_line;
                h.line_window.end_col = p.end_col;
            }
            h.labeled_roots.push_back(*roots[r].node);
        }
        hunks.push_back(std::move(h));
        k = end;
    }
    return hunks;
}

const ContextNode& scoped_ancestor(const Hunk& h)
{
    for (const auto& c : h.context_chain) {
        if (c.kind == NodeKind::FunctionDef || c.kind == NodeKind::ClassDef || c.kind == NodeKind::Module) return c;
    }
    return h.context_chain.back();
}

const ContextNode& closest_ancestor(const Hunk& h)
{
    return h.context_chain.front();
}

std::size_t tree_height(const DiffNode& n)
{
    std::size_t h = 0;
    for (const auto& c : n.children) h = std::max(h, tree_height(c) + 1);
    return h;
}

std::size_t hunk_height(const Hunk& h)
{
    std::size_t out = 0;
    for (const auto& r : h.labeled_roots) out = std::max(out, tree_height(r));
    return out;
}

nlohmann::json to_json(const DiffNode& n)
{
    nlohmann::json j;
    j["kind"] = grammar::kind_name(n.kind);
    if (n.role) j["role"] = grammar::role_name(*n.role);
    j["label"] = label_name(n.label);
    j["span"] = span_json(n.span);
    if (n.label == ChangeLabel::Minus) j["pos"] = span_json(n.pos);
    if (!n.text.empty()) j["text"] = n.text;
    if (!n.children.empty()) {
        auto& arr = j["children"] = nlohmann::json::array();
        for (const auto& c : n.children) arr.push_back(to_json(c));
    }
    return j;
}

DiffNode diff_node_from_json(const nlohmann::json& j)
{
    DiffNode n;
    n.kind = kind_from_json(j);
    n.role = role_from_json(j);
    auto label = j.at("label").get<std::string>();
    n.label = label == "Plus" ? ChangeLabel::Plus : label == "Minus" ? ChangeLabel::Minus : ChangeLabel::Unchanged;
    n.span = span_from_json(j.at("span"));
    n.pos = j.contains("pos") ? span_from_json(j["pos"]) : n.span;
    n.text = j.value("text", "");
    if (j.contains("children")) {
        for (const auto& c : j["children"]) n.children.push_back(diff_node_from_json(c));
    }
    return n;
}

nlohmann::json to_json(const Hunk& h)
{
    nlohmann::json j;
    j["id"] = h.id;
    j["change_id"] = h.change_id;
    j["path"] = h.path;
    j["ordinal"] = h.ordinal;
    j["window"] = span_json(h.line_window);
    auto& ctx = j["context"] = nlohmann::json::array();
    for (const auto& c : h.context_chain) {
        nlohmann::json cj;
        cj["kind"] = grammar::kind_name(c.kind);
        if (c.role) cj["role"] = grammar::role_name(*c.role);
        cj["span"] = span_json(c.span);
        if (!c.text.empty()) cj["text"] = c.text;
        cj["children"] = c.child_count;
        cj["args"] = c.arg_count;
        cj["body"] = c.body_count;
        cj["bases"] = c.bases_count;
        ctx.push_back(std::move(cj));
    }
    auto& roots = j["roots"] = nlohmann::json::array();
    for (const auto& r : h.labeled_roots) roots.push_back(to_json(r));
    return j;
}

Hunk hunk_from_json(const nlohmann::json& j)
{
    Hunk h;
    h.id = j.at("id").get<std::string>();
    h.change_id = j.at("change_id").get<std::string>();
    h.path = j.at("path").get<std::string>();
    h.ordinal = j.at("ordinal").get<std::size_t>();
    h.line_window = span_from_json(j.at("window"));
    for (const auto& cj : j.at("context")) {
        ContextNode c;
        c.kind = kind_from_json(cj);
        c.role = role_from_json(cj);
        c.span = span_from_json(cj.at("span"));
        c.text = cj.value("text", "");
        c.child_count = cj.at("children").get<std::size_t>();
        c.arg_count = cj.at("args").get<std::size_t>();
        c.body_count = cj.at("body").get<std::size_t>();
        c.bases_count = cj.at("bases").get<std::size_t>();
        h.context_chain.push_back(std::move(c));
    }
    for (const auto& r : j.at("roots")) h.labeled_roots.push_back(diff_node_from_json(r));
    return h;
}

} // namespace fixctx::diff
