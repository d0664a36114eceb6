#include <fixctx/features/context.hpp>

#include <algorithm>

#include <spdlog/spdlog.h>

#include <fixctx/util/hash.hpp>
#include <fixctx/util/text.hpp>

namespace fixctx::embedded {
std::string_view context_categories();
}

namespace fixctx::features {

using diff::ChangeLabel;
using diff::ContextNode;
using diff::DiffNode;
using grammar::NodeKind;

ScopedFeatures outer_scoped_features(const diff::Hunk& h)
{
    ScopedFeatures s;
    bool have_fn = false, have_class = false;
    for (const ContextNode& c : h.context_chain) {
        if (c.kind == NodeKind::FunctionDef && !have_fn) {
            have_fn = true;
            s.function_args_size = c.arg_count;
            s.function_body_size = c.body_count;
            s.function_private = util::starts_with(c.text, "_");
        } else if (c.kind == NodeKind::ClassDef && !have_class) {
            have_class = true;
            s.class_size = c.body_count;
            s.class_bases_size = c.bases_count;
        } else if (c.kind == NodeKind::Module) {
            s.module_size = c.body_count;
        }
    }
    return s;
}

AncestorFeatures closest_ancestor_features(const diff::Hunk& h)
{
    for (std::size_t i = 0; i < h.context_chain.size(); ++i) {
        const ContextNode& c = h.context_chain[i];
        if (std::find(kAncestorKinds.begin(), kAncestorKinds.end(), c.kind) == kAncestorKinds.end()) continue;
        if (i > 0) {
            spdlog::debug("hunk {}: closest ancestor {} not tracked, using {}", h.id,
                          grammar::kind_name(h.context_chain.front().kind), grammar::kind_name(c.kind));
        }
        return AncestorFeatures{c.kind, c.kind == NodeKind::Call ? c.arg_count : c.child_count};
    }
    throw Error("hunk " + h.id + " has no module in its context chain");
}

namespace {

void count_below(const DiffNode& n, std::map<std::string, std::size_t>& out)
{
    for (const auto& c : n.children) {
        std::string dir = c.label == ChangeLabel::Plus ? "ctx_inner_add_" : "ctx_inner_rem_";
        ++out[dir + std::string(grammar::kind_name(c.kind)) + "_count"];
        if (c.role) ++out[dir + std::string(grammar::role_name(*c.role)) + "_count"];
        count_below(c, out);
    }
}

constexpr std::array<std::string_view, kCategoryCount> kCategoryNames = {
    "Module Size",      "Class Size",        "Function Size",     "Closest Definition", "Closest Exception",
    "Closest Iteration", "Closest Selection", "Closest Attribute", "Closest Call",       "Closest Assign",
    "Closest Size",     "Assign Operators",  "Control Flow",      "Data Containers",    "Function",
    "Globals",          "Special Operators",
};

} // namespace

std::map<std::string, std::size_t> inner_context_features(const diff::Hunk& h)
{
    std::map<std::string, std::size_t> out;
    for (const auto& r : h.labeled_roots) count_below(r, out);
    return out;
}

ContextVector context_vector(const diff::Hunk& h)
{
    ContextVector v;
    v.hunk_id = h.id;
    v.scoped = outer_scoped_features(h);
    v.ancestor = closest_ancestor_features(h);
    v.inner = inner_context_features(h);
    return v;
}

std::map<std::string, double> ContextVector::named() const
{
    std::map<std::string, double> out;
    out["ctx_ClassDef_size"] = static_cast<double>(scoped.class_size);
    out["ctx_ClassDef_bases_size"] = static_cast<double>(scoped.class_bases_size);
    out["ctx_FunctionDef_args_size"] = static_cast<double>(scoped.function_args_size);
    out["ctx_FunctionDef_body_size"] = static_cast<double>(scoped.function_body_size);
    out["ctx_FunctionDef_private"] = scoped.function_private ? 1.0 : 0.0;
    out["ctx_Module_size"] = static_cast<double>(scoped.module_size);
    for (NodeKind k : kAncestorKinds) {
        out["ctx_including_" + std::string(grammar::kind_name(k))] = k == ancestor.including ? 1.0 : 0.0;
    }
    out["ctx_including_node_size"] = static_cast<double>(ancestor.node_size);
    for (const auto& [name, n] : inner) out[name] = static_cast<double>(n);
    return out;
}

FeatureVector ContextVector::sparse() const
{
    FeatureVector v;
    v.hunk_id = hunk_id;
    for (const auto& [name, value] : named()) {
        if (value != 0.0) v.entries.emplace(name, value);
    }
    return v;
}

std::string_view category_name(Category c)
{
    return kCategoryNames.at(static_cast<std::size_t>(c));
}

std::optional<Category> category_from_name(std::string_view name)
{
    for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
        if (kCategoryNames[i] == name) return static_cast<Category>(i);
    }
    return std::nullopt;
}

CategoryTable CategoryTable::parse(std::string_view text)
{
    CategoryTable t;
    t.checksum_ = util::sha256_hex(text);
    std::size_t line_no = 0;
    for (auto raw : util::split_lines(text)) {
        ++line_no;
        auto line = util::trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto body = util::trim(line.substr(1));
            if (util::starts_with(body, "version:")) t.version_ = std::string(util::trim(body.substr(8)));
            continue;
        }
        auto where = [&] { return "category table line " + std::to_string(line_no) + ": "; };
        auto sp = line.find(' ');
        auto eq = line.find('=');
        if (sp == std::string_view::npos || eq == std::string_view::npos || eq < sp) throw Error(where() + "malformed");
        auto tag = line.substr(0, sp);
        auto name = util::trim(line.substr(sp + 1, eq - sp - 1));
        auto cat = category_from_name(util::trim(line.substr(eq + 1)));
        if (!cat) throw Error(where() + "unknown category");
        if (tag == "field") {
            t.fields_[std::string(name)] = *cat;
        } else if (tag == "kind") {
            auto k = grammar::kind_from_name(name);
            if (!k) throw Error(where() + "unknown kind " + std::string(name));
            t.kinds_[static_cast<std::size_t>(*k)] = *cat;
        } else if (tag == "role") {
            auto r = grammar::taxonomy().find_role(name);
            if (!r) throw Error(where() + "unknown role " + std::string(name));
            t.roles_[r->index()] = *cat;
        } else {
            throw Error(where() + "unknown entry type " + std::string(tag));
        }
    }
    return t;
}

Category CategoryTable::categorize(std::string_view feature) const
{
    if (auto it = fields_.find(std::string(feature)); it != fields_.end()) return it->second;
    std::string_view rest = feature;
    if (util::starts_with(rest, "ctx_inner_add_") || util::starts_with(rest, "ctx_inner_rem_")) {
        rest.remove_prefix(14);
        if (rest.size() > 6 && rest.substr(rest.size() - 6) == "_count") {
            rest.remove_suffix(6);
            if (auto k = grammar::kind_from_name(rest)) {
                if (auto c = kinds_[static_cast<std::size_t>(*k)]) return *c;
            } else if (auto r = grammar::taxonomy().find_role(rest)) {
                if (auto it = roles_.find(r->index()); it != roles_.end()) return it->second;
                if (auto c = kinds_[static_cast<std::size_t>(grammar::taxonomy().entry(*r).parent)]) return *c;
            }
        }
    }
    throw UnmappedFeature(std::string(feature));
}

std::string_view category_table_text()
{
    return embedded::context_categories();
}

const CategoryTable& category_table()
{
    static const CategoryTable instance = CategoryTable::parse(category_table_text());
    return instance;
}

std::vector<std::string> all_context_feature_names()
{
    ContextVector v;
    std::vector<std::string> out;
    for (const auto& [name, _] : v.named()) out.push_back(name);
    const auto& t = grammar::taxonomy();
    for (std::string_view dir : {"ctx_inner_add_", "ctx_inner_rem_"}) {
        for (std::size_t k = 0; k < grammar::kNodeKindCount; ++k)
            out.push_back(std::string(dir) + std::string(grammar::kind_name(static_cast<NodeKind>(k))) + "_count");
        for (const auto& r : t.roles()) out.push_back(std::string(dir) + r.name + "_count");
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace fixctx::features
