#include <fixctx/grammar/taxonomy.hpp>

#include <array>

#include <fixctx/util/hash.hpp>
#include <fixctx/util/text.hpp>

namespace fixctx::embedded {
std::string_view python27_taxonomy();
}

namespace fixctx::grammar {

namespace {

constexpr std::array<std::string_view, kNodeKindCount> kKindNames = {
    "Module",
    "FunctionDef", "ClassDef", "Return", "Delete", "Assign", "AugAssign", "Print", "For", "While", "If",
    "With", "Raise", "TryExcept", "TryFinally", "Assert", "Import", "ImportFrom", "Exec", "Global", "Expr",
    "Pass", "Break", "Continue",
    "BoolOp", "BinOp", "UnaryOp", "Lambda", "IfExp", "Dict", "Set", "ListComp", "SetComp", "DictComp",
    "GeneratorExp", "Yield", "Compare", "Call", "Repr", "Num", "Str", "Attribute", "Subscript", "Name",
    "List", "Tuple",
    "Load", "Store", "Del", "AugLoad", "AugStore", "Param",
    "Ellipsis", "Slice", "ExtSlice", "Index",
    "And", "Or",
    "Add", "Sub", "Mult", "Div", "Mod", "Pow", "LShift", "RShift", "BitOr", "BitXor", "BitAnd", "FloorDiv",
    "Invert", "Not", "UAdd", "USub",
    "Eq", "NotEq", "Lt", "LtE", "Gt", "GtE", "Is", "IsNot", "In", "NotIn",
    "comprehension", "ExceptHandler", "arguments", "keyword", "alias",
};

} // namespace

std::string_view kind_name(NodeKind kind)
{
    return kKindNames.at(static_cast<std::size_t>(kind));
}

std::optional<NodeKind> kind_from_name(std::string_view name)
{
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == name) return static_cast<NodeKind>(i);
    }
    return std::nullopt;
}

UnknownSlot::UnknownSlot(NodeKind parent, std::string_view slot)
    : Error("unknown slot '" + std::string(slot) + "' for node kind " + std::string(kind_name(parent)))
{
}

Taxonomy Taxonomy::parse(std::string_view table_text)
{
    Taxonomy t;
    t.checksum_ = util::sha256_hex(table_text);
    int lineno = 0;
    for (auto raw : util::split_lines(table_text)) {
        ++lineno;
        auto line = util::trim(raw);
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto body = util::trim(line.substr(1));
            if (util::starts_with(body, "version:")) t.version_ = std::string(util::trim(body.substr(8)));
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            if (!kind_from_name(line)) {
                throw TaxonomyError("taxonomy line " + std::to_string(lineno) + ": unknown kind " + std::string(line));
            }
            t.kind_names_.emplace_back(line);
            continue;
        }
        auto lhs = util::trim(line.substr(0, eq));
        auto rhs = util::trim(line.substr(eq + 1));
        auto dot = lhs.find('.');
        if (dot == std::string_view::npos || rhs.empty()) {
            throw TaxonomyError("taxonomy line " + std::to_string(lineno) + ": malformed role entry");
        }
        auto parent = kind_from_name(lhs.substr(0, dot));
        if (!parent) {
            throw TaxonomyError("taxonomy line " + std::to_string(lineno) + ": unknown parent kind");
        }
        auto index = static_cast<std::uint16_t>(t.roles_.size());
        auto& slots = t.slots_[static_cast<std::size_t>(*parent)];
        std::string slot(lhs.substr(dot + 1));
        for (const auto& [name, _] : slots) {
            if (name == slot) throw TaxonomyError("taxonomy line " + std::to_string(lineno) + ": duplicate slot");
        }
        slots.emplace_back(slot, index);
        if (!t.by_name_.emplace(std::string(rhs), index).second) {
            throw TaxonomyError("taxonomy line " + std::to_string(lineno) + ": duplicate role entry");
        }
        t.roles_.push_back(RoleEntry{*parent, std::string(lhs.substr(dot + 1)), std::string(rhs)});
    }
    if (t.kind_names_.size() != kNodeKindCount) {
        throw TaxonomyError("taxonomy lists " + std::to_string(t.kind_names_.size()) + " kinds, expected " +
                            std::to_string(kNodeKindCount));
    }
    for (std::size_t i = 0; i < kNodeKindCount; ++i) {
        if (t.kind_names_[i] != kKindNames[i]) {
            throw TaxonomyError("taxonomy kind order differs at " + t.kind_names_[i]);
        }
    }
    return t;
}

RoleKind Taxonomy::role(NodeKind parent, std::string_view slot) const
{
    for (const auto& [name, index] : slots_[static_cast<std::size_t>(parent)]) {
        if (name == slot) return RoleKind(index);
    }
    throw UnknownSlot(parent, slot);
}

std::optional<RoleKind> Taxonomy::find_role(std::string_view role_name) const
{
    auto it = by_name_.find(std::string(role_name));
    if (it == by_name_.end()) return std::nullopt;
    return RoleKind(it->second);
}

std::string_view taxonomy_table_text()
{
    return embedded::python27_taxonomy();
}

const Taxonomy& taxonomy()
{
    static const Taxonomy instance = Taxonomy::parse(taxonomy_table_text());
    return instance;
}

} // namespace fixctx::grammar
