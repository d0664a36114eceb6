#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <fixctx/error.hpp>

namespace fixctx::grammar {

/// Node kinds of the Python 2.7 abstract grammar, in taxonomy-table order.
/// Expression contexts (Load..Param) belong to the taxonomy but are never
/// materialized as tree nodes.
enum class NodeKind : std::uint8_t {
    Module,
    // statements
    FunctionDef, ClassDef, Return, Delete, Assign, AugAssign, Print, For, While, If, With, Raise,
    TryExcept, TryFinally, Assert, Import, ImportFrom, Exec, Global, Expr, Pass, Break, Continue,
    // expressions
    BoolOp, BinOp, UnaryOp, Lambda, IfExp, Dict, Set, ListComp, SetComp, DictComp, GeneratorExp,
    Yield, Compare, Call, Repr, Num, Str, Attribute, Subscript, Name, List, Tuple,
    // expression contexts
    Load, Store, Del, AugLoad, AugStore, Param,
    // slices
    Ellipsis, Slice, ExtSlice, Index,
    // operators
    And, Or,
    Add, Sub, Mult, Div, Mod, Pow, LShift, RShift, BitOr, BitXor, BitAnd, FloorDiv,
    Invert, Not, UAdd, USub,
    Eq, NotEq, Lt, LtE, Gt, GtE, Is, IsNot, In, NotIn,
    // auxiliary productions
    comprehension, ExceptHandler, arguments, keyword, alias,
};

inline constexpr std::size_t kNodeKindCount = static_cast<std::size_t>(NodeKind::alias) + 1;

std::string_view kind_name(NodeKind kind);
std::optional<NodeKind> kind_from_name(std::string_view name);

/// A node's relationship to its parent, e.g. If-Body or Call-Args.
class RoleKind {
public:
    constexpr explicit RoleKind(std::uint16_t index) : index_(index) {}
    constexpr std::uint16_t index() const { return index_; }
    friend constexpr bool operator==(RoleKind, RoleKind) = default;
    friend constexpr auto operator<=>(RoleKind, RoleKind) = default;

private:
    std::uint16_t index_;
};

class UnknownSlot : public Error {
public:
    UnknownSlot(NodeKind parent, std::string_view slot);
};

class TaxonomyError : public Error {
public:
    using Error::Error;
};

struct RoleEntry {
    NodeKind parent;
    std::string slot;
    std::string name;
};

/// The closed kind/role enumeration loaded from a versioned table
/// (`kind` lines and `parent.slot=role` lines).
class Taxonomy {
public:
    static Taxonomy parse(std::string_view table_text);

    RoleKind role(NodeKind parent, std::string_view slot) const;
    std::optional<RoleKind> find_role(std::string_view role_name) const;
    const RoleEntry& entry(RoleKind role) const { return roles_.at(role.index()); }
    std::string_view role_name(RoleKind role) const { return entry(role).name; }

    std::size_t kind_count() const { return kind_names_.size(); }
    std::size_t role_count() const { return roles_.size(); }
    const std::vector<RoleEntry>& roles() const { return roles_; }
    const std::string& version() const { return version_; }
    /// SHA-256 of the table text, hex encoded.
    const std::string& checksum() const { return checksum_; }

private:
    std::vector<std::string> kind_names_;
    std::vector<RoleEntry> roles_;
    std::array<std::vector<std::pair<std::string, std::uint16_t>>, kNodeKindCount> slots_;
    std::unordered_map<std::string, std::uint16_t> by_name_;
    std::string version_;
    std::string checksum_;
};

/// The shipped taxonomy compiled into the library.
const Taxonomy& taxonomy();
std::string_view taxonomy_table_text();

inline std::string_view role_name(RoleKind role) { return taxonomy().role_name(role); }

} // namespace fixctx::grammar
