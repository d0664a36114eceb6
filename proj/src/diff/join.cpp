#include <fixctx/diff/diff.hpp>

#include <algorithm>
#include <map>
#include <tuple>

#include <spdlog/spdlog.h>

namespace fixctx::diff {

std::string_view label_name(ChangeLabel label)
{
    switch (label) {
    case ChangeLabel::Plus:
        return "Plus";
    case ChangeLabel::Minus:
        return "Minus";
    default:
        return "Unchanged";
    }
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t fnv(std::uint64_t h, std::string_view bytes)
{
    for (unsigned char c : bytes) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

std::uint64_t fnv_u64(std::uint64_t h, std::uint64_t v)
{
    for (int k = 0; k < 8; ++k) {
        h ^= (v >> (8 * k)) & 0xff;
        h *= kFnvPrime;
    }
    return h;
}

/// Mirror of an AstNode carrying its structural hash (kind, role, text and
/// children; positions excluded) and its shallow (kind, text) key.
struct Hashed {
    const AstNode* node;
    std::uint64_t deep;
    std::uint64_t shallow;
    std::vector<Hashed> kids;
};

Hashed hash_tree(const AstNode& n)
{
    Hashed h{&n, 0, 0, {}};
    std::uint64_t s = fnv_u64(kFnvOffset, static_cast<std::uint64_t>(n.kind));
    s = fnv(s, n.text);
    h.shallow = s;
    std::uint64_t d = fnv_u64(s, n.role ? n.role->index() + 1u : 0u);
    h.kids.reserve(n.children.size());
    for (const auto& c : n.children) {
        h.kids.push_back(hash_tree(c));
        d = fnv_u64(d, h.kids.back().deep);
    }
    h.deep = fnv_u64(d, n.children.size());
    return h;
}

class Joiner {
public:
    explicit Joiner(const Alignment& a) : a_(a) {}

    std::size_t conflicts = 0;

    DiffNode join(const Hashed& b, const Hashed& a)
    {
        DiffNode out = shell(*a.node, ChangeLabel::Unchanged, a.node->span);
        // Group children per role, keeping source order.
        std::map<std::uint16_t, std::pair<std::vector<const Hashed*>, std::vector<const Hashed*>>> slots;
        for (const auto& c : b.kids) slots[c.node->role->index()].first.push_back(&c);
        for (const auto& c : a.kids) slots[c.node->role->index()].second.push_back(&c);
        for (auto& [_, lists] : slots) join_slot(lists.first, lists.second, out.children);
        std::stable_sort(out.children.begin(), out.children.end(), [](const DiffNode& x, const DiffNode& y) {
            return std::tie(x.pos.start_line, x.pos.start_col) < std::tie(y.pos.start_line, y.pos.start_col);
        });
        return out;
    }

private:
    using List = std::vector<const Hashed*>;

    static DiffNode shell(const AstNode& n, ChangeLabel label, SourceSpan pos)
    {
        DiffNode d;
        d.kind = n.kind;
        d.role = n.role;
        d.label = label;
        d.span = n.span;
        d.pos = pos;
        d.text = n.text;
        return d;
    }

    int project_line(int before_line) const
    {
        const auto& map = a_.before_to_after;
        if (before_line >= 1 && before_line < static_cast<int>(map.size()) && map[before_line] != 0)
            return map[before_line];
        for (const auto& blk : a_.blocks) {
            if (before_line >= blk.removed.start && before_line < blk.removed.end()) {
                int off = before_line - blk.removed.start;
                int last = blk.added.start + std::max(blk.added.count, 1) - 1;
                return std::min(blk.added.start + off, last);
            }
        }
        return std::max(1, before_line);
    }

    SourceSpan project(const SourceSpan& s) const
    {
        SourceSpan p = s;
        p.start_line = project_line(s.start_line);
        p.end_line = std::max(project_line(s.end_line), p.start_line);
        if (p.end_line == p.start_line && p.end_col < p.start_col) p.end_col = p.start_col;
        return p;
    }

    DiffNode copy(const AstNode& n, ChangeLabel label)
    {
        DiffNode d = shell(n, label, label == ChangeLabel::Minus ? project(n.span) : n.span);
        d.children.reserve(n.children.size());
        for (const auto& c : n.children) d.children.push_back(copy(c, label));
        return d;
    }

    bool unchanged_lines(const SourceSpan& s) const
    {
        for (int l = s.start_line; l <= s.end_line; ++l) {
            if (l >= static_cast<int>(a_.before_to_after.size()) || a_.before_to_after[l] == 0) return false;
        }
        return true;
    }

    /// LCS over `key`; equal keys always match, ties between skipping either
    /// side are resolved by key order so the result does not depend on which
    /// list is "before".
    template <typename Key>
    std::vector<std::pair<std::size_t, std::size_t>> lcs(const List& x, const List& y, Key key)
    {
        const std::size_t n = x.size(), m = y.size();
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        if (n == 0 || m == 0) return pairs;
        const std::size_t w = m + 1;
        std::vector<std::uint32_t> dp((n + 1) * w, 0);
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t j = m; j-- > 0;) {
                dp[i * w + j] = key(*x[i]) == key(*y[j]) ? dp[(i + 1) * w + j + 1] + 1
                                                         : std::max(dp[(i + 1) * w + j], dp[i * w + j + 1]);
            }
        }
        std::size_t i = 0, j = 0;
        while (i < n && j < m) {
            if (key(*x[i]) == key(*y[j])) {
                pairs.emplace_back(i++, j++);
                continue;
            }
            auto down = dp[(i + 1) * w + j], right = dp[i * w + j + 1];
            if (down > right) ++i;
            else if (right > down) ++j;
            else {
                if (down > 0) ++conflicts;
                if (key(*x[i]) < key(*y[j])) ++i;
                else ++j;
            }
        }
        return pairs;
    }

    void join_slot(const List& bs, const List& as, std::vector<DiffNode>& out)
    {
        // 1. Anchors: identical subtrees sitting on unchanged lines at the mapped position.
        std::map<std::pair<int, int>, std::size_t> after_at;
        for (std::size_t j = 0; j < as.size(); ++j) {
            const auto& s = as[j]->node->span;
            after_at.emplace(std::make_pair(s.start_line, s.start_col), j);
        }
        std::vector<std::pair<std::size_t, std::size_t>> anchors;
        std::size_t next_j = 0;
        for (std::size_t i = 0; i < bs.size(); ++i) {
            const auto& s = bs[i]->node->span;
            if (!unchanged_lines(s)) continue;
            auto it = after_at.find({a_.before_to_after[s.start_line], s.start_col});
            if (it == after_at.end() || it->second < next_j) continue;
            const auto& t = as[it->second]->node->span;
            if (t.end_line != a_.before_to_after[s.end_line] || t.end_col != s.end_col) continue;
            if (as[it->second]->deep != bs[i]->deep) continue;
            anchors.emplace_back(i, it->second);
            next_j = it->second + 1;
        }
        anchors.emplace_back(bs.size(), as.size());

        std::size_t bi = 0, aj = 0;
        for (auto [ai, aj_end] : anchors) {
            join_gap(List(bs.begin() + bi, bs.begin() + ai), List(as.begin() + aj, as.begin() + aj_end), out);
            if (ai < bs.size()) out.push_back(copy(*as[aj_end]->node, ChangeLabel::Unchanged));
            bi = ai + 1;
            aj = aj_end + 1;
        }
    }

    void join_gap(const List& bs, const List& as, std::vector<DiffNode>& out)
    {
        if (bs.empty() && as.empty()) return;
        // 2. Structurally identical subtrees.
        auto exact = lcs(bs, as, [](const Hashed& h) { return h.deep; });
        exact.emplace_back(bs.size(), as.size());
        std::size_t bi = 0, aj = 0;
        for (auto [i, j] : exact) {
            List rb(bs.begin() + bi, bs.begin() + i), ra(as.begin() + aj, as.begin() + j);
            // 3. Same kind and text: descend; everything else is removed or added.
            auto shallow = lcs(rb, ra, [](const Hashed& h) { return h.shallow; });
            std::vector<bool> used_b(rb.size()), used_a(ra.size());
            for (auto [p, q] : shallow) {
                if (rb[p]->node->children.empty() || ra[q]->node->children.empty()) continue;
                used_b[p] = used_a[q] = true;
                out.push_back(join(*rb[p], *ra[q]));
            }
            for (std::size_t k = 0; k < rb.size(); ++k)
                if (!used_b[k]) out.push_back(copy(*rb[k]->node, ChangeLabel::Minus));
            for (std::size_t k = 0; k < ra.size(); ++k)
                if (!used_a[k]) out.push_back(copy(*ra[k]->node, ChangeLabel::Plus));
            if (i < bs.size()) out.push_back(copy(*as[j]->node, ChangeLabel::Unchanged));
            bi = i + 1;
            aj = j + 1;
        }
    }

    const Alignment& a_;
};

} // namespace

EnhancedAst build_diff_ast(const AstNode& before, const AstNode& after, const Alignment& script,
                           std::string change_id, std::string path)
{
    Hashed hb = hash_tree(before);
    Hashed ha = hash_tree(after);
    Joiner joiner(script);
    EnhancedAst e;
    e.root = joiner.join(hb, ha);
    e.change_id = std::move(change_id);
    e.path = std::move(path);
    e.alignment_conflicts = joiner.conflicts;
    e.alignment_fallback = script.fallback;
    if (joiner.conflicts > 0) {
        spdlog::debug("{} {}: {} alignment conflicts resolved by key order", e.change_id, e.path, joiner.conflicts);
    }
    return e;
}

} // namespace fixctx::diff
