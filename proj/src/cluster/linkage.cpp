#include <fixctx/cluster/cluster.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

namespace fixctx::cluster {

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x)
    {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
};

struct Edge {
    std::size_t u, v;
    double h;
};

/// Prim's algorithm on the complete graph; O(n^2) distance evaluations, O(n) memory.
std::vector<Edge> minimum_spanning_tree(const Distances& d)
{
    const std::size_t n = d.size();
    std::vector<Edge> edges;
    if (n < 2) return edges;
    std::vector<double> best(n, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> from(n, 0);
    std::vector<char> in(n, 0);
    std::size_t cur = 0;
    in[0] = 1;
    for (std::size_t step = 1; step < n; ++step) {
        std::size_t next = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (in[j]) continue;
            double dj = d(cur, j);
            if (dj < best[j]) {
                best[j] = dj;
                from[j] = cur;
            }
            if (next == n || best[j] < best[next]) next = j;
        }
        in[next] = 1;
        edges.push_back(Edge{std::min(from[next], next), std::max(from[next], next), best[next]});
        cur = next;
    }
    std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) { return a.h < b.h; });
    return edges;
}

class Builder {
public:
    Builder(const Distances& d) : d_(d), n_(d.size()), uf_(d.size()), id_(d.size()), members_(d.size())
    {
        std::iota(id_.begin(), id_.end(), 0);
        for (std::size_t i = 0; i < n_; ++i) members_[i] = {i};
        out_.leaves = n_;
    }

    Dendrogram run()
    {
        auto edges = minimum_spanning_tree(d_);
        std::size_t k = 0;
        while (k < edges.size()) {
            std::size_t end = k + 1;
            while (end < edges.size() && edges[end].h == edges[k].h) ++end;
            if (end - k == 1) merge_roots(uf_.find(edges[k].u), uf_.find(edges[k].v), edges[k].h);
            else tie_group(edges.begin() + static_cast<std::ptrdiff_t>(k), edges.begin() + static_cast<std::ptrdiff_t>(end));
            k = end;
        }
        return std::move(out_);
    }

private:
    std::size_t merge_roots(std::size_t ra, std::size_t rb, double h)
    {
        Merge m{std::min(id_[ra], id_[rb]), std::max(id_[ra], id_[rb]), h, members_[ra].size() + members_[rb].size()};
        if (members_[ra].size() < members_[rb].size()) std::swap(ra, rb);
        members_[ra].insert(members_[ra].end(), members_[rb].begin(), members_[rb].end());
        members_[rb].clear();
        members_[rb].shrink_to_fit();
        uf_.parent[rb] = ra;
        id_[ra] = n_ + out_.merges.size();
        out_.merges.push_back(m);
        return ra;
    }

    bool touches(std::size_t ra, std::size_t rb, double h) const
    {
        for (std::size_t p : members_[ra])
            for (std::size_t q : members_[rb])
                if (d_(p, q) == h) return true;
        return false;
    }

    /// Several merges at one height: replay them in the order a brute-force
    /// agglomeration with the smallest-id-pair rule would choose.
    template <typename It>
    void tie_group(It first, It last)
    {
        const double h = first->h;
        std::vector<std::size_t> roots;
        for (It e = first; e != last; ++e) {
            roots.push_back(uf_.find(e->u));
            roots.push_back(uf_.find(e->v));
        }
        std::sort(roots.begin(), roots.end());
        roots.erase(std::unique(roots.begin(), roots.end()), roots.end());

        std::unordered_map<std::size_t, std::size_t> slot;
        for (std::size_t i = 0; i < roots.size(); ++i) slot[roots[i]] = i;
        UnionFind comp(roots.size());
        for (It e = first; e != last; ++e) {
            comp.parent[comp.find(slot[uf_.find(e->u)])] = comp.find(slot[uf_.find(e->v)]);
        }

        // Current id -> root, adjacency between current ids at height h.
        std::unordered_map<std::size_t, std::size_t> root_of;
        std::unordered_map<std::size_t, std::set<std::size_t>> nbr;
        std::set<std::pair<std::size_t, std::size_t>> cand;
        for (std::size_t r : roots) root_of[id_[r]] = r;
        for (std::size_t i = 0; i < roots.size(); ++i) {
            for (std::size_t j = i + 1; j < roots.size(); ++j) {
                if (comp.find(i) != comp.find(j) || !touches(roots[i], roots[j], h)) continue;
                std::size_t a = id_[roots[i]], b = id_[roots[j]];
                cand.emplace(std::min(a, b), std::max(a, b));
                nbr[a].insert(b);
                nbr[b].insert(a);
            }
        }
        while (!cand.empty()) {
            auto [a, b] = *cand.begin();
            std::size_t r = merge_roots(root_of.at(a), root_of.at(b), h);
            std::size_t c = id_[r];
            root_of.erase(a);
            root_of.erase(b);
            root_of[c] = r;
            std::set<std::size_t> joined;
            for (std::size_t gone : {a, b}) {
                for (std::size_t x : nbr[gone]) {
                    cand.erase({std::min(x, gone), std::max(x, gone)});
                    if (x == a || x == b) continue;
                    nbr[x].erase(gone);
                    joined.insert(x);
                }
                nbr.erase(gone);
            }
            for (std::size_t x : joined) {
                cand.emplace(x, c);
                nbr[x].insert(c);
                nbr[c].insert(x);
            }
        }
    }

    const Distances& d_;
    std::size_t n_;
    UnionFind uf_;
    std::vector<std::size_t> id_;  // by root
    std::vector<std::vector<std::size_t>> members_;  // by root
    Dendrogram out_;
};

} // namespace

Dendrogram single_linkage(const Distances& d)
{
    return Builder(d).run();
}

std::vector<std::size_t> Dendrogram::members(std::size_t id) const
{
    std::vector<std::size_t> out, stack{id};
    while (!stack.empty()) {
        std::size_t x = stack.back();
        stack.pop_back();
        if (x < leaves) {
            out.push_back(x);
            continue;
        }
        const auto& m = merges.at(x - leaves);
        stack.push_back(m.left);
        stack.push_back(m.right);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> cophenetic_distances(const Dendrogram& t)
{
    const std::size_t n = t.leaves;
    std::vector<double> out(n * (n > 0 ? n - 1 : 0) / 2, 0.0);
    std::vector<std::vector<std::size_t>> members(n + t.merges.size());
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    for (std::size_t k = 0; k < t.merges.size(); ++k) {
        const auto& m = t.merges[k];
        for (std::size_t p : members[m.left])
            for (std::size_t q : members[m.right]) out[CondensedDistances::index(n, p, q)] = m.height;
        auto& dst = members[n + k];
        dst = std::move(members[m.left]);
        dst.insert(dst.end(), members[m.right].begin(), members[m.right].end());
        members[m.right].clear();
    }
    return out;
}

Cophenetic cophenetic_coefficient(const Dendrogram& t, const Distances& d)
{
    const std::size_t n = t.leaves;
    if (d.size() != n) throw Error("dendrogram and distances disagree on the number of points");
    // Streaming bivariate moments; pairs are visited merge by merge.
    double count = 0, mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
    std::vector<std::vector<std::size_t>> members(n + t.merges.size());
    for (std::size_t i = 0; i < n; ++i) members[i] = {i};
    for (std::size_t k = 0; k < t.merges.size(); ++k) {
        const auto& m = t.merges[k];
        const double y = m.height;
        for (std::size_t p : members[m.left]) {
            for (std::size_t q : members[m.right]) {
                const double x = d(p, q);
                count += 1;
                const double dx = x - mx;
                mx += dx / count;
                const double dy = y - my;
                my += dy / count;
                sxx += dx * (x - mx);
                syy += dy * (y - my);
                sxy += dx * (y - my);
            }
        }
        auto& dst = members[n + k];
        dst = std::move(members[m.left]);
        dst.insert(dst.end(), members[m.right].begin(), members[m.right].end());
        members[m.right].clear();
    }
    if (count < 2 || sxx <= 0 || syy <= 0) return Cophenetic{std::numeric_limits<double>::quiet_NaN(), true};
    return Cophenetic{std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0), false};
}

std::vector<InconsistencyRow> inconsistency(const Dendrogram& t, int depth)
{
    if (depth < 1) throw Error("inconsistency depth must be positive");
    const std::size_t n = t.leaves;
    std::vector<InconsistencyRow> out(t.merges.size());
    std::vector<std::pair<std::size_t, int>> stack;
    std::vector<double> heights;
    for (std::size_t k = 0; k < t.merges.size(); ++k) {
        heights.clear();
        stack.assign(1, {n + k, 1});
        while (!stack.empty()) {
            auto [id, level] = stack.back();
            stack.pop_back();
            const auto& m = t.merges[id - n];
            heights.push_back(m.height);
            if (level >= depth) continue;
            for (std::size_t c : {m.left, m.right})
                if (c >= n) stack.emplace_back(c, level + 1);
        }
        auto& row = out[k];
        row.count = heights.size();
        // Offsets from this link's height: equal heights give exactly zero spread.
        const double base = t.merges[k].height;
        double shift = 0;
        for (double h : heights) shift += h - base;
        shift /= static_cast<double>(row.count);
        row.mean = base + shift;
        if (row.count > 1) {
            double ss = 0;
            for (double h : heights) ss += (h - base - shift) * (h - base - shift);
            row.stddev = std::sqrt(ss / static_cast<double>(row.count - 1));
        }
        row.coefficient = row.stddev > 0 ? -shift / row.stddev : 0.0;
    }
    return out;
}

std::vector<double> inconsistency_coefficients(const Dendrogram& t, int depth)
{
    std::vector<double> out;
    for (const auto& r : inconsistency(t, depth)) out.push_back(r.coefficient);
    return out;
}

} // namespace fixctx::cluster
