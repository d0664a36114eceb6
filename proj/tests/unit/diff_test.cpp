#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include <fixctx/diff/diff.hpp>
#include <fixctx/grammar/parser.hpp>

#include "support/pygen.hpp"

using namespace fixctx::diff;
using fixctx::grammar::Dialect;
using fixctx::grammar::parse_source;

namespace {

EnhancedAst diff_texts(const std::string& before, const std::string& after)
{
    auto b = parse_source(before, Dialect::Py27);
    auto a = parse_source(after, Dialect::Py27);
    return build_diff_ast(b, a, align_versions(before, after), "I1", "f.py");
}

void collect(const DiffNode& n, std::vector<const DiffNode*>& out)
{
    out.push_back(&n);
    for (const auto& c : n.children) collect(c, out);
}

std::vector<const DiffNode*> labeled(const DiffNode& root, ChangeLabel l)
{
    std::vector<const DiffNode*> all, out;
    collect(root, all);
    for (auto* n : all)
        if (n->label == l) out.push_back(n);
    return out;
}

std::string kind(const DiffNode& n) { return std::string(fixctx::grammar::kind_name(n.kind)); }

std::string lines(int from, int to, const std::string& stem)
{
    std::string s;
    for (int i = from; i <= to; ++i) s += stem + std::to_string(i) + " = " + std::to_string(i) + "\n";
    return s;
}

// Longest common subsequence length by exhaustive search over subsets of `a`.
std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    std::size_t best = 0;
    for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
        std::size_t j = 0, len = 0;
        bool ok = true;
        for (std::size_t i = 0; i < a.size() && ok; ++i) {
            if (!(mask & (1u << i))) continue;
            while (j < b.size() && b[j] != a[i]) ++j;
            if (j == b.size()) ok = false;
            else {
                ++j;
                ++len;
            }
        }
        if (ok) best = std::max(best, len);
    }
    return best;
}

std::string join_lines(const std::vector<std::string>& v)
{
    std::string s;
    for (const auto& l : v) s += l + "\n";
    return s;
}

} // namespace

// --- align_versions ----------------------------------------------------------

TEST(Align, IdenticalTextsGiveEmptyScript)
{
    auto a = align_versions("a\nb\nc\n", "a\nb\nc\n");
    EXPECT_TRUE(a.blocks.empty());
    EXPECT_FALSE(a.fallback);
}

TEST(Align, SingleReplacedLine)
{
    auto a = align_versions("a\nb\nc\n", "a\nB\nc\n");
    ASSERT_EQ(a.blocks.size(), 1u);
    EXPECT_EQ(a.blocks[0], (EditBlock{{2, 1}, {2, 1}}));
}

TEST(Align, ListingOneLinePosition)
{
    std::string head = lines(1, 7173, "v");
    std::string before = head + "instance_domains = self._host.list_instance_domains()\n" + lines(1, 20, "w");
    std::string after =
        head + "instance_domains = self._host.list_instance_domains(only_running=False)\n" + lines(1, 20, "w");
    auto a = align_versions(before, after);
    ASSERT_EQ(a.blocks.size(), 1u);
    EXPECT_EQ(a.blocks[0], (EditBlock{{7174, 1}, {7174, 1}}));
}

TEST(Align, PureInsertionAndDeletion)
{
    auto ins = align_versions("a\nc\n", "a\nb\nc\n");
    ASSERT_EQ(ins.blocks.size(), 1u);
    EXPECT_EQ(ins.blocks[0], (EditBlock{{2, 0}, {2, 1}}));
    auto del = align_versions("a\nb\nc\n", "a\nc\n");
    EXPECT_EQ(del.blocks[0], (EditBlock{{2, 1}, {2, 0}}));
}

TEST(Align, FallbackWhenTableTooLarge)
{
    auto a = align_versions("a\nb\nc\nd\n", "x\nb\ny\nd\nz\n", 2);
    EXPECT_TRUE(a.fallback);
    ASSERT_EQ(a.blocks.size(), 1u);
}

TEST(AlignProperties, MinimalValidAndSymmetric)
{
    std::mt19937_64 rng(7);
    const std::vector<std::string> alphabet = {"a", "b", "c", "d"};
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::string> x(rng() % 9), y(rng() % 9);
        for (auto& s : x) s = alphabet[rng() % alphabet.size()];
        for (auto& s : y) s = alphabet[rng() % alphabet.size()];
        auto a = align_versions(join_lines(x), join_lines(y));

        // Matched lines form a common subsequence of maximal length.
        std::size_t matched = 0;
        int last = 0;
        for (std::size_t i = 1; i < a.before_to_after.size(); ++i) {
            int j = a.before_to_after[i];
            if (j == 0) continue;
            ASSERT_GT(j, last);
            ASSERT_EQ(x[i - 1], y[static_cast<std::size_t>(j) - 1]);
            last = j;
            ++matched;
        }
        EXPECT_EQ(matched, brute_lcs(x, y));

        // Blocks cover exactly the unmatched lines.
        std::size_t removed = 0, added = 0;
        for (const auto& b : a.blocks) {
            removed += static_cast<std::size_t>(b.removed.count);
            added += static_cast<std::size_t>(b.added.count);
        }
        EXPECT_EQ(removed, x.size() - matched);
        EXPECT_EQ(added, y.size() - matched);

        auto r = align_versions(join_lines(y), join_lines(x));
        ASSERT_EQ(r.blocks.size(), a.blocks.size());
        for (std::size_t k = 0; k < a.blocks.size(); ++k) {
            EXPECT_EQ(r.blocks[k].removed, a.blocks[k].added);
            EXPECT_EQ(r.blocks[k].added, a.blocks[k].removed);
        }
    }
}

// --- build_diff_ast ------------------------------------------------------------

TEST(DiffAst, NoEditsAllUnchanged)
{
    std::string src = "class A(object):\n    def f(self):\n        return 1\n";
    auto e = diff_texts(src, src);
    EXPECT_TRUE(labeled(e.root, ChangeLabel::Plus).empty());
    EXPECT_TRUE(labeled(e.root, ChangeLabel::Minus).empty());
    EXPECT_TRUE(extract_hunks(e).empty());
}

TEST(DiffAst, WrapInIfFigureTwo)
{
    std::string before = "class Foo(object):\n"
                         "    def foo_fun(self, a):\n"
                         "        x = 0\n"
                         "        return a\n";
    std::string after = "class Foo(object):\n"
                        "    def foo_fun(self, a):\n"
                        "        if a:\n"
                        "            x = 0\n"
                        "        return a\n";
    auto e = diff_texts(before, after);
    auto hunks = extract_hunks(e);
    ASSERT_EQ(hunks.size(), 1u);
    const auto& h = hunks[0];
    ASSERT_EQ(h.labeled_roots.size(), 2u);
    std::multiset<std::pair<std::string, std::string>> roots;
    for (const auto& r : h.labeled_roots) roots.emplace(kind(r), std::string(label_name(r.label)));
    EXPECT_EQ(roots, (std::multiset<std::pair<std::string, std::string>>{{"If", "Plus"}, {"Assign", "Minus"}}));
    // Plus subtree is entirely Plus.
    for (const auto& r : h.labeled_roots) {
        std::vector<const DiffNode*> all;
        collect(r, all);
        for (auto* n : all) EXPECT_EQ(n->label, r.label);
    }
    ASSERT_EQ(h.context_chain.size(), 3u);
    EXPECT_EQ(h.context_chain[0].kind, NodeKind::FunctionDef);
    EXPECT_EQ(h.context_chain[0].text, "foo_fun");
    EXPECT_EQ(h.context_chain[1].kind, NodeKind::ClassDef);
    EXPECT_EQ(h.context_chain[2].kind, NodeKind::Module);
    EXPECT_EQ(scoped_ancestor(h).text, "foo_fun");
}

TEST(DiffAst, ListingThreeClassConstant)
{
    std::string before = "class DiskFilter(filters.BaseHostFilter):\n"
                         "    \"\"\"Disk Filter with over subscription flag.\"\"\"\n"
                         "\n"
                         "    def host_passes(self, host_state, spec_obj):\n"
                         "        return True\n";
    std::string after = "class DiskFilter(filters.BaseHostFilter):\n"
                        "    \"\"\"Disk Filter with over subscription flag.\"\"\"\n"
                        "    RUN_ON_REBUILD = False\n"
                        "\n"
                        "    def host_passes(self, host_state, spec_obj):\n"
                        "        return True\n";
    auto hunks = extract_hunks(diff_texts(before, after));
    ASSERT_EQ(hunks.size(), 1u);
    ASSERT_EQ(hunks[0].labeled_roots.size(), 1u);
    EXPECT_EQ(hunks[0].labeled_roots[0].kind, NodeKind::Assign);
    EXPECT_EQ(hunks[0].labeled_roots[0].label, ChangeLabel::Plus);
    EXPECT_EQ(closest_ancestor(hunks[0]).kind, NodeKind::ClassDef);
    EXPECT_EQ(scoped_ancestor(hunks[0]).kind, NodeKind::ClassDef);
}

TEST(DiffAst, ListingOneKeywordUnderCall)
{
    std::string before = "def f(self):\n    instance_domains = self._host.list_instance_domains()\n";
    std::string after = "def f(self):\n    instance_domains = self._host.list_instance_domains(only_running=False)\n";
    auto hunks = extract_hunks(diff_texts(before, after));
    ASSERT_EQ(hunks.size(), 1u);
    ASSERT_EQ(hunks[0].labeled_roots.size(), 1u);
    EXPECT_EQ(hunks[0].labeled_roots[0].kind, NodeKind::keyword);
    EXPECT_EQ(closest_ancestor(hunks[0]).kind, NodeKind::Call);
    EXPECT_EQ(closest_ancestor(hunks[0]).arg_count, 1u);
}

TEST(DiffAst, ListingSixDictEntry)
{
    std::string before = "def f():\n"
                         "    arp_table = {'ip_address': ip_address,\n"
                         "                 'mac_address': mac_address,\n"
                         "                 'subnet_id': subnet}\n";
    std::string after = "def f():\n"
                        "    arp_table = {'ip_address': ip_address,\n"
                        "                 'mac_address': mac_address,\n"
                        "                 'subnet_id': subnet,\n"
                        "                 'nud_state': nud_state}\n";
    auto hunks = extract_hunks(diff_texts(before, after));
    ASSERT_EQ(hunks.size(), 1u);
    std::vector<std::string> chain;
    for (const auto& c : hunks[0].context_chain) chain.emplace_back(fixctx::grammar::kind_name(c.kind));
    EXPECT_EQ(chain, (std::vector<std::string>{"Dict", "Assign", "FunctionDef", "Module"}));
    EXPECT_EQ(hunks[0].labeled_roots.size(), 2u);
}

TEST(DiffAst, ModifiedLeafIsMinusPlusPair)
{
    auto hunks = extract_hunks(diff_texts("x = foo(1)\n", "x = foo(2)\n"));
    ASSERT_EQ(hunks.size(), 1u);
    ASSERT_EQ(hunks[0].labeled_roots.size(), 2u);
    EXPECT_EQ(hunks[0].labeled_roots[0].kind, NodeKind::Num);
    EXPECT_EQ(hunks[0].labeled_roots[1].kind, NodeKind::Num);
    EXPECT_NE(hunks[0].labeled_roots[0].label, hunks[0].labeled_roots[1].label);
}

TEST(DiffAst, WhitespaceAndCommentEditsProduceNoHunks)
{
    std::string before = "def f(a):\n    return a+1\n";
    std::string after = "# comment\ndef f(a):\n\n    return a + 1  # trailing\n";
    EXPECT_TRUE(extract_hunks(diff_texts(before, after)).empty());
}

TEST(DiffAst, ListingEightTryExcept)
{
    std::string before = "def delete(self, metadata):\n"
                         "    self.zapi_client.destroy_lun(metadata['Path'])\n";
    std::string after = "def delete(self, metadata):\n"
                        "    try:\n"
                        "        self.zapi_client.destroy_lun(metadata['Path'])\n"
                        "    except netapp_api.NaApiError as e:\n"
                        "        if e.code == netapp_api.EOBJECTNOTFOUND:\n"
                        "            LOG.warning(_LW('Failure deleting LUN'))\n"
                        "        else:\n"
                        "            error_message = (_('A NetApp Api Error occurred'))\n"
                        "            raise exception.NetAppDriverException(error_message)\n";
    auto hunks = extract_hunks(diff_texts(before, after));
    ASSERT_EQ(hunks.size(), 1u);
    bool has_try = false;
    for (const auto& r : hunks[0].labeled_roots) has_try |= r.kind == NodeKind::TryExcept && r.label == ChangeLabel::Plus;
    EXPECT_TRUE(has_try);
    EXPECT_EQ(closest_ancestor(hunks[0]).kind, NodeKind::FunctionDef);
}

// --- extract_hunks ---------------------------------------------------------------

namespace {

std::string module_with(const std::set<int>& extra_lines, int total)
{
    std::string s;
    for (int l = 1; l <= total; ++l) s += (extra_lines.count(l) ? "added_" : "base_") + std::to_string(l) + " = 0\n";
    return s;
}

std::string module_without(const std::set<int>& extra_lines, int total)
{
    std::string s;
    for (int l = 1; l <= total; ++l)
        if (!extra_lines.count(l)) s += "base_" + std::to_string(l) + " = 0\n";
    return s;
}

std::vector<std::vector<int>> hunk_lines(const std::set<int>& added, int total)
{
    auto hunks = extract_hunks(diff_texts(module_without(added, total), module_with(added, total)));
    std::vector<std::vector<int>> out;
    for (const auto& h : hunks) {
        std::vector<int> ls;
        for (const auto& r : h.labeled_roots) ls.push_back(r.pos.start_line);
        out.push_back(ls);
    }
    return out;
}

} // namespace

TEST(Hunks, GapOfTwoJoins)
{
    EXPECT_EQ(hunk_lines({10, 12}, 30), (std::vector<std::vector<int>>{{10, 12}}));
}

TEST(Hunks, GapOfTenSplits)
{
    EXPECT_EQ(hunk_lines({10, 20}, 30), (std::vector<std::vector<int>>{{10}, {20}}));
}

TEST(Hunks, ChainedWithinThree)
{
    EXPECT_EQ(hunk_lines({10, 13, 16}, 30), (std::vector<std::vector<int>>{{10, 13, 16}}));
}

TEST(Hunks, GroupingMatchesBruteForceClosure)
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        std::set<int> added;
        int count = 1 + static_cast<int>(rng() % 6);
        while (static_cast<int>(added.size()) < count) added.insert(1 + static_cast<int>(rng() % 30));
        // Brute force: union-find over the pairwise <=3 relation.
        std::vector<int> ls(added.begin(), added.end());
        std::vector<int> parent(ls.size());
        std::iota(parent.begin(), parent.end(), 0);
        std::function<int(int)> find = [&](int i) { return parent[i] == i ? i : parent[i] = find(parent[i]); };
        for (std::size_t i = 0; i < ls.size(); ++i)
            for (std::size_t j = i + 1; j < ls.size(); ++j)
                if (std::abs(ls[i] - ls[j]) <= 3) parent[find(static_cast<int>(i))] = find(static_cast<int>(j));
        std::map<int, std::vector<int>> groups;
        for (std::size_t i = 0; i < ls.size(); ++i) groups[find(static_cast<int>(i))].push_back(ls[i]);
        std::vector<std::vector<int>> want;
        for (auto& [_, g] : groups) want.push_back(g);
        std::sort(want.begin(), want.end());
        EXPECT_EQ(hunk_lines(added, 32), want);
    }
}

TEST(Hunks, IdsOrderedByFirstLine)
{
    auto hunks = extract_hunks(diff_texts(module_without({3, 20}, 25), module_with({3, 20}, 25)));
    ASSERT_EQ(hunks.size(), 2u);
    EXPECT_EQ(hunks[0].id, "I1:f.py:0");
    EXPECT_EQ(hunks[1].id, "I1:f.py:1");
    EXPECT_LT(hunks[0].line_window.start_line, hunks[1].line_window.start_line);
}

TEST(Hunks, JsonRoundTrip)
{
    auto hunks = extract_hunks(diff_texts("def f(a):\n    return a\n", "def f(a):\n    if a:\n        return a\n"));
    ASSERT_FALSE(hunks.empty());
    auto j = to_json(hunks[0]);
    EXPECT_EQ(to_json(hunk_from_json(j)), j);
}

// --- properties over random edits -------------------------------------------------

namespace {

using Sig = std::tuple<std::string, std::string, int, int, int, int>;

std::multiset<Sig> signature(const DiffNode& root, ChangeLabel l)
{
    std::multiset<Sig> out;
    for (const auto* n : labeled(root, l)) {
        out.emplace(kind(*n), n->role ? std::string(fixctx::grammar::role_name(*n->role)) : "", n->span.start_line,
                    n->span.start_col, n->span.end_line, n->span.end_col);
    }
    return out;
}

bool subtree_uniform(const DiffNode& n)
{
    for (const auto& c : n.children) {
        if (n.label != ChangeLabel::Unchanged && c.label != n.label) return false;
        if (!subtree_uniform(c)) return false;
    }
    return true;
}

} // namespace

TEST(DiffProperties, RandomEdits)
{
    for (std::uint64_t seed = 1; seed <= 150; ++seed) {
        testsupport::PyGen gen(seed);
        auto prog = gen.program();
        auto before = testsupport::PyGen::render(prog);
        int edits = 1 + gen.pick(3);
        for (int k = 0; k < edits; ++k) gen.mutate(prog);
        auto after = testsupport::PyGen::render(prog);

        auto fwd = diff_texts(before, after);
        auto rev = diff_texts(after, before);

        // Symmetry: swapping versions swaps Plus and Minus exactly.
        EXPECT_EQ(signature(fwd.root, ChangeLabel::Plus), signature(rev.root, ChangeLabel::Minus)) << seed;
        EXPECT_EQ(signature(fwd.root, ChangeLabel::Minus), signature(rev.root, ChangeLabel::Plus)) << seed;

        // Label inheritance below insertion/removal roots.
        EXPECT_TRUE(subtree_uniform(fwd.root)) << seed;

        auto hunks = extract_hunks(fwd);
        std::size_t roots_in_hunks = 0;
        for (const auto& h : hunks) {
            roots_in_hunks += h.labeled_roots.size();
            ASSERT_FALSE(h.context_chain.empty());
            EXPECT_EQ(h.context_chain.back().kind, NodeKind::Module);
        }
        // Partition: every labeled root appears in exactly one hunk.
        std::size_t roots = 0;
        std::function<void(const DiffNode&)> count = [&](const DiffNode& n) {
            for (const auto& c : n.children) {
                if (c.label != ChangeLabel::Unchanged) ++roots;
                else count(c);
            }
        };
        count(fwd.root);
        EXPECT_EQ(roots_in_hunks, roots) << seed;

        // 3-line separation between hunks.
        for (std::size_t i = 0; i < hunks.size(); ++i) {
            for (std::size_t j = i + 1; j < hunks.size(); ++j) {
                int gap = std::max(hunks[j].line_window.start_line - hunks[i].line_window.end_line,
                                   hunks[i].line_window.start_line - hunks[j].line_window.end_line);
                EXPECT_GT(gap, 3) << seed;
            }
        }
    }
}
