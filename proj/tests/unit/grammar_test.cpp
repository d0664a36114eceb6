#include <gtest/gtest.h>

#include <functional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include <fixctx/grammar/parser.hpp>
#include <fixctx/grammar/taxonomy.hpp>

using namespace fixctx::grammar;

namespace {

const AstNode* find_kind(const AstNode& n, NodeKind k)
{
    if (n.kind == k) return &n;
    for (const auto& c : n.children) {
        if (const auto* f = find_kind(c, k)) return f;
    }
    return nullptr;
}

std::vector<std::string> roles_of(const AstNode& n)
{
    std::vector<std::string> out;
    for (const auto& c : n.children) out.emplace_back(role_name(*c.role));
    return out;
}

void check_invariants(const AstNode& n)
{
    ASSERT_TRUE(n.span.valid()) << kind_name(n.kind);
    for (const auto& c : n.children) {
        ASSERT_TRUE(c.role.has_value());
        EXPECT_EQ(taxonomy().entry(*c.role).parent, n.kind);
        EXPECT_TRUE(n.span.encloses(c.span)) << kind_name(n.kind) << " / " << kind_name(c.kind);
        check_invariants(c);
    }
}

} // namespace

// --- taxonomy --------------------------------------------------------------

TEST(Taxonomy, ClosedCounts)
{
    EXPECT_EQ(taxonomy().kind_count(), 89u);
    EXPECT_EQ(taxonomy().role_count(), 98u);
    EXPECT_EQ(taxonomy().version(), "py27-ast-1");
    EXPECT_EQ(taxonomy().checksum().size(), 64u);
}

TEST(Taxonomy, RoleNames)
{
    EXPECT_EQ(role_name(taxonomy().role(NodeKind::If, "body")), "If-Body");
    EXPECT_EQ(role_name(taxonomy().role(NodeKind::Call, "args")), "Call-Args");
    EXPECT_EQ(role_name(taxonomy().role(NodeKind::FunctionDef, "decorator_list")), "FunctionDef-Decorator_list");
    EXPECT_EQ(role_name(taxonomy().role(NodeKind::comprehension, "ifs")), "comprehension-Ifs");
}

TEST(Taxonomy, UnknownSlotThrows)
{
    EXPECT_THROW(taxonomy().role(NodeKind::Name, "id"), UnknownSlot);
    EXPECT_THROW(taxonomy().role(NodeKind::If, "bodies"), UnknownSlot);
}

TEST(Taxonomy, KindNamesRoundTrip)
{
    for (std::size_t i = 0; i < kNodeKindCount; ++i) {
        auto k = static_cast<NodeKind>(i);
        EXPECT_EQ(kind_from_name(kind_name(k)), k);
    }
    EXPECT_FALSE(kind_from_name("Constant").has_value());
}

TEST(Taxonomy, RejectsBadTables)
{
    EXPECT_THROW(Taxonomy::parse("Module\n"), TaxonomyError);
    std::string table(taxonomy_table_text());
    EXPECT_THROW(Taxonomy::parse(table + "\nNope.x=Nope-X\n"), TaxonomyError);
    EXPECT_THROW(Taxonomy::parse(table + "\nIf.body=If-Body2\n"), TaxonomyError);
}

// --- parsing: shapes -------------------------------------------------------

TEST(Parser, EmptyFile)
{
    auto m = parse_source("", Dialect::Py27);
    EXPECT_EQ(m.kind, NodeKind::Module);
    EXPECT_TRUE(m.children.empty());
    EXPECT_EQ(m.span, (SourceSpan{1, 0, 1, 0}));
}

TEST(Parser, CallWithKeyword)
{
    auto m = parse_source("foo(a, b=1)\n", Dialect::Py27);
    const auto* call = find_kind(m, NodeKind::Call);
    ASSERT_NE(call, nullptr);
    EXPECT_EQ(roles_of(*call), (std::vector<std::string>{"Call-Func", "Call-Args", "Call-Keywords"}));
    const auto& kw = call->children[2];
    EXPECT_EQ(kw.text, "b");
    EXPECT_EQ(kw.children.at(0).kind, NodeKind::Num);
    EXPECT_EQ(kw.children.at(0).text, "1");
    EXPECT_EQ(call->span, (SourceSpan{1, 0, 1, 11}));
}

TEST(Parser, IfElifNesting)
{
    auto m = parse_source("if a:\n    x = 1\nelif b:\n    pass\nelse:\n    y = 2\n", Dialect::Py27);
    const auto& top = m.children.at(0);
    ASSERT_EQ(top.kind, NodeKind::If);
    EXPECT_EQ(roles_of(top), (std::vector<std::string>{"If-Test", "If-Body", "If-Orelse"}));
    const auto& elif = top.children[2];
    EXPECT_EQ(elif.kind, NodeKind::If);
    EXPECT_EQ(elif.span, (SourceSpan{3, 0, 6, 9}));
    EXPECT_EQ(roles_of(elif), (std::vector<std::string>{"If-Test", "If-Body", "If-Orelse"}));
}

TEST(Parser, Py27Statements)
{
    auto m = parse_source("print >>sys.stderr, 'x', y,\n"
                          "exec code in g, l\n"
                          "raise E, 'msg', tb\n"
                          "x = `y`\n"
                          "if a <> b: pass\n"
                          "try:\n    pass\nexcept E, e:\n    pass\n",
                          Dialect::Py27);
    ASSERT_EQ(m.children.size(), 6u);
    EXPECT_EQ(m.children[0].kind, NodeKind::Print);
    EXPECT_EQ(roles_of(m.children[0]), (std::vector<std::string>{"Print-Dest", "Print-Values", "Print-Values"}));
    EXPECT_EQ(m.children[1].kind, NodeKind::Exec);
    EXPECT_EQ(m.children[1].children.size(), 3u);
    EXPECT_EQ(roles_of(m.children[2]), (std::vector<std::string>{"Raise-Type", "Raise-Inst", "Raise-Tback"}));
    EXPECT_NE(find_kind(m.children[3], NodeKind::Repr), nullptr);
    EXPECT_NE(find_kind(m.children[4], NodeKind::NotEq), nullptr);
    const auto* handler = find_kind(m.children[5], NodeKind::ExceptHandler);
    ASSERT_NE(handler, nullptr);
    EXPECT_EQ(roles_of(*handler), (std::vector<std::string>{"ExceptHandler-Type", "ExceptHandler-Name",
                                                            "ExceptHandler-Body"}));
}

TEST(Parser, Py27Numbers)
{
    auto m = parse_source("x = 10L + 0777 + 0xFFL\n", Dialect::Py27);
    std::multiset<std::string> nums;
    std::function<void(const AstNode&)> walk = [&](const AstNode& n) {
        if (n.kind == NodeKind::Num) nums.insert(n.text);
        for (const auto& c : n.children) walk(c);
    };
    walk(m);
    EXPECT_EQ(nums, (std::multiset<std::string>{"10L", "0777", "0xFFL"}));
    EXPECT_THROW(parse_source("x = 10L\n", Dialect::Py3), SyntaxError);
}

TEST(Parser, PrintFunctionFuture)
{
    auto m = parse_source("from __future__ import print_function\nprint('a', end='')\n", Dialect::Py27);
    EXPECT_EQ(m.children.at(1).kind, NodeKind::Expr);
    EXPECT_NE(find_kind(m.children[1], NodeKind::Call), nullptr);
}

TEST(Parser, Py27TupleParameters)
{
    auto m = parse_source("def f(a, (b, c)=(1, 2)):\n    pass\n", Dialect::Py27);
    const auto* args = find_kind(m, NodeKind::arguments);
    ASSERT_NE(args, nullptr);
    EXPECT_EQ(args->children.at(1).kind, NodeKind::Tuple);
}

TEST(Parser, TryExceptFinallyNesting)
{
    auto m = parse_source("try:\n    a()\nexcept E:\n    b()\nelse:\n    c()\nfinally:\n    d()\n", Dialect::Py27);
    const auto& tf = m.children.at(0);
    ASSERT_EQ(tf.kind, NodeKind::TryFinally);
    EXPECT_EQ(roles_of(tf), (std::vector<std::string>{"TryFinally-Body", "TryFinally-Finalbody"}));
    const auto& te = tf.children[0];
    EXPECT_EQ(te.kind, NodeKind::TryExcept);
    EXPECT_EQ(te.span, (SourceSpan{1, 0, 6, 7}));
}

TEST(Parser, DecoratedSpanStartsAtDecorator)
{
    auto m = parse_source("@dec\ndef f():\n    pass\n", Dialect::Py27);
    EXPECT_EQ(m.children.at(0).span, (SourceSpan{1, 0, 3, 8}));
    EXPECT_EQ(m.children[0].text, "f");
}

TEST(Parser, ArgumentsText)
{
    auto m = parse_source("def f(a, *args, **kw):\n    pass\n", Dialect::Py27);
    const auto* args = find_kind(m, NodeKind::arguments);
    ASSERT_NE(args, nullptr);
    EXPECT_EQ(args->text, "*args **kw");
    EXPECT_EQ(args->children.size(), 1u);
}

TEST(Parser, Py3Subset)
{
    auto m = parse_source("def f(a: int, *, b=1, **kw) -> str:\n"
                          "    nonlocal x\n"
                          "    raise E from err\n"
                          "print(f'{a}', ...)\n",
                          Dialect::Py3);
    const auto* args = find_kind(m, NodeKind::arguments);
    ASSERT_NE(args, nullptr);
    EXPECT_EQ(args->children.size(), 3u);  // a, b, default of b
    EXPECT_NE(find_kind(m, NodeKind::Global), nullptr);
    const auto* raise = find_kind(m, NodeKind::Raise);
    ASSERT_NE(raise, nullptr);
    EXPECT_EQ(roles_of(*raise), (std::vector<std::string>{"Raise-Type", "Raise-Inst"}));
    EXPECT_NE(find_kind(m, NodeKind::Ellipsis), nullptr);
}

TEST(Parser, Py3UnsupportedConstructs)
{
    EXPECT_THROW(parse_source("a, *b = c\n", Dialect::Py3), SyntaxError);
    EXPECT_THROW(parse_source("x = a @ b\n", Dialect::Py3), SyntaxError);
    EXPECT_THROW(parse_source("def f(a, /): pass\n", Dialect::Py3), SyntaxError);
    EXPECT_THROW(parse_source("async def f(): pass\n", Dialect::Py3), SyntaxError);
}

TEST(Parser, TabsAndContinuations)
{
    auto m = parse_source("if a:\n\tx = 1\n        y = 2\nz = (1 +\n     2) + \\\n    3\n", Dialect::Py27);
    ASSERT_EQ(m.children.size(), 2u);
    EXPECT_EQ(m.children[0].children.size(), 3u);
    EXPECT_EQ(m.children[1].span, (SourceSpan{4, 0, 6, 5}));
}

TEST(Parser, CrLfAndBom)
{
    auto a = parse_source("\xEF\xBB\xBFx = 1\r\ny = 2\r\n", Dialect::Py27);
    auto b = parse_source("x = 1\ny = 2\n", Dialect::Py27);
    EXPECT_EQ(to_json(a), to_json(b));
}

TEST(Parser, Utf8ByteColumns)
{
    auto m = parse_source("s = 'é'; t = 1\n", Dialect::Py27);
    EXPECT_EQ(m.children.at(1).span.start_col, 10);  // 'é' is two bytes
}

// --- parsing: errors ------------------------------------------------------

TEST(ParserErrors, ReportsLine)
{
    try {
        parse_source("if (\n", Dialect::Py27, "bad.py");
        FAIL() << "expected SyntaxError";
    } catch (const SyntaxError& e) {
        EXPECT_EQ(e.line(), 1);
        EXPECT_EQ(e.file(), "bad.py");
    }
}

TEST(ParserErrors, Cases)
{
    const char* bad[] = {
        "x = \n", "def f(:\n pass\n", "if a\n  pass\n", "  x = 1\n", "if a:\npass\n",
        "x = 'abc\n", "1 = x\n", "f() = 1\n", "x = (1, 2\n", "class:\n pass\n",
        "if a:\n    x\n  y\n", "try:\n pass\n", "lambda x: yield\n", "x = $\n",
    };
    for (const char* src : bad) {
        EXPECT_THROW(parse_source(src, Dialect::Py27), SyntaxError) << src;
    }
}

// --- properties -----------------------------------------------------------

TEST(ParserProperties, SpansNestAndRolesMatchParents)
{
    const char* sources[] = {
        "x = [a for a in b if a]\n",
        "def f(a=1, *b, **c):\n    return {k: v for k, v in c.items()}\n",
        "class A(B):\n    @d\n    def m(self):\n        with a as b, c:\n            yield b[1:2, ::3]\n",
        "print >>f, a if b else c, lambda: (yield)\n",
    };
    for (const char* src : sources) {
        auto m = parse_source(src, Dialect::Py27);
        check_invariants(m);
    }
}

TEST(ParserProperties, Deterministic)
{
    const char* src = "def f(x):\n    return x * 2 + g(y=3)\n";
    EXPECT_EQ(to_json(parse_source(src, Dialect::Py27)), to_json(parse_source(src, Dialect::Py27)));
}

TEST(TreeMetrics, HeightAndSize)
{
    auto m = parse_source("x\n", Dialect::Py27);
    EXPECT_EQ(tree_height(m), 2u);  // Module > Expr > Name
    EXPECT_EQ(tree_size(m), 3u);
    AstNode leaf;
    EXPECT_EQ(tree_height(leaf), 0u);
}
