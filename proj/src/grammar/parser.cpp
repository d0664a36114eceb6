#include <fixctx/grammar/parser.hpp>

#include <algorithm>
#include <array>
#include <tuple>

#include <fixctx/grammar/lexer.hpp>

namespace fixctx::grammar {

SyntaxError::SyntaxError(std::string file, int line, int col, const std::string& message)
    : Error(file + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + message),
      file_(std::move(file)), line_(line), col_(col)
{
}

Dialect parse_dialect(std::string_view tag)
{
    if (tag == "py27" || tag == "python2" || tag == "2.7") return Dialect::Py27;
    if (tag == "py3" || tag == "python3" || tag == "3") return Dialect::Py3;
    throw Error("unknown dialect '" + std::string(tag) + "'");
}

std::string_view dialect_tag(Dialect dialect)
{
    return dialect == Dialect::Py27 ? "py27" : "py3";
}

namespace {

using K = NodeKind;

constexpr std::array<std::string_view, 31> kPy27Keywords = {
    "and", "as", "assert", "break", "class", "continue", "def", "del", "elif", "else", "except",
    "exec", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "not",
    "or", "pass", "print", "raise", "return", "try", "while", "with", "yield",
};

constexpr std::array<std::string_view, 31> kPy3Keywords = {
    "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif",
    "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda",
    "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with",
};

class Parser {
public:
    Parser(std::string_view text, Dialect dialect, std::string file)
        : lex_(text, file), toks_(lex_.tokens()), dialect_(dialect), file_(std::move(file))
    {
    }

    AstNode parse_module()
    {
        AstNode mod;
        mod.kind = K::Module;
        mod.span = SourceSpan{1, 0, lex_.line_count(), lex_.last_line_length()};
        std::vector<AstNode> body;
        while (peek().type != TokenType::EndMarker) {
            if (peek().type == TokenType::Newline) {
                advance();
                continue;
            }
            statement(body);
        }
        add_all(mod, "body", std::move(body));
        return mod;
    }

private:
    // ------------------------------------------------------------------ tokens

    const Token& peek(std::size_t k = 0) const { return toks_[std::min(i_ + k, toks_.size() - 1)]; }

    const Token& advance()
    {
        const Token& t = toks_[i_];
        if (i_ + 1 < toks_.size()) ++i_;
        return t;
    }

    bool is_op(std::string_view s, std::size_t k = 0) const
    {
        const auto& t = peek(k);
        return t.type == TokenType::Op && t.text == s;
    }

    bool is_keyword(std::string_view s) const
    {
        if (dialect_ == Dialect::Py27) {
            if (s == "print" && print_function_) return false;
            return std::find(kPy27Keywords.begin(), kPy27Keywords.end(), s) != kPy27Keywords.end();
        }
        if (s == "yield") return true;
        return std::find(kPy3Keywords.begin(), kPy3Keywords.end(), s) != kPy3Keywords.end();
    }

    bool is_kw(std::string_view s, std::size_t k = 0) const
    {
        const auto& t = peek(k);
        return t.type == TokenType::Name && t.text == s && is_keyword(s);
    }

    bool accept_op(std::string_view s)
    {
        if (!is_op(s)) return false;
        advance();
        return true;
    }

    bool accept_kw(std::string_view s)
    {
        if (!is_kw(s)) return false;
        advance();
        return true;
    }

    const Token& expect_op(std::string_view s)
    {
        if (!is_op(s)) fail(peek(), "expected '" + std::string(s) + "'");
        return advance();
    }

    void expect_kw(std::string_view s)
    {
        if (!is_kw(s)) fail(peek(), "expected '" + std::string(s) + "'");
        advance();
    }

    const Token& expect_name()
    {
        const auto& t = peek();
        if (t.type != TokenType::Name || is_keyword(t.text)) fail(t, "expected a name");
        return advance();
    }

    [[noreturn]] void fail(const Token& t, const std::string& message) const
    {
        std::string msg = message;
        if (t.type == TokenType::EndMarker) msg = "unexpected EOF while parsing";
        else if (t.type == TokenType::Indent) msg = "unexpected indent";
        throw SyntaxError(file_, t.line, t.col, msg);
    }

    [[noreturn]] void fail_at(const AstNode& n, const std::string& message) const
    {
        throw SyntaxError(file_, n.span.start_line, n.span.start_col, message);
    }

    [[noreturn]] void unsupported(const Token& t, std::string_view what) const
    {
        throw SyntaxError(file_, t.line, t.col, "unsupported construct: " + std::string(what));
    }

    bool py27() const { return dialect_ == Dialect::Py27; }

    // ------------------------------------------------------------------- nodes

    /// Span from token `start` to the last significant token consumed so far.
    SourceSpan span_from(std::size_t start) const { return span_between(start, i_); }

    SourceSpan span_between(std::size_t start, std::size_t end) const
    {
        std::size_t last = end == 0 ? 0 : end - 1;
        while (last > start && (toks_[last].type == TokenType::Newline || toks_[last].type == TokenType::Indent ||
                                toks_[last].type == TokenType::Dedent))
            --last;
        const auto& a = toks_[start];
        const auto& b = toks_[last];
        return SourceSpan{a.line, a.col, b.end_line, b.end_col};
    }

    static AstNode make(K kind, SourceSpan span, std::string text = {})
    {
        AstNode n;
        n.kind = kind;
        n.span = span;
        n.text = std::move(text);
        return n;
    }

    AstNode leaf(K kind, const Token& t, std::string text = {}) const
    {
        return make(kind, SourceSpan{t.line, t.col, t.end_line, t.end_col}, std::move(text));
    }

    static void add(AstNode& parent, std::string_view slot, AstNode child)
    {
        child.role = taxonomy().role(parent.kind, slot);
        auto pos = std::upper_bound(parent.children.begin(), parent.children.end(), child,
                                    [](const AstNode& a, const AstNode& b) {
                                        return std::tie(a.span.start_line, a.span.start_col) <
                                               std::tie(b.span.start_line, b.span.start_col);
                                    });
        parent.children.insert(pos, std::move(child));
    }

    static void add_all(AstNode& parent, std::string_view slot, std::vector<AstNode> children)
    {
        for (auto& c : children) add(parent, slot, std::move(c));
    }

    // ------------------------------------------------------------- statements

    void statement(std::vector<AstNode>& out)
    {
        const auto& t = peek();
        if (t.type == TokenType::Indent) fail(t, "unexpected indent");
        if (t.type == TokenType::Dedent) fail(t, "unindent does not match any outer indentation level");
        if (is_op("@")) {
            out.push_back(decorated());
            return;
        }
        if (t.type == TokenType::Name) {
            if (is_kw("if")) return out.push_back(if_stmt());
            if (is_kw("while")) return out.push_back(while_stmt());
            if (is_kw("for")) return out.push_back(for_stmt());
            if (is_kw("try")) return out.push_back(try_stmt());
            if (is_kw("with")) return out.push_back(with_stmt());
            if (is_kw("def")) return out.push_back(funcdef(i_, {}));
            if (is_kw("class")) return out.push_back(classdef(i_, {}));
            if (!py27() && (t.text == "async") ) unsupported(t, "async");
        }
        simple_stmt(out);
    }

    void simple_stmt(std::vector<AstNode>& out)
    {
        out.push_back(small_stmt());
        while (accept_op(";")) {
            if (peek().type == TokenType::Newline) break;
            out.push_back(small_stmt());
        }
        if (peek().type == TokenType::EndMarker) return;
        if (peek().type != TokenType::Newline) fail(peek(), "invalid syntax");
        advance();
    }

    std::vector<AstNode> suite()
    {
        expect_op(":");
        std::vector<AstNode> body;
        if (peek().type == TokenType::Newline) {
            advance();
            if (peek().type != TokenType::Indent) fail(peek(), "expected an indented block");
            advance();
            while (peek().type != TokenType::Dedent && peek().type != TokenType::EndMarker) {
                if (peek().type == TokenType::Newline) {
                    advance();
                    continue;
                }
                statement(body);
            }
            if (peek().type == TokenType::Dedent) advance();
        } else {
            simple_stmt(body);
        }
        return body;
    }

    AstNode small_stmt()
    {
        std::size_t s = i_;
        const Token& t = peek();
        if (t.type == TokenType::Name && is_keyword(t.text)) {
            const auto& w = t.text;
            if (w == "pass" || w == "break" || w == "continue") {
                advance();
                return leaf(w == "pass" ? K::Pass : w == "break" ? K::Break : K::Continue, t);
            }
            if (w == "del") {
                advance();
                AstNode n = make(K::Delete, {});
                auto targets = exprlist_items(nullptr);
                for (const auto& tg : targets) check_target(tg, "delete");
                add_all(n, "targets", std::move(targets));
                n.span = span_from(s);
                return n;
            }
            if (w == "return") {
                advance();
                AstNode n = make(K::Return, {});
                if (can_start_test()) add(n, "value", testlist());
                n.span = span_from(s);
                return n;
            }
            if (w == "raise") return raise_stmt();
            if (w == "global" || w == "nonlocal") {
                advance();
                std::string names(expect_name().text);
                while (accept_op(",")) {
                    names.push_back(',');
                    names.append(expect_name().text);
                }
                return make(K::Global, span_from(s), std::move(names));
            }
            if (w == "exec") return exec_stmt();
            if (w == "assert") {
                advance();
                AstNode n = make(K::Assert, {});
                add(n, "test", test());
                if (accept_op(",")) add(n, "msg", test());
                n.span = span_from(s);
                return n;
            }
            if (w == "import") return import_stmt();
            if (w == "from") return import_from();
            if (w == "print") return print_stmt();
        }
        return expr_stmt();
    }

    AstNode raise_stmt()
    {
        std::size_t s = i_;
        advance();
        AstNode n = make(K::Raise, {});
        if (can_start_test()) {
            add(n, "type", test());
            if (py27()) {
                if (accept_op(",")) {
                    add(n, "inst", test());
                    if (accept_op(",")) add(n, "tback", test());
                }
            } else if (accept_kw("from")) {
                add(n, "inst", test());
            }
        }
        n.span = span_from(s);
        return n;
    }

    AstNode exec_stmt()
    {
        std::size_t s = i_;
        advance();
        AstNode n = make(K::Exec, {});
        add(n, "body", expr());
        if (accept_kw("in")) {
            add(n, "globals", test());
            if (accept_op(",")) add(n, "locals", test());
        }
        n.span = span_from(s);
        return n;
    }

    AstNode print_stmt()
    {
        std::size_t s = i_;
        advance();
        AstNode n = make(K::Print, {});
        if (accept_op(">>")) {
            add(n, "dest", test());
            while (accept_op(",")) {
                if (!can_start_test()) break;
                add(n, "values", test());
            }
        } else if (can_start_test()) {
            add(n, "values", test());
            while (accept_op(",")) {
                if (!can_start_test()) break;
                add(n, "values", test());
            }
        }
        n.span = span_from(s);
        return n;
    }

    std::string dotted_name()
    {
        std::string name(expect_name().text);
        while (is_op(".")) {
            advance();
            name.push_back('.');
            name.append(expect_name().text);
        }
        return name;
    }

    AstNode import_stmt()
    {
        std::size_t s = i_;
        advance();
        AstNode n = make(K::Import, {});
        do {
            std::size_t as = i_;
            std::string text = dotted_name();
            if (accept_kw("as")) text += " as " + std::string(expect_name().text);
            add(n, "names", make(K::alias, span_from(as), std::move(text)));
        } while (accept_op(","));
        n.span = span_from(s);
        return n;
    }

    AstNode import_from()
    {
        std::size_t s = i_;
        advance();
        std::string module;
        while (is_op(".") || is_op("...")) module.append(advance().text);
        if (!is_kw("import")) module += dotted_name();
        if (module.empty()) fail(peek(), "invalid syntax");
        expect_kw("import");
        AstNode n = make(K::ImportFrom, {}, module);
        if (is_op("*")) {
            const Token& star = advance();
            add(n, "names", leaf(K::alias, star, "*"));
        } else {
            bool paren = accept_op("(");
            do {
                if (paren && is_op(")")) break;
                std::size_t as = i_;
                std::string name(expect_name().text);
                if (module == "__future__" && name == "print_function") print_function_ = true;
                if (accept_kw("as")) name += " as " + std::string(expect_name().text);
                add(n, "names", make(K::alias, span_from(as), std::move(name)));
            } while (accept_op(","));
            if (paren) expect_op(")");
        }
        n.span = span_from(s);
        return n;
    }

    bool at_augassign() const
    {
        static constexpr std::array<std::string_view, 12> ops = {
            "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>=", "**=", "//=",
        };
        const auto& t = peek();
        if (t.type != TokenType::Op) return false;
        return std::find(ops.begin(), ops.end(), t.text) != ops.end();
    }

    static K binop_kind(std::string_view op)
    {
        if (op == "+") return K::Add;
        if (op == "-") return K::Sub;
        if (op == "*") return K::Mult;
        if (op == "/") return K::Div;
        if (op == "%") return K::Mod;
        if (op == "**") return K::Pow;
        if (op == "<<") return K::LShift;
        if (op == ">>") return K::RShift;
        if (op == "|") return K::BitOr;
        if (op == "^") return K::BitXor;
        if (op == "&") return K::BitAnd;
        return K::FloorDiv;
    }

    AstNode expr_stmt()
    {
        std::size_t s = i_;
        if (is_op("@=") || is_op(":=")) unsupported(peek(), std::string(peek().text));
        AstNode first = is_kw("yield") ? yield_expr() : testlist();
        if (at_augassign()) {
            if (first.kind != K::Name && first.kind != K::Attribute && first.kind != K::Subscript)
                fail_at(first, "illegal expression for augmented assignment");
            const Token& op = advance();
            AstNode n = make(K::AugAssign, {});
            add(n, "target", std::move(first));
            add(n, "op", leaf(binop_kind(op.text.substr(0, op.text.size() - 1)), op));
            add(n, "value", is_kw("yield") ? yield_expr() : testlist());
            n.span = span_from(s);
            return n;
        }
        if (is_op("=")) {
            std::vector<AstNode> items;
            items.push_back(std::move(first));
            while (accept_op("=")) items.push_back(is_kw("yield") ? yield_expr() : testlist());
            AstNode n = make(K::Assign, {});
            AstNode value = std::move(items.back());
            items.pop_back();
            for (auto& tg : items) {
                check_target(tg, "assign");
                add(n, "targets", std::move(tg));
            }
            add(n, "value", std::move(value));
            n.span = span_from(s);
            return n;
        }
        if (is_op(":") && !py27()) unsupported(peek(), "variable annotation");
        AstNode n = make(K::Expr, span_from(s));
        add(n, "value", std::move(first));
        return n;
    }

    void check_target(const AstNode& n, std::string_view what) const
    {
        switch (n.kind) {
        case K::Name:
        case K::Attribute:
        case K::Subscript:
            return;
        case K::Tuple:
        case K::List:
            for (const auto& c : n.children) check_target(c, what);
            return;
        default:
            fail_at(n, "can't " + std::string(what) + " to " + std::string(kind_name(n.kind)));
        }
    }

    // -------------------------------------------------------- compound statements

    AstNode if_stmt()
    {
        std::size_t s = i_;
        advance();  // 'if' or 'elif'
        AstNode n = make(K::If, {});
        add(n, "test", test());
        add_all(n, "body", suite());
        if (is_kw("elif")) {
            add(n, "orelse", if_stmt());
        } else if (accept_kw("else")) {
            add_all(n, "orelse", suite());
        }
        n.span = span_from(s);
        return n;
    }

    AstNode while_stmt()
    {
        std::size_t s = i_;
        advance();
        AstNode n = make(K::While, {});
        add(n, "test", test());
        add_all(n, "body", suite());
        if (accept_kw("else")) add_all(n, "orelse", suite());
        n.span = span_from(s);
        return n;
    }

    AstNode for_stmt()
    {
        std::size_t s = i_;
        advance();
        AstNode n = make(K::For, {});
        AstNode target = exprlist();
        check_target(target, "assign");
        add(n, "target", std::move(target));
        expect_kw("in");
        add(n, "iter", testlist());
        add_all(n, "body", suite());
        if (accept_kw("else")) add_all(n, "orelse", suite());
        n.span = span_from(s);
        return n;
    }

    AstNode try_stmt()
    {
        std::size_t s = i_;
        advance();
        auto body = suite();
        std::vector<AstNode> handlers;
        while (is_kw("except")) {
            std::size_t hs = i_;
            advance();
            AstNode h = make(K::ExceptHandler, {});
            if (!is_op(":")) {
                add(h, "type", test());
                if (is_kw("as") || (py27() && is_op(","))) {
                    advance();
                    if (py27()) {
                        AstNode name = test();
                        check_target(name, "assign");
                        add(h, "name", std::move(name));
                    } else {
                        const Token& nt = expect_name();
                        add(h, "name", leaf(K::Name, nt, std::string(nt.text)));
                    }
                }
            }
            add_all(h, "body", suite());
            h.span = span_from(hs);
            handlers.push_back(std::move(h));
        }
        std::vector<AstNode> orelse;
        if (is_kw("else")) {
            if (handlers.empty()) fail(peek(), "invalid syntax");
            advance();
            orelse = suite();
        }
        std::size_t except_end = i_;
        std::vector<AstNode> finalbody;
        bool has_finally = false;
        if (accept_kw("finally")) {
            has_finally = true;
            finalbody = suite();
        }
        if (handlers.empty() && !has_finally) fail(peek(), "expected 'except' or 'finally' block");

        std::vector<AstNode> inner = std::move(body);
        if (!handlers.empty()) {
            AstNode te = make(K::TryExcept, span_between(s, except_end));
            add_all(te, "body", std::move(inner));
            add_all(te, "handlers", std::move(handlers));
            add_all(te, "orelse", std::move(orelse));
            if (!has_finally) return te;
            inner.clear();
            inner.push_back(std::move(te));
        }
        AstNode tf = make(K::TryFinally, span_from(s));
        add_all(tf, "body", std::move(inner));
        add_all(tf, "finalbody", std::move(finalbody));
        return tf;
    }

    AstNode with_stmt()
    {
        std::size_t s = i_;
        advance();
        struct Item {
            std::size_t start;
            AstNode context;
            std::optional<AstNode> vars;
        };
        std::vector<Item> items;
        do {
            Item item{i_, test(), std::nullopt};
            if (accept_kw("as")) {
                AstNode v = expr();
                check_target(v, "assign");
                item.vars = std::move(v);
            }
            items.push_back(std::move(item));
        } while (accept_op(","));
        auto body = suite();
        std::optional<AstNode> inner;
        for (std::size_t k = items.size(); k-- > 0;) {
            AstNode w = make(K::With, span_from(k == 0 ? s : items[k].start));
            add(w, "context_expr", std::move(items[k].context));
            if (items[k].vars) add(w, "optional_vars", std::move(*items[k].vars));
            if (inner) add(w, "body", std::move(*inner));
            else add_all(w, "body", std::move(body));
            inner = std::move(w);
        }
        return std::move(*inner);
    }

    AstNode decorated()
    {
        std::size_t s = i_;
        std::vector<AstNode> decorators;
        while (accept_op("@")) {
            decorators.push_back(test());
            if (peek().type != TokenType::Newline) fail(peek(), "invalid syntax");
            advance();
        }
        if (is_kw("def")) return funcdef(s, std::move(decorators));
        if (is_kw("class")) return classdef(s, std::move(decorators));
        fail(peek(), "invalid syntax");
    }

    AstNode funcdef(std::size_t s, std::vector<AstNode> decorators)
    {
        advance();  // 'def'
        const Token& name = expect_name();
        AstNode n = make(K::FunctionDef, {}, std::string(name.text));
        const Token& open = expect_op("(");
        add(n, "args", arguments(open, ")", true));
        expect_op(")");
        if (accept_op("->")) {
            if (py27()) fail(toks_[i_ - 1], "invalid syntax");
            test();  // return annotation, not represented
        }
        add_all(n, "decorator_list", std::move(decorators));
        add_all(n, "body", suite());
        n.span = span_from(s);
        return n;
    }

    AstNode classdef(std::size_t s, std::vector<AstNode> decorators)
    {
        advance();  // 'class'
        const Token& name = expect_name();
        AstNode n = make(K::ClassDef, {}, std::string(name.text));
        if (accept_op("(")) {
            while (!is_op(")")) {
                if (!py27() && peek().type == TokenType::Name && is_op("=", 1)) {
                    advance();
                    advance();
                    test();  // class keywords (metaclass=...) are not represented
                } else if (is_op("*") || is_op("**")) {
                    unsupported(peek(), "star arguments in class bases");
                } else {
                    add(n, "bases", test());
                }
                if (!accept_op(",")) break;
            }
            expect_op(")");
        }
        add_all(n, "decorator_list", std::move(decorators));
        add_all(n, "body", suite());
        n.span = span_from(s);
        return n;
    }

    /// Parameter list up to (not including) `close`. `after` is the token
    /// preceding the list, used to place an empty argument node.
    AstNode arguments(const Token& after, std::string_view close, bool annotations)
    {
        std::size_t s = i_;
        AstNode n = make(K::arguments, {});
        std::string star_text;
        bool seen_star = false;
        bool seen_default = false;
        while (!is_op(close)) {
            if (is_op("/")) unsupported(peek(), "positional-only parameters");
            if (accept_op("**")) {
                const Token& kw = expect_name();
                if (annotations && !py27() && accept_op(":")) test();
                if (!star_text.empty()) star_text.push_back(' ');
                star_text += "**" + std::string(kw.text);
                accept_op(",");
                break;
            }
            if (accept_op("*")) {
                if (seen_star) fail(peek(), "invalid syntax");
                seen_star = true;
                if (peek().type == TokenType::Name && !is_keyword(peek().text)) {
                    const Token& va = advance();
                    if (annotations && !py27() && accept_op(":")) test();
                    if (!star_text.empty()) star_text.push_back(' ');
                    star_text += "*" + std::string(va.text);
                } else if (py27()) {
                    fail(peek(), "invalid syntax");
                }
                if (!accept_op(",")) break;
                continue;
            }
            if (seen_star && py27()) fail(peek(), "invalid syntax");
            AstNode param = fpdef(annotations);
            add(n, "args", std::move(param));
            if (accept_op("=")) {
                add(n, "defaults", test());
                seen_default = true;
            } else if (seen_default && !seen_star) {
                fail(peek(), "non-default argument follows default argument");
            }
            if (!accept_op(",")) break;
        }
        n.text = std::move(star_text);
        if (i_ == s) n.span = SourceSpan{after.end_line, after.end_col, after.end_line, after.end_col};
        else n.span = span_from(s);
        return n;
    }

    AstNode fpdef(bool annotations)
    {
        if (py27() && is_op("(")) {
            std::size_t s = i_;
            advance();
            AstNode tup = make(K::Tuple, {});
            while (!is_op(")")) {
                add(tup, "elts", fpdef(false));
                if (!accept_op(",")) break;
            }
            expect_op(")");
            tup.span = span_from(s);
            if (tup.children.size() == 1 && toks_[i_ - 2].text != ",") {
                AstNode only = std::move(tup.children.front());
                only.role.reset();
                return only;
            }
            return tup;
        }
        const Token& name = expect_name();
        AstNode p = leaf(K::Name, name, std::string(name.text));
        if (annotations && !py27() && accept_op(":")) test();
        return p;
    }

    // -------------------------------------------------------------- expressions

    bool can_start_test() const
    {
        const auto& t = peek();
        switch (t.type) {
        case TokenType::Number:
        case TokenType::String:
            return true;
        case TokenType::Name:
            if (!is_keyword(t.text)) return true;
            return t.text == "not" || t.text == "lambda" || t.text == "await";
        case TokenType::Op:
            return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" ||
                   t.text == "~" || t.text == "`" || t.text == "..." || t.text == "*";
        default:
            return false;
        }
    }

    AstNode tuple_tail(std::size_t s, AstNode first, bool (Parser::*more)() const, AstNode (Parser::*item)())
    {
        if (!is_op(",")) return first;
        AstNode tup = make(K::Tuple, {});
        add(tup, "elts", std::move(first));
        while (accept_op(",")) {
            if (!(this->*more)()) break;
            add(tup, "elts", (this->*item)());
        }
        tup.span = span_from(s);
        return tup;
    }

    bool can_start_expr() const { return can_start_test() && !is_kw("not") && !is_kw("lambda"); }

    AstNode testlist()
    {
        std::size_t s = i_;
        return tuple_tail(s, test(), &Parser::can_start_test, &Parser::test);
    }

    AstNode exprlist()
    {
        std::size_t s = i_;
        return tuple_tail(s, expr(), &Parser::can_start_expr, &Parser::expr);
    }

    std::vector<AstNode> exprlist_items(bool* trailing_comma)
    {
        std::vector<AstNode> items;
        items.push_back(expr());
        bool trailing = false;
        while (accept_op(",")) {
            trailing = true;
            if (!can_start_expr()) break;
            items.push_back(expr());
            trailing = false;
        }
        if (trailing_comma) *trailing_comma = trailing;
        return items;
    }

    AstNode testlist_safe()
    {
        std::size_t s = i_;
        return tuple_tail(s, old_test(), &Parser::can_start_test, &Parser::old_test);
    }

    AstNode yield_expr()
    {
        std::size_t s = i_;
        advance();
        if (!py27() && is_kw("from")) unsupported(peek(), "yield from");
        AstNode n = make(K::Yield, {});
        if (can_start_test()) add(n, "value", testlist());
        n.span = span_from(s);
        return n;
    }

    AstNode test()
    {
        if (is_kw("lambda")) return lambdef(false);
        std::size_t s = i_;
        AstNode body = or_test();
        if (!is_kw("if")) return body;
        advance();
        AstNode n = make(K::IfExp, {});
        add(n, "body", std::move(body));
        add(n, "test", or_test());
        expect_kw("else");
        add(n, "orelse", test());
        n.span = span_from(s);
        return n;
    }

    AstNode old_test()
    {
        if (is_kw("lambda")) return lambdef(true);
        return or_test();
    }

    AstNode lambdef(bool old)
    {
        std::size_t s = i_;
        const Token& kw = advance();
        AstNode n = make(K::Lambda, {});
        add(n, "args", arguments(kw, ":", false));
        expect_op(":");
        add(n, "body", old ? old_test() : test());
        n.span = span_from(s);
        return n;
    }

    AstNode bool_chain(std::string_view word, K op_kind, AstNode (Parser::*sub)())
    {
        std::size_t s = i_;
        AstNode first = (this->*sub)();
        if (!is_kw(word)) return first;
        AstNode n = make(K::BoolOp, {});
        add(n, "op", leaf(op_kind, peek()));
        add(n, "values", std::move(first));
        while (accept_kw(word)) add(n, "values", (this->*sub)());
        n.span = span_from(s);
        return n;
    }

    AstNode or_test() { return bool_chain("or", K::Or, &Parser::and_test); }
    AstNode and_test() { return bool_chain("and", K::And, &Parser::not_test); }

    AstNode not_test()
    {
        if (!is_kw("not")) return comparison();
        std::size_t s = i_;
        AstNode n = make(K::UnaryOp, {});
        add(n, "op", leaf(K::Not, advance()));
        add(n, "operand", not_test());
        n.span = span_from(s);
        return n;
    }

    std::optional<AstNode> comp_op()
    {
        const Token& t = peek();
        auto single = [&](K k) {
            advance();
            return leaf(k, t);
        };
        if (t.type == TokenType::Op) {
            if (t.text == "<") return single(K::Lt);
            if (t.text == ">") return single(K::Gt);
            if (t.text == "==") return single(K::Eq);
            if (t.text == ">=") return single(K::GtE);
            if (t.text == "<=") return single(K::LtE);
            if (t.text == "!=") return single(K::NotEq);
            if (t.text == "<>") {
                if (!py27()) fail(t, "invalid syntax");
                return single(K::NotEq);
            }
            return std::nullopt;
        }
        if (is_kw("in")) return single(K::In);
        if (is_kw("not") && is_kw("in", 1)) {
            advance();
            const Token& e = advance();
            return make(K::NotIn, SourceSpan{t.line, t.col, e.end_line, e.end_col});
        }
        if (is_kw("is")) {
            advance();
            if (is_kw("not")) {
                const Token& e = advance();
                return make(K::IsNot, SourceSpan{t.line, t.col, e.end_line, e.end_col});
            }
            return leaf(K::Is, t);
        }
        return std::nullopt;
    }

    AstNode comparison()
    {
        std::size_t s = i_;
        AstNode left = expr();
        auto op = comp_op();
        if (!op) return left;
        AstNode n = make(K::Compare, {});
        add(n, "left", std::move(left));
        while (op) {
            add(n, "ops", std::move(*op));
            add(n, "comparators", expr());
            op = comp_op();
        }
        n.span = span_from(s);
        return n;
    }

    AstNode binary_chain(std::initializer_list<std::string_view> ops, AstNode (Parser::*sub)())
    {
        std::size_t s = i_;
        AstNode left = (this->*sub)();
        while (true) {
            const auto& t = peek();
            if (t.type != TokenType::Op || std::find(ops.begin(), ops.end(), t.text) == ops.end()) break;
            advance();
            AstNode n = make(K::BinOp, {});
            add(n, "left", std::move(left));
            add(n, "op", leaf(binop_kind(t.text), t));
            add(n, "right", (this->*sub)());
            n.span = span_from(s);
            left = std::move(n);
        }
        return left;
    }

    AstNode expr() { return binary_chain({"|"}, &Parser::xor_expr); }
    AstNode xor_expr() { return binary_chain({"^"}, &Parser::and_expr); }
    AstNode and_expr() { return binary_chain({"&"}, &Parser::shift_expr); }
    AstNode shift_expr() { return binary_chain({"<<", ">>"}, &Parser::arith_expr); }
    AstNode arith_expr() { return binary_chain({"+", "-"}, &Parser::term); }

    AstNode term()
    {
        if (is_op("@", 0)) fail(peek(), "invalid syntax");
        AstNode t = binary_chain({"*", "/", "%", "//"}, &Parser::factor);
        if (is_op("@")) unsupported(peek(), "matrix multiplication");
        return t;
    }

    AstNode factor()
    {
        const Token& t = peek();
        if (t.type == TokenType::Op && (t.text == "+" || t.text == "-" || t.text == "~")) {
            std::size_t s = i_;
            advance();
            AstNode n = make(K::UnaryOp, {});
            add(n, "op", leaf(t.text == "+" ? K::UAdd : t.text == "-" ? K::USub : K::Invert, t));
            add(n, "operand", factor());
            n.span = span_from(s);
            return n;
        }
        return power();
    }

    AstNode power()
    {
        std::size_t s = i_;
        if (!py27() && peek().type == TokenType::Name && peek().text == "await") unsupported(peek(), "await");
        AstNode base = atom();
        while (true) {
            if (is_op("(")) {
                const Token& open = advance();
                AstNode call = make(K::Call, {});
                add(call, "func", std::move(base));
                arglist(call, open);
                expect_op(")");
                call.span = span_from(s);
                base = std::move(call);
            } else if (is_op("[")) {
                advance();
                AstNode sub = make(K::Subscript, {});
                add(sub, "value", std::move(base));
                add(sub, "slice", subscriptlist());
                expect_op("]");
                sub.span = span_from(s);
                base = std::move(sub);
            } else if (is_op(".")) {
                advance();
                const Token& attr = expect_name();
                AstNode a = make(K::Attribute, {}, std::string(attr.text));
                add(a, "value", std::move(base));
                a.span = span_from(s);
                base = std::move(a);
            } else {
                break;
            }
        }
        if (is_op("**")) {
            const Token& op = advance();
            AstNode n = make(K::BinOp, {});
            add(n, "left", std::move(base));
            add(n, "op", leaf(K::Pow, op));
            add(n, "right", factor());
            n.span = span_from(s);
            return n;
        }
        return base;
    }

    void arglist(AstNode& call, const Token& open)
    {
        bool has_star = false, has_kwargs = false;
        std::size_t count = 0;
        while (!is_op(")")) {
            if (is_op("*")) {
                const Token& st = advance();
                if (has_star) unsupported(st, "multiple starred arguments");
                has_star = true;
                add(call, "starargs", test());
            } else if (is_op("**")) {
                const Token& st = advance();
                if (has_kwargs) unsupported(st, "multiple keyword unpackings");
                has_kwargs = true;
                add(call, "kwargs", test());
            } else if (peek().type == TokenType::Name && is_op("=", 1)) {
                std::size_t ks = i_;
                const Token& name = advance();
                if (is_keyword(name.text)) fail(name, "invalid syntax");
                advance();
                AstNode kw = make(K::keyword, {}, std::string(name.text));
                add(kw, "value", test());
                kw.span = span_from(ks);
                add(call, "keywords", std::move(kw));
            } else {
                std::size_t as = i_;
                AstNode arg = test();
                if (is_kw("for")) {
                    AstNode gen = make(K::GeneratorExp, {});
                    add(gen, "elt", std::move(arg));
                    comp_for(gen, false);
                    if (count == 0 && is_op(")")) {
                        const Token& close = peek();
                        gen.span = SourceSpan{open.line, open.col, close.end_line, close.end_col};
                    } else {
                        fail(toks_[as], "Generator expression must be parenthesized");
                    }
                    arg = std::move(gen);
                } else if (is_op(":=")) {
                    unsupported(peek(), "assignment expression");
                }
                add(call, "args", std::move(arg));
            }
            ++count;
            if (!accept_op(",")) break;
        }
    }

    AstNode subscript(bool& plain)
    {
        std::size_t s = i_;
        plain = false;
        if (is_op("...") && (is_op(",", 1) || is_op("]", 1))) return leaf(K::Ellipsis, advance());
        std::optional<AstNode> lower;
        if (!is_op(":")) {
            lower = test();
            if (!is_op(":")) {
                plain = true;
                return std::move(*lower);
            }
        }
        advance();  // ':'
        AstNode sl = make(K::Slice, {});
        if (lower) add(sl, "lower", std::move(*lower));
        if (can_start_test()) add(sl, "upper", test());
        if (accept_op(":")) {
            if (can_start_test()) add(sl, "step", test());
        }
        sl.span = span_from(s);
        return sl;
    }

    AstNode wrap_index(AstNode value)
    {
        AstNode idx = make(K::Index, value.span);
        add(idx, "value", std::move(value));
        return idx;
    }

    AstNode subscriptlist()
    {
        std::size_t s = i_;
        bool plain = false;
        std::vector<std::pair<AstNode, bool>> items;
        AstNode first = subscript(plain);
        items.emplace_back(std::move(first), plain);
        bool comma = false;
        while (accept_op(",")) {
            comma = true;
            if (is_op("]")) break;
            AstNode next = subscript(plain);
            items.emplace_back(std::move(next), plain);
        }
        if (!comma) {
            if (items[0].second) return wrap_index(std::move(items[0].first));
            return std::move(items[0].first);
        }
        bool all_plain = std::all_of(items.begin(), items.end(), [](const auto& p) { return p.second; });
        if (all_plain) {
            AstNode tup = make(K::Tuple, span_from(s));
            for (auto& [node, _] : items) add(tup, "elts", std::move(node));
            return wrap_index(std::move(tup));
        }
        AstNode ext = make(K::ExtSlice, span_from(s));
        for (auto& [node, is_plain] : items) add(ext, "dims", is_plain ? wrap_index(std::move(node)) : std::move(node));
        return ext;
    }

    void comp_for(AstNode& owner, bool py2_list)
    {
        while (is_kw("for")) {
            std::size_t s = i_;
            advance();
            AstNode comp = make(K::comprehension, {});
            AstNode target = exprlist();
            check_target(target, "assign");
            add(comp, "target", std::move(target));
            expect_kw("in");
            add(comp, "iter", py2_list ? testlist_safe() : or_test());
            while (accept_kw("if")) add(comp, "ifs", old_test());
            comp.span = span_from(s);
            add(owner, "generators", std::move(comp));
        }
    }

    AstNode atom()
    {
        std::size_t s = i_;
        const Token& t = peek();
        switch (t.type) {
        case TokenType::Number: {
            advance();
            if (!py27()) {
                char last = t.text.back();
                bool legacy_octal = t.text.size() > 1 && t.text[0] == '0' &&
                                    std::all_of(t.text.begin(), t.text.end(), [](char c) { return c >= '0' && c <= '9'; }) &&
                                    t.text.find_first_not_of('0') != std::string_view::npos;
                if (last == 'l' || last == 'L' || legacy_octal) fail(t, "invalid syntax");
            }
            return leaf(K::Num, t, std::string(t.text));
        }
        case TokenType::String: {
            std::string text;
            while (peek().type == TokenType::String) {
                if (!text.empty()) text.push_back(' ');
                text.append(advance().text);
            }
            return make(K::Str, span_from(s), std::move(text));
        }
        case TokenType::Name:
            if (is_keyword(t.text)) {
                if (t.text == "yield") fail(t, "'yield' outside parentheses");
                fail(t, "invalid syntax");
            }
            advance();
            return leaf(K::Name, t, std::string(t.text));
        case TokenType::Op:
            break;
        default:
            fail(t, "invalid syntax");
        }

        if (t.text == "(") {
            advance();
            if (accept_op(")")) return make(K::Tuple, span_from(s));
            if (is_kw("yield")) {
                AstNode y = yield_expr();
                expect_op(")");
                return y;
            }
            if (is_op("*")) unsupported(peek(), "starred expression");
            AstNode first = test();
            if (is_kw("for")) {
                AstNode gen = make(K::GeneratorExp, {});
                add(gen, "elt", std::move(first));
                comp_for(gen, false);
                expect_op(")");
                gen.span = span_from(s);
                return gen;
            }
            if (is_op(":=")) unsupported(peek(), "assignment expression");
            if (is_op(",")) {
                AstNode tup = make(K::Tuple, {});
                add(tup, "elts", std::move(first));
                while (accept_op(",")) {
                    if (is_op(")")) break;
                    if (is_op("*")) unsupported(peek(), "starred expression");
                    add(tup, "elts", test());
                }
                expect_op(")");
                tup.span = span_from(s);
                return tup;
            }
            expect_op(")");
            return first;
        }
        if (t.text == "[") {
            advance();
            if (accept_op("]")) return make(K::List, span_from(s));
            if (is_op("*")) unsupported(peek(), "starred expression");
            AstNode first = test();
            if (is_kw("for")) {
                AstNode lc = make(K::ListComp, {});
                add(lc, "elt", std::move(first));
                comp_for(lc, py27());
                expect_op("]");
                lc.span = span_from(s);
                return lc;
            }
            AstNode list = make(K::List, {});
            add(list, "elts", std::move(first));
            while (accept_op(",")) {
                if (is_op("]")) break;
                if (is_op("*")) unsupported(peek(), "starred expression");
                add(list, "elts", test());
            }
            expect_op("]");
            list.span = span_from(s);
            return list;
        }
        if (t.text == "{") {
            advance();
            if (accept_op("}")) return make(K::Dict, span_from(s));
            if (is_op("**") || is_op("*")) unsupported(peek(), "unpacking in display");
            AstNode first = test();
            if (accept_op(":")) {
                AstNode value = test();
                if (is_kw("for")) {
                    AstNode dc = make(K::DictComp, {});
                    add(dc, "key", std::move(first));
                    add(dc, "value", std::move(value));
                    comp_for(dc, false);
                    expect_op("}");
                    dc.span = span_from(s);
                    return dc;
                }
                AstNode d = make(K::Dict, {});
                add(d, "keys", std::move(first));
                add(d, "values", std::move(value));
                while (accept_op(",")) {
                    if (is_op("}")) break;
                    if (is_op("**")) unsupported(peek(), "unpacking in display");
                    add(d, "keys", test());
                    expect_op(":");
                    add(d, "values", test());
                }
                expect_op("}");
                d.span = span_from(s);
                return d;
            }
            if (is_kw("for")) {
                AstNode sc = make(K::SetComp, {});
                add(sc, "elt", std::move(first));
                comp_for(sc, false);
                expect_op("}");
                sc.span = span_from(s);
                return sc;
            }
            AstNode set = make(K::Set, {});
            add(set, "elts", std::move(first));
            while (accept_op(",")) {
                if (is_op("}")) break;
                add(set, "elts", test());
            }
            expect_op("}");
            set.span = span_from(s);
            return set;
        }
        if (t.text == "`") {
            if (!py27()) fail(t, "invalid syntax");
            advance();
            AstNode r = make(K::Repr, {});
            add(r, "value", testlist());
            expect_op("`");
            r.span = span_from(s);
            return r;
        }
        if (t.text == "...") {
            if (py27()) fail(t, "invalid syntax");
            advance();
            return leaf(K::Ellipsis, t);
        }
        if (t.text == "*") unsupported(t, "starred expression");
        fail(t, "invalid syntax");
    }

    Lexer lex_;
    const std::vector<Token>& toks_;
    std::size_t i_ = 0;
    Dialect dialect_;
    std::string file_;
    bool print_function_ = false;
};

} // namespace

AstNode parse_source(std::string_view text, Dialect dialect, std::string_view file_name)
{
    Parser parser(text, dialect, std::string(file_name));
    return parser.parse_module();
}

} // namespace fixctx::grammar
