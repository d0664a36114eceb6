#include <fixctx/grammar/lexer.hpp>

#include <array>
#include <cctype>
#include <cstring>

#include <fixctx/grammar/parser.hpp>

namespace fixctx::grammar {

namespace {

bool is_name_start(unsigned char c)
{
    return std::isalpha(c) || c == '_' || c >= 0x80;
}

bool is_name_char(unsigned char c)
{
    return std::isalnum(c) || c == '_' || c >= 0x80;
}

bool is_string_prefix(std::string_view p)
{
    if (p.size() > 2) return false;
    std::string lower;
    for (char c : p) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    static constexpr std::array<std::string_view, 11> kPrefixes = {
        "r", "u", "b", "f", "ur", "br", "rb", "fr", "rf", "ru", "",
    };
    for (auto k : kPrefixes) {
        if (k == lower) return true;
    }
    return false;
}

constexpr std::array<std::string_view, 5> kOps3 = {"**=", "//=", ">>=", "<<=", "..."};
constexpr std::array<std::string_view, 21> kOps2 = {
    "**", "//", "<<", ">>", "<=", ">=", "==", "!=", "<>", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "->", ":=", "@=", "**",
};
constexpr std::string_view kOps1 = "+-*/%&|^~<>()[]{},:.;@=`";

std::string normalize_newlines(std::string_view text)
{
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\r') {
            out.push_back('\n');
            if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
        } else {
            out.push_back(c);
        }
    }
    return out;
}

} // namespace

Lexer::Lexer(std::string_view text, std::string file_name)
    : source_(normalize_newlines(text)), file_(std::move(file_name))
{
    run();
}

void Lexer::fail(int line, int col, const std::string& message) const
{
    throw SyntaxError(file_, line, col, message);
}

void Lexer::run()
{
    const std::string& s = source_;
    const std::size_t n = s.size();
    std::size_t pos = 0;
    int line = 1;
    std::size_t line_start = 0;
    std::vector<int> indents{0};
    struct Open {
        char ch;
        int line;
        int col;
    };
    std::vector<Open> brackets;
    bool at_line_start = true;
    bool line_has_tokens = false;

    auto col_of = [&](std::size_t p) { return static_cast<int>(p - line_start); };
    auto push = [&](TokenType type, std::size_t b, std::size_t e, int l, int c, int el, int ec) {
        tokens_.push_back(Token{type, std::string_view(s).substr(b, e - b), l, c, el, ec});
    };
    auto newline_at = [&](std::size_t p) {
        ++line;
        line_start = p + 1;
    };

    while (true) {
        if (at_line_start && brackets.empty()) {
            // Measure indentation of a fresh logical line.
            int width = 0;
            std::size_t p = pos;
            while (p < n && (s[p] == ' ' || s[p] == '\t' || s[p] == '\f')) {
                if (s[p] == ' ') ++width;
                else if (s[p] == '\t') width = (width / 8 + 1) * 8;
                else width = 0;
                ++p;
            }
            if (p >= n) {
                pos = p;
                break;
            }
            if (s[p] == '#' || s[p] == '\n') {
                // Blank or comment-only line.
                while (p < n && s[p] != '\n') ++p;
                if (p >= n) {
                    pos = p;
                    break;
                }
                newline_at(p);
                pos = p + 1;
                continue;
            }
            if (s[p] == '\\' && p + 1 < n && s[p + 1] == '\n') {
                // Continuation on an otherwise blank line: treat like whitespace.
                newline_at(p + 1);
                pos = p + 2;
                continue;
            }
            int col = col_of(p);
            if (width > indents.back()) {
                indents.push_back(width);
                push(TokenType::Indent, p, p, line, col, line, col);
            } else {
                while (width < indents.back()) {
                    indents.pop_back();
                    push(TokenType::Dedent, p, p, line, col, line, col);
                }
                if (width != indents.back()) fail(line, col, "unindent does not match any outer indentation level");
            }
            pos = p;
            at_line_start = false;
            line_has_tokens = false;
        }

        if (pos >= n) break;
        char c = s[pos];
        unsigned char uc = static_cast<unsigned char>(c);

        if (c == ' ' || c == '\t' || c == '\f') {
            ++pos;
            continue;
        }
        if (c == '#') {
            while (pos < n && s[pos] != '\n') ++pos;
            continue;
        }
        if (c == '\\') {
            if (pos + 1 < n && s[pos + 1] == '\n') {
                newline_at(pos + 1);
                pos += 2;
                continue;
            }
            if (pos + 1 >= n) fail(line, col_of(pos), "unexpected EOF after line continuation");
            fail(line, col_of(pos), "unexpected character after line continuation character");
        }
        if (c == '\n') {
            if (brackets.empty()) {
                if (line_has_tokens) push(TokenType::Newline, pos, pos, line, col_of(pos), line, col_of(pos) + 1);
                at_line_start = true;
                line_has_tokens = false;
            }
            newline_at(pos);
            ++pos;
            continue;
        }

        int tok_line = line;
        int tok_col = col_of(pos);
        line_has_tokens = true;

        // Strings, possibly prefixed.
        std::size_t name_end = pos;
        if (is_name_start(uc)) {
            while (name_end < n && is_name_char(static_cast<unsigned char>(s[name_end]))) ++name_end;
        }
        std::size_t quote_pos = std::string::npos;
        if (c == '\'' || c == '"') quote_pos = pos;
        else if (name_end < n && (s[name_end] == '\'' || s[name_end] == '"') &&
                 is_string_prefix(std::string_view(s).substr(pos, name_end - pos)))
            quote_pos = name_end;

        if (quote_pos != std::string::npos) {
            char q = s[quote_pos];
            bool triple = quote_pos + 2 < n && s[quote_pos + 1] == q && s[quote_pos + 2] == q;
            std::size_t p = quote_pos + (triple ? 3 : 1);
            bool closed = false;
            while (p < n) {
                char d = s[p];
                if (d == '\\') {
                    if (p + 1 < n && s[p + 1] == '\n') newline_at(p + 1);
                    p += 2;
                    continue;
                }
                if (d == '\n') {
                    if (!triple) fail(tok_line, tok_col, "EOL while scanning string literal");
                    newline_at(p);
                    ++p;
                    continue;
                }
                if (d == q) {
                    if (!triple) {
                        ++p;
                        closed = true;
                        break;
                    }
                    if (p + 2 < n && s[p + 1] == q && s[p + 2] == q) {
                        p += 3;
                        closed = true;
                        break;
                    }
                }
                ++p;
            }
            if (!closed || p > n) fail(tok_line, tok_col, triple ? "EOF while scanning triple-quoted string literal"
                                                                  : "EOL while scanning string literal");
            push(TokenType::String, pos, p, tok_line, tok_col, line, col_of(p));
            pos = p;
            continue;
        }

        if (is_name_start(uc)) {
            push(TokenType::Name, pos, name_end, tok_line, tok_col, line, col_of(name_end));
            pos = name_end;
            continue;
        }

        if (std::isdigit(uc) || (c == '.' && pos + 1 < n && std::isdigit(static_cast<unsigned char>(s[pos + 1])))) {
            std::size_t p = pos;
            auto digits = [&](auto pred) {
                while (p < n && (pred(static_cast<unsigned char>(s[p])) || s[p] == '_')) ++p;
            };
            auto dec = [](unsigned char d) { return std::isdigit(d) != 0; };
            if (c == '0' && p + 1 < n && std::strchr("xXoObB", s[p + 1]) != nullptr && s[p + 1] != '\0') {
                char base = static_cast<char>(std::tolower(static_cast<unsigned char>(s[p + 1])));
                p += 2;
                std::size_t digits_start = p;
                if (base == 'x') digits([](unsigned char d) { return std::isxdigit(d) != 0; });
                else if (base == 'o') digits([](unsigned char d) { return d >= '0' && d <= '7'; });
                else digits([](unsigned char d) { return d == '0' || d == '1'; });
                if (p == digits_start) fail(tok_line, tok_col, "invalid numeric literal");
                if (p < n && (s[p] == 'l' || s[p] == 'L')) ++p;
            } else {
                digits(dec);
                if (p < n && s[p] == '.') {
                    ++p;
                    digits(dec);
                }
                if (p < n && (s[p] == 'e' || s[p] == 'E')) {
                    std::size_t q = p + 1;
                    if (q < n && (s[q] == '+' || s[q] == '-')) ++q;
                    if (q < n && std::isdigit(static_cast<unsigned char>(s[q]))) {
                        p = q;
                        digits(dec);
                    }
                }
                if (p < n && (s[p] == 'j' || s[p] == 'J' || s[p] == 'l' || s[p] == 'L')) ++p;
            }
            if (p < n && is_name_char(static_cast<unsigned char>(s[p]))) fail(tok_line, tok_col, "invalid syntax");
            push(TokenType::Number, pos, p, tok_line, tok_col, line, col_of(p));
            pos = p;
            continue;
        }

        std::size_t len = 0;
        std::string_view rest = std::string_view(s).substr(pos);
        for (auto op : kOps3) {
            if (rest.substr(0, 3) == op) len = 3;
        }
        if (len == 0) {
            for (auto op : kOps2) {
                if (rest.substr(0, 2) == op) len = 2;
            }
        }
        if (len == 0 && kOps1.find(c) != std::string_view::npos) len = 1;
        if (len == 0) {
            if (c == '!' || c == '$' || c == '?') fail(tok_line, tok_col, "invalid syntax");
            fail(tok_line, tok_col, "invalid character in source");
        }
        if (len == 1) {
            if (c == '(' || c == '[' || c == '{') brackets.push_back(Open{c, tok_line, tok_col});
            else if (c == ')' || c == ']' || c == '}') {
                char want = c == ')' ? '(' : c == ']' ? '[' : '{';
                if (brackets.empty() || brackets.back().ch != want) fail(tok_line, tok_col, "unmatched bracket");
                brackets.pop_back();
            }
        }
        push(TokenType::Op, pos, pos + len, tok_line, tok_col, line, tok_col + static_cast<int>(len));
        pos += len;
    }

    if (!brackets.empty()) {
        fail(brackets.back().line, brackets.back().col, "unexpected EOF: unclosed bracket");
    }
    if (line_has_tokens && !at_line_start) {
        int col = col_of(pos);
        push(TokenType::Newline, pos, pos, line, col, line, col);
    }
    int col = col_of(pos);
    while (indents.size() > 1) {
        indents.pop_back();
        push(TokenType::Dedent, pos, pos, line, col, line, col);
    }
    push(TokenType::EndMarker, pos, pos, line, col, line, col);

    // Physical extent, for the module span.
    line_count_ = line;
    last_line_length_ = col;
    if (!s.empty() && s.back() == '\n') {
        // Trailing newline ends the last line; the module ends on the line before.
        int l = 1;
        std::size_t last_start = 0;
        for (std::size_t i = 0; i + 1 < s.size(); ++i) {
            if (s[i] == '\n') {
                ++l;
                last_start = i + 1;
            }
        }
        line_count_ = l;
        last_line_length_ = static_cast<int>(s.size() - 1 - last_start);
    }
}

} // namespace fixctx::grammar
