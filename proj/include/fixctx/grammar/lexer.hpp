#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fixctx::grammar {

enum class TokenType { Name, Number, String, Op, Newline, Indent, Dedent, EndMarker };

struct Token {
    TokenType type;
    std::string_view text;
    int line;
    int col;
    int end_line;
    int end_col;
};

/// Tokenizes Python source into logical lines with INDENT/DEDENT tokens.
/// Token text views point into `source()`, which holds the input with
/// line terminators normalized to '\n'.
class Lexer {
public:
    Lexer(std::string_view text, std::string file_name);

    const std::vector<Token>& tokens() const { return tokens_; }
    const std::string& source() const { return source_; }
    int line_count() const { return line_count_; }
    int last_line_length() const { return last_line_length_; }

private:
    void run();
    [[noreturn]] void fail(int line, int col, const std::string& message) const;

    std::string source_;
    std::string file_;
    std::vector<Token> tokens_;
    int line_count_ = 1;
    int last_line_length_ = 0;
};

} // namespace fixctx::grammar
