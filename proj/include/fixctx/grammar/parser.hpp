#pragma once

#include <string>
#include <string_view>

#include <fixctx/error.hpp>
#include <fixctx/grammar/ast.hpp>

namespace fixctx::grammar {

/// Source dialect accepted by the front-end. Both map onto the same
/// Python 2.7 canonical taxonomy.
enum class Dialect {
    Py27,  ///< print/exec statements, `except E, e`, backticks, `<>`
    Py3,   ///< print/exec are names; `nonlocal`, `raise .. from`, annotations, keyword-only args
};

Dialect parse_dialect(std::string_view tag);
std::string_view dialect_tag(Dialect dialect);

class SyntaxError : public Error {
public:
    SyntaxError(std::string file, int line, int col, const std::string& message);

    const std::string& file() const { return file_; }
    int line() const { return line_; }
    int col() const { return col_; }

private:
    std::string file_;
    int line_;
    int col_;
};

/// Parses a whole module. Pure function of (text, dialect).
AstNode parse_source(std::string_view text, Dialect dialect, std::string_view file_name = "<string>");

} // namespace fixctx::grammar
