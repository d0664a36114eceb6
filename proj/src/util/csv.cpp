#include <fixctx/util/csv.hpp>

#include <charconv>
#include <cmath>
#include <limits>

#include <fixctx/error.hpp>

namespace fixctx::util {

void CsvWriter::row(const std::vector<std::string>& cells)
{
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ += ',';
        const auto& c = cells[i];
        if (c.find_first_of(",\"\r\n") == std::string::npos) {
            out_ += c;
            continue;
        }
        out_ += '"';
        for (char ch : c) {
            if (ch == '"') out_ += '"';
            out_ += ch;
        }
        out_ += '"';
    }
    out_ += '\n';
}

CsvTable parse_csv(std::string_view text)
{
    CsvTable table;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (quoted) {
            if (c != '"') cell += c;
            else if (i + 1 < text.size() && text[i + 1] == '"') cell += text[++i];
            else quoted = false;
            continue;
        }
        switch (c) {
        case '"':
            quoted = true;
            any = true;
            break;
        case ',':
            row.push_back(std::move(cell));
            cell.clear();
            any = true;
            break;
        case '\r':
            break;
        case '\n':
            row.push_back(std::move(cell));
            cell.clear();
            table.push_back(std::move(row));
            row.clear();
            any = false;
            break;
        default:
            cell += c;
            any = true;
        }
    }
    if (quoted) throw Error("unterminated quoted CSV field");
    if (any) {
        row.push_back(std::move(cell));
        table.push_back(std::move(row));
    }
    return table;
}

double parse_double(std::string_view s)
{
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty()) throw Error("not a number: '" + std::string(s) + "'");
    return v;
}

} // namespace fixctx::util
