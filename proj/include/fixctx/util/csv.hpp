#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fixctx::util {

/// RFC 4180 writer: fields containing `,`, `"` or a line break are quoted.
class CsvWriter {
public:
    void row(const std::vector<std::string>& cells);
    const std::string& str() const { return out_; }

private:
    std::string out_;
};

using CsvTable = std::vector<std::vector<std::string>>;

/// Throws fixctx::Error on an unterminated quoted field.
CsvTable parse_csv(std::string_view text);

/// Strict: the whole string must be a number ("nan"/"inf" accepted).
double parse_double(std::string_view s);

} // namespace fixctx::util
