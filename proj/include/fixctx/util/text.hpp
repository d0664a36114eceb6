#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace fixctx::util {

/// Shortest round-trip decimal form; NaN and infinities print as "nan", "inf", "-inf".
std::string format_double(double value);

std::vector<std::string_view> split_lines(std::string_view text);
std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

struct Utf8Result {
    std::string text;
    std::size_t replaced = 0;  ///< invalid sequences replaced by U+FFFD
};

/// Decodes bytes as UTF-8, replacing malformed sequences.
Utf8Result decode_utf8_lossy(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
/// Writes to a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, std::string_view content);

} // namespace fixctx::util
