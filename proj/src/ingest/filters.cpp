#include <fixctx/ingest/ingest.hpp>

#include <cctype>

#include <fixctx/util/text.hpp>

namespace fixctx::embedded {
std::string_view release_table();
}

namespace fixctx::ingest {

bool KeywordFilter::operator()(std::string_view message) const
{
    std::string text = case_insensitive ? util::to_lower(message) : std::string(message);
    for (const auto& kw : keywords) {
        std::string k = case_insensitive ? util::to_lower(kw) : kw;
        if (k.empty()) continue;
        for (auto pos = text.find(k); pos != std::string::npos; pos = text.find(k, pos + 1)) {
            if (!word_bounded || pos == 0 || !std::isalnum(static_cast<unsigned char>(text[pos - 1]))) return true;
        }
    }
    return false;
}

bool TestFileRule::is_test(std::string_view path) const
{
    std::size_t start = 0;
    while (start <= path.size()) {
        auto end = path.find('/', start);
        if (end == std::string_view::npos) end = path.size();
        auto seg = path.substr(start, end - start);
        for (const auto& p : segment_prefixes)
            if (util::starts_with(seg, p)) return true;
        if (end == path.size()) {
            auto stem = seg.substr(0, seg.rfind('.'));
            for (const auto& s : stem_suffixes)
                if (stem.size() >= s.size() && stem.substr(stem.size() - s.size()) == s) return true;
        }
        start = end + 1;
    }
    return false;
}

std::vector<std::string> exclude_test_files(const std::vector<std::string>& paths, const TestFileRule& rule)
{
    std::vector<std::string> out;
    for (const auto& p : paths)
        if (!rule.is_test(p)) out.push_back(p);
    return out;
}

std::map<std::string, std::string> parse_release_table(std::string_view text)
{
    std::map<std::string, std::string> out;
    for (auto raw : util::split_lines(text)) {
        auto line = util::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string_view::npos) throw Error("release table: malformed line '" + std::string(line) + "'");
        out[util::to_lower(util::trim(line.substr(0, eq)))] = std::string(util::trim(line.substr(eq + 1)));
    }
    return out;
}

const std::map<std::string, std::string>& release_branches()
{
    static const auto table = parse_release_table(embedded::release_table());
    return table;
}

std::string branch_for_release(std::string_view release)
{
    auto it = release_branches().find(util::to_lower(release));
    if (it == release_branches().end()) throw Error("unknown release '" + std::string(release) + "'");
    return it->second;
}

std::string_view file_status_name(FileStatus s)
{
    switch (s) {
    case FileStatus::Added:
        return "A";
    case FileStatus::Deleted:
        return "D";
    default:
        return "M";
    }
}

FileStatus file_status_from_name(std::string_view s)
{
    if (s == "A") return FileStatus::Added;
    if (s == "D") return FileStatus::Deleted;
    return FileStatus::Modified;
}

} // namespace fixctx::ingest
