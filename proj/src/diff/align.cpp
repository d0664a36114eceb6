#include <fixctx/diff/diff.hpp>

#include <algorithm>
#include <functional>
#include <string>

#include <spdlog/spdlog.h>

#include <fixctx/util/text.hpp>

namespace fixctx::diff {

namespace {

std::vector<std::string> physical_lines(std::string_view text)
{
    if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::vector<std::string> lines;
    std::string cur;
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            lines.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(std::move(cur));
    return lines;
}

} // namespace

Alignment align_versions(std::string_view before_text, std::string_view after_text, std::size_t max_cells)
{
    const auto a = physical_lines(before_text);
    const auto b = physical_lines(after_text);
    const std::size_t n = a.size(), m = b.size();

    Alignment out;
    out.before_to_after.assign(n + 1, 0);
    out.after_to_before.assign(m + 1, 0);

    std::size_t pre = 0;
    while (pre < n && pre < m && a[pre] == b[pre]) ++pre;
    std::size_t suf = 0;
    while (suf < n - pre && suf < m - pre && a[n - 1 - suf] == b[m - 1 - suf]) ++suf;

    auto link = [&](std::size_t i, std::size_t j) {  // 0-based
        out.before_to_after[i + 1] = static_cast<int>(j + 1);
        out.after_to_before[j + 1] = static_cast<int>(i + 1);
    };
    for (std::size_t k = 0; k < pre; ++k) link(k, k);
    for (std::size_t k = 0; k < suf; ++k) link(n - 1 - k, m - 1 - k);

    const std::size_t rn = n - pre - suf, rm = m - pre - suf;
    if (rn > 0 && rm > 0) {
        if (rn * rm > max_cells) {
            out.fallback = true;
            spdlog::warn("line alignment fallback: {}x{} middle section treated as replaced", rn, rm);
        } else {
            std::hash<std::string> h;
            std::vector<std::size_t> ha(rn), hb(rm);
            for (std::size_t i = 0; i < rn; ++i) ha[i] = h(a[pre + i]);
            for (std::size_t j = 0; j < rm; ++j) hb[j] = h(b[pre + j]);
            auto eq = [&](std::size_t i, std::size_t j) { return ha[i] == hb[j] && a[pre + i] == b[pre + j]; };
            // Suffix LCS table: dp[i][j] = LCS of a[i..], b[j..].
            const std::size_t w = rm + 1;
            std::vector<std::uint16_t> dp((rn + 1) * w, 0);
            for (std::size_t i = rn; i-- > 0;) {
                for (std::size_t j = rm; j-- > 0;) {
                    dp[i * w + j] = eq(i, j) ? static_cast<std::uint16_t>(dp[(i + 1) * w + j + 1] + 1)
                                             : std::max(dp[(i + 1) * w + j], dp[i * w + j + 1]);
                }
            }
            std::size_t i = 0, j = 0;
            while (i < rn && j < rm) {
                if (eq(i, j)) {
                    link(pre + i, pre + j);
                    ++i;
                    ++j;
                    continue;
                }
                auto down = dp[(i + 1) * w + j], right = dp[i * w + j + 1];
                if (down > right) ++i;
                else if (right > down) ++j;
                else if (a[pre + i] < b[pre + j]) ++i;  // order-independent tie-break
                else ++j;
            }
        }
    }

    // Collect maximal runs of unmatched lines into blocks.
    std::size_t i = 1, j = 1;
    while (i <= n || j <= m) {
        if (i <= n && j <= m && out.before_to_after[i] == static_cast<int>(j)) {
            ++i;
            ++j;
            continue;
        }
        EditBlock blk;
        blk.removed.start = static_cast<int>(i);
        blk.added.start = static_cast<int>(j);
        while (i <= n && out.before_to_after[i] == 0) ++i;
        while (j <= m && out.after_to_before[j] == 0) ++j;
        blk.removed.count = static_cast<int>(i) - blk.removed.start;
        blk.added.count = static_cast<int>(j) - blk.added.start;
        out.blocks.push_back(blk);
    }
    return out;
}

} // namespace fixctx::diff
