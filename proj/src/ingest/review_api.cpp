#include <fixctx/ingest/ingest.hpp>

#include <cctype>
#include <set>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fixctx/util/hash.hpp>
#include <fixctx/util/text.hpp>

namespace fixctx::ingest {

namespace {

std::string url_encode(std::string_view s)
{
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 15];
        }
    }
    return out;
}

bool retryable(int status)
{
    return status == 0 || status == 429 || status >= 500;
}

std::string query_string(const Query& q, const std::string& project, const std::string& branch)
{
    std::string s = "status:merged project:" + project;
    if (!branch.empty()) s += " branch:" + branch;
    if (!q.after.empty()) s += " after:\"" + q.after + "\"";
    if (!q.before.empty()) s += " before:\"" + q.before + "\"";
    return s;
}

ChangeRecord record_from_json(const nlohmann::json& c)
{
    ChangeRecord r;
    r.change_id = c.at("change_id").get<std::string>();
    r.number = std::to_string(c.at("_number").get<long long>());
    r.project = c.at("project").get<std::string>();
    r.branch = c.at("branch").get<std::string>();
    r.created = c.value("created", "");
    r.updated = c.value("updated", "");
    r.revision = c.at("current_revision").get<std::string>();
    const auto& rev = c.at("revisions").at(r.revision);
    const auto& commit = rev.at("commit");
    r.message = commit.value("message", "");
    if (commit.contains("parents") && !commit["parents"].empty()) {
        r.parent_revision = commit["parents"][0].at("commit").get<std::string>();
    }
    if (rev.contains("files")) {
        for (const auto& [path, info] : rev["files"].items()) {
            if (util::starts_with(path, "/")) continue;  // magic files such as /COMMIT_MSG
            FileEntry f;
            f.path = path;
            f.status = file_status_from_name(info.value("status", "M"));
            r.files.push_back(std::move(f));
        }
    }
    return r;
}

} // namespace

std::string_view strip_xssi(std::string_view body)
{
    if (util::starts_with(body, ")]}'")) {
        auto nl = body.find('\n');
        return nl == std::string_view::npos ? std::string_view{} : body.substr(nl + 1);
    }
    return body;
}

ReviewApiSource::ReviewApiSource(std::unique_ptr<Transport> transport, BlobCache* cache, RetryPolicy retry,
                                 std::size_t page_size)
    : sleep([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      transport_(std::move(transport)),
      cache_(cache),
      retry_(retry),
      page_size_(page_size)
{
}

std::string ReviewApiSource::get_with_retry(const std::string& path, bool allow_404, bool* not_found)
{
    auto backoff = retry_.initial_backoff;
    HttpResponse res;
    for (int attempt = 1; attempt <= retry_.attempts; ++attempt) {
        {
            std::lock_guard lock(transport_mu_);
            res = transport_->get(path);
        }
        if (res.status >= 200 && res.status < 300) return res.body;
        if (allow_404 && res.status == 404) {
            if (not_found) *not_found = true;
            return {};
        }
        if (!retryable(res.status)) break;
        if (attempt < retry_.attempts) {
            spdlog::warn("GET {} failed with status {} (attempt {}/{}); retrying in {} ms", path, res.status, attempt,
                         retry_.attempts, backoff.count());
            sleep(backoff);
            backoff *= 2;
        }
    }
    throw FetchError("GET " + path + " failed with status " + std::to_string(res.status) +
                     (res.status == 0 ? " (" + res.body + ")" : ""));
}

std::vector<ChangeRecord> ReviewApiSource::fetch_merged_changes(const Query& q)
{
    std::vector<ChangeRecord> out;
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    std::vector<std::string> branches = q.branches.empty() ? std::vector<std::string>{""} : q.branches;
    for (const auto& project : q.projects) {
        for (const auto& branch : branches) {
            std::size_t offset = 0;
            for (;;) {
                std::string path = "/changes/?q=" + url_encode(query_string(q, project, branch)) +
                                   "&o=CURRENT_REVISION&o=CURRENT_COMMIT&o=CURRENT_FILES&n=" +
                                   std::to_string(page_size_) + "&S=" + std::to_string(offset);
                auto body = get_with_retry(path);
                auto page = nlohmann::json::parse(strip_xssi(body));
                if (!page.is_array()) throw FetchError("change query did not return a list");
                bool more = false;
                for (const auto& c : page) {
                    more = c.value("_more_changes", false);
                    if (c.value("status", "MERGED") != "MERGED") continue;
                    auto r = record_from_json(c);
                    if (seen.emplace(r.change_id, r.project, r.branch).second) out.push_back(std::move(r));
                }
                offset += page.size();
                if (!more || page.empty()) break;
            }
        }
    }
    spdlog::info("review API: {} merged changes", out.size());
    return out;
}

std::string ReviewApiSource::cached_get(const std::string& key, const std::string& path)
{
    if (cache_) {
        if (auto hit = cache_->get(key)) return *hit;
    }
    bool not_found = false;
    auto body = get_with_retry(path, true, &not_found);
    if (not_found) throw MissingBlob(key);
    auto bytes = util::base64_decode(util::trim(body));
    if (cache_) cache_->put(key, bytes);
    return bytes;
}

FilePair ReviewApiSource::fetch_file_pair(const ChangeRecord& r, const FileEntry& f)
{
    FilePair p;
    p.change_id = r.change_id;
    p.path = f.path;
    std::string base = "/changes/" + r.number + "/revisions/" + r.revision + "/files/" + url_encode(f.path) + "/content";
    std::string key = r.change_id + "\n" + f.path + "\n" + r.revision;
    std::string before, after;
    if (f.status != FileStatus::Added) before = cached_get(key + "\nbefore", base + "?parent=1");
    if (f.status != FileStatus::Deleted) after = cached_get(key + "\nafter", base);
    auto b = util::decode_utf8_lossy(before);
    auto a = util::decode_utf8_lossy(after);
    p.before_text = std::move(b.text);
    p.after_text = std::move(a.text);
    p.replaced_bytes = b.replaced + a.replaced;
    if (p.replaced_bytes > 0) spdlog::warn("{} {}: {} invalid UTF-8 sequences replaced", r.number, f.path, p.replaced_bytes);
    return p;
}

} // namespace fixctx::ingest
