#include <fixctx/ingest/ingest.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fixctx/util/hash.hpp>
#include <fixctx/util/text.hpp>

namespace fs = std::filesystem;

namespace fixctx::ingest {

namespace {

nlohmann::json record_json(const ChangeRecord& r)
{
    return {{"change_id", r.change_id}, {"number", r.number},   {"project", r.project},
            {"branch", r.branch},       {"revision", r.revision}, {"parent_revision", r.parent_revision},
            {"message", r.message},     {"created", r.created},  {"updated", r.updated}};
}

ChangeRecord record_from(const nlohmann::json& j)
{
    ChangeRecord r;
    r.change_id = j.at("change_id").get<std::string>();
    r.number = j.value("number", "");
    r.project = j.value("project", "");
    r.branch = j.value("branch", "");
    r.revision = j.value("revision", "");
    r.parent_revision = j.value("parent_revision", "");
    r.message = j.value("message", "");
    r.created = j.value("created", "");
    r.updated = j.value("updated", "");
    return r;
}

bool has_suffix(std::string_view s, std::string_view suffix)
{
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

} // namespace

std::string Snapshot::put_blob(std::string_view bytes)
{
    auto digest = util::sha256_hex(bytes);
    fs::path p = fs::path(dir_) / "blobs" / digest;
    if (!fs::exists(p)) {
        fs::create_directories(p.parent_path());
        util::write_file_atomic(p.string(), bytes);
    }
    return digest;
}

void Snapshot::add(const ChangeRecord& r, const std::vector<FilePair>& pairs)
{
    StoredChange c;
    c.record = r;
    for (const auto& p : pairs) {
        StoredFile f;
        f.path = p.path;
        for (const auto& e : r.files) {
            if (e.path == p.path) f.status = e.status;
        }
        if (f.status != FileStatus::Added) f.before_digest = put_blob(p.before_text);
        if (f.status != FileStatus::Deleted) f.after_digest = put_blob(p.after_text);
        c.files.push_back(std::move(f));
    }
    c.record.files.clear();
    for (const auto& f : c.files) c.record.files.push_back(FileEntry{f.path, f.status});
    changes_.push_back(std::move(c));
}

void Snapshot::write() const
{
    fs::create_directories(dir_);
    std::string out;
    for (const auto& c : changes_) {
        auto j = record_json(c.record);
        auto& files = j["files"] = nlohmann::json::array();
        for (const auto& f : c.files) {
            files.push_back({{"path", f.path},
                             {"status", file_status_name(f.status)},
                             {"before", f.before_digest},
                             {"after", f.after_digest}});
        }
        out += j.dump();
        out += '\n';
    }
    util::write_file_atomic((fs::path(dir_) / "changes.jsonl").string(), out);
}

Snapshot Snapshot::read(const std::string& dir)
{
    auto path = fs::path(dir) / "changes.jsonl";
    if (!fs::exists(path)) throw Error("snapshot not found: " + path.string());
    Snapshot s(dir);
    auto text = util::read_file(path.string());
    std::size_t lineno = 0;
    for (auto line : util::split_lines(text)) {
        ++lineno;
        if (util::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        StoredChange c;
        c.record = record_from(j);
        for (const auto& fj : j.at("files")) {
            StoredFile f;
            f.path = fj.at("path").get<std::string>();
            f.status = file_status_from_name(fj.value("status", "M"));
            f.before_digest = fj.value("before", "");
            f.after_digest = fj.value("after", "");
            c.record.files.push_back(FileEntry{f.path, f.status});
            c.files.push_back(std::move(f));
        }
        s.changes_.push_back(std::move(c));
    }
    return s;
}

std::string Snapshot::blob(const std::string& digest) const
{
    if (digest.empty()) return {};
    auto p = fs::path(dir_) / "blobs" / digest;
    if (!fs::exists(p)) throw MissingBlob(digest);
    auto bytes = util::read_file(p.string());
    if (util::sha256_hex(bytes) != digest) throw Error("corrupt blob " + digest);
    return bytes;
}

FilePair Snapshot::file_pair(const StoredChange& c, const StoredFile& f) const
{
    FilePair p;
    p.change_id = c.record.change_id;
    p.path = f.path;
    p.before_text = blob(f.before_digest);
    p.after_text = blob(f.after_digest);
    return p;
}

IngestStats ingest(ChangeSource& source, const IngestConfig& cfg, Snapshot& out)
{
    IngestStats stats;
    auto changes = source.fetch_merged_changes(cfg.query);
    stats.changes_seen = changes.size();

    struct Task {
        std::size_t change;
        FileEntry file;
    };
    std::vector<ChangeRecord> kept;
    std::vector<std::vector<FileEntry>> kept_files;
    for (auto& r : changes) {
        if (!cfg.keywords(r.message)) continue;
        std::vector<FileEntry> files;
        for (const auto& f : r.files) {
            bool ext = cfg.extensions.empty();
            for (const auto& e : cfg.extensions) ext = ext || has_suffix(f.path, e);
            if (!ext) continue;
            if (cfg.tests.is_test(f.path)) {
                ++stats.files_excluded;
                continue;
            }
            files.push_back(f);
        }
        if (files.empty()) continue;
        kept.push_back(r);
        kept_files.push_back(std::move(files));
    }

    std::vector<Task> tasks;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        for (const auto& f : kept_files[i]) tasks.push_back(Task{i, f});
    }
    std::vector<FilePair> results(tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;
    auto worker = [&] {
        for (;;) {
            std::size_t k = next.fetch_add(1);
            if (k >= tasks.size()) return;
            {
                std::lock_guard lock(failure_mu);
                if (failure) return;
            }
            try {
                results[k] = source.fetch_file_pair(kept[tasks[k].change], tasks[k].file);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    std::size_t n_threads = std::max<std::size_t>(1, std::min(cfg.concurrency, tasks.size()));
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::size_t k = 0;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        std::vector<FilePair> pairs;
        for (std::size_t f = 0; f < kept_files[i].size(); ++f, ++k) {
            if (results[k].replaced_bytes > 0) ++stats.decode_warnings;
            pairs.push_back(std::move(results[k]));
        }
        auto r = kept[i];
        r.files = kept_files[i];
        out.add(r, pairs);
        stats.files_kept += pairs.size();
    }
    stats.changes_kept = kept.size();
    spdlog::info("ingest: {} changes seen, {} kept, {} files kept, {} test files excluded", stats.changes_seen,
                 stats.changes_kept, stats.files_kept, stats.files_excluded);
    return stats;
}

} // namespace fixctx::ingest

namespace fixctx::ingest {

SnapshotSource::SnapshotSource(const std::string& dir) : snapshot_(Snapshot::read(dir))
{
    for (std::size_t i = 0; i < snapshot_.changes().size(); ++i) {
        const auto& r = snapshot_.changes()[i].record;
        by_id_.emplace(r.change_id + "\n" + r.revision, i);
    }
}

std::vector<ChangeRecord> SnapshotSource::fetch_merged_changes(const Query& q)
{
    auto listed = [](const std::vector<std::string>& allowed, const std::string& v) {
        return allowed.empty() || std::find(allowed.begin(), allowed.end(), v) != allowed.end();
    };
    std::vector<ChangeRecord> out;
    for (const auto& c : snapshot_.changes()) {
        if (listed(q.projects, c.record.project) && listed(q.branches, c.record.branch)) out.push_back(c.record);
    }
    return out;
}

FilePair SnapshotSource::fetch_file_pair(const ChangeRecord& r, const FileEntry& f)
{
    auto it = by_id_.find(r.change_id + "\n" + r.revision);
    if (it != by_id_.end()) {
        const auto& c = snapshot_.changes()[it->second];
        for (const auto& sf : c.files) {
            if (sf.path == f.path) return snapshot_.file_pair(c, sf);
        }
    }
    throw MissingBlob(r.change_id + ":" + f.path);
}

} // namespace fixctx::ingest
