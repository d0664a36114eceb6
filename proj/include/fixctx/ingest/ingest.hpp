#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fixctx/error.hpp>

namespace fixctx::ingest {

enum class FileStatus { Modified, Added, Deleted };

struct FileEntry {
    std::string path;
    FileStatus status = FileStatus::Modified;
};

struct ChangeRecord {
    std::string change_id;
    std::string number;  ///< review number or commit sha for local sources
    std::string project;
    std::string branch;
    std::string revision;
    std::string parent_revision;
    std::string message;
    std::string created;
    std::string updated;
    std::vector<FileEntry> files;
};

struct FilePair {
    std::string change_id;
    std::string path;
    std::string before_text;
    std::string after_text;
    std::size_t replaced_bytes = 0;  ///< invalid UTF-8 sequences replaced while decoding
};

class MissingBlob : public Error {
public:
    explicit MissingBlob(const std::string& what) : Error("missing blob: " + what) {}
};

class FetchError : public Error {
public:
    using Error::Error;
};

// --- filters ---------------------------------------------------------------

struct KeywordFilter {
    std::vector<std::string> keywords{"bug", "fix", "fault", "fail", "patch"};
    bool case_insensitive = true;
    /// Keyword must start at a word boundary ("fixes" matches, "dispatch" does not).
    bool word_bounded = false;

    bool operator()(std::string_view message) const;
};

struct TestFileRule {
    /// A path segment equal to or starting with one of these marks a test file.
    std::vector<std::string> segment_prefixes{"test"};
    /// A file stem ending with one of these marks a test file.
    std::vector<std::string> stem_suffixes{"_test"};

    bool is_test(std::string_view path) const;
};

std::vector<std::string> exclude_test_files(const std::vector<std::string>& paths, const TestFileRule& rule = {});

/// Release name -> branch, from a `name = branch` table.
std::map<std::string, std::string> parse_release_table(std::string_view text);
const std::map<std::string, std::string>& release_branches();
std::string branch_for_release(std::string_view release);

// --- cache -----------------------------------------------------------------

/// Content-addressed on-disk store. Entries are keyed by an arbitrary string;
/// each hit is verified against the digest recorded at insertion.
class BlobCache {
public:
    explicit BlobCache(std::string dir);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, std::string_view bytes);
    const std::string& dir() const { return dir_; }

    std::size_t hits() const { return hits_; }
    std::size_t misses() const { return misses_; }

private:
    std::string dir_;
    mutable std::mutex mu_;
    mutable std::size_t hits_ = 0, misses_ = 0;
};

// --- sources ---------------------------------------------------------------

struct HttpResponse {
    int status = 0;
    std::string body;
};

/// GET-only transport; the path includes the query string.
class Transport {
public:
    virtual ~Transport() = default;
    virtual HttpResponse get(const std::string& path) = 0;
};

/// HTTPS/HTTP transport for a base URL such as https://review.opendev.org.
std::unique_ptr<Transport> make_http_transport(const std::string& base_url, std::chrono::seconds timeout);

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

struct Query {
    std::vector<std::string> projects;
    std::vector<std::string> branches;
    std::string after;   ///< inclusive date, YYYY-MM-DD; empty = unbounded
    std::string before;  ///< exclusive date
};

class ChangeSource {
public:
    virtual ~ChangeSource() = default;
    /// Complete, de-duplicated list of merged changes; throws instead of
    /// returning partial results.
    virtual std::vector<ChangeRecord> fetch_merged_changes(const Query& q) = 0;
    virtual FilePair fetch_file_pair(const ChangeRecord& r, const FileEntry& f) = 0;
};

/// Gerrit-style review REST API.
class ReviewApiSource final : public ChangeSource {
public:
    ReviewApiSource(std::unique_ptr<Transport> transport, BlobCache* cache = nullptr, RetryPolicy retry = {},
                    std::size_t page_size = 100);

    std::vector<ChangeRecord> fetch_merged_changes(const Query& q) override;
    FilePair fetch_file_pair(const ChangeRecord& r, const FileEntry& f) override;

    /// Injected by tests to avoid real sleeping.
    std::function<void(std::chrono::milliseconds)> sleep;

private:
    std::string get_with_retry(const std::string& path, bool allow_404 = false, bool* not_found = nullptr);
    std::string cached_get(const std::string& key, const std::string& path);

    std::unique_ptr<Transport> transport_;
    BlobCache* cache_;
    RetryPolicy retry_;
    std::size_t page_size_;
    std::mutex transport_mu_;
};

/// Strips the `)]}'` anti-XSSI first line if present.
std::string_view strip_xssi(std::string_view body);

/// Local git repository: each first-parent commit on a branch is one change
/// (merge commits take their message from the merged side).
class GitSource final : public ChangeSource {
public:
    explicit GitSource(std::string repo_dir, std::string project_name = {});

    std::vector<ChangeRecord> fetch_merged_changes(const Query& q) override;
    FilePair fetch_file_pair(const ChangeRecord& r, const FileEntry& f) override;

private:
    std::string git(const std::vector<std::string>& args, bool allow_failure = false, int* status = nullptr) const;

    std::string repo_;
    std::string project_;
};

/// Runs argv without a shell; returns stdout. Throws on spawn failure.
std::string run_process(const std::vector<std::string>& argv, int* exit_status = nullptr);

// --- snapshot --------------------------------------------------------------

/// Immutable on-disk result of ingestion: changes.jsonl plus blobs/<sha256>.
class Snapshot {
public:
    struct StoredFile {
        std::string path;
        FileStatus status = FileStatus::Modified;
        std::string before_digest;  ///< empty for added files
        std::string after_digest;   ///< empty for deleted files
    };
    struct StoredChange {
        ChangeRecord record;
        std::vector<StoredFile> files;
    };

    explicit Snapshot(std::string dir) : dir_(std::move(dir)) {}

    /// Adds a change and its file texts. Not thread-safe.
    void add(const ChangeRecord& r, const std::vector<FilePair>& pairs);
    void write() const;
    static Snapshot read(const std::string& dir);

    const std::vector<StoredChange>& changes() const { return changes_; }
    std::string blob(const std::string& digest) const;
    FilePair file_pair(const StoredChange& c, const StoredFile& f) const;
    const std::string& dir() const { return dir_; }

private:
    std::string put_blob(std::string_view bytes);

    std::string dir_;
    std::vector<StoredChange> changes_;
};

/// Replays a stored snapshot as a change source. Projects and branches in
/// the query restrict the replay when non-empty.
class SnapshotSource final : public ChangeSource {
public:
    explicit SnapshotSource(const std::string& dir);

    std::vector<ChangeRecord> fetch_merged_changes(const Query& q) override;
    FilePair fetch_file_pair(const ChangeRecord& r, const FileEntry& f) override;

private:
    Snapshot snapshot_;
    std::map<std::string, std::size_t> by_id_;
};

struct IngestConfig {
    Query query;
    KeywordFilter keywords;
    TestFileRule tests;
    /// Only files with one of these suffixes are kept.
    std::vector<std::string> extensions{".py"};
    std::size_t concurrency = 4;
};

struct IngestStats {
    std::size_t changes_seen = 0;
    std::size_t changes_kept = 0;
    std::size_t files_kept = 0;
    std::size_t files_excluded = 0;
    std::size_t decode_warnings = 0;
};

/// Fetches, filters and stores everything into `out`.
IngestStats ingest(ChangeSource& source, const IngestConfig& cfg, Snapshot& out);

std::string_view file_status_name(FileStatus s);
FileStatus file_status_from_name(std::string_view s);

} // namespace fixctx::ingest
