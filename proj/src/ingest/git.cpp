#include <fixctx/ingest/ingest.hpp>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <set>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <spdlog/spdlog.h>

#include <fixctx/util/text.hpp>

namespace fixctx::ingest {

std::string run_process(const std::vector<std::string>& argv, int* exit_status)
{
    if (argv.empty()) throw Error("run_process: empty argv");
    int fds[2];
    if (pipe(fds) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
    pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        throw Error(std::string("fork: ") + std::strerror(errno));
    }
    if (pid == 0) {
        dup2(fds[1], STDOUT_FILENO);
        int devnull = open("/dev/null", O_WRONLY);
        if (devnull >= 0) dup2(devnull, STDERR_FILENO);
        close(fds[0]);
        close(fds[1]);
        std::vector<char*> args;
        for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
        args.push_back(nullptr);
        execvp(args[0], args.data());
        _exit(127);
    }
    close(fds[1]);
    std::string out;
    char buf[65536];
    for (;;) {
        ssize_t n = read(fds[0], buf, sizeof buf);
        if (n > 0) out.append(buf, static_cast<std::size_t>(n));
        else if (n == 0) break;
        else if (errno != EINTR) break;
    }
    close(fds[0]);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
    if (code == 127) throw Error("cannot execute " + argv[0]);
    if (exit_status) *exit_status = code;
    return out;
}

GitSource::GitSource(std::string repo_dir, std::string project_name)
    : repo_(std::move(repo_dir)), project_(std::move(project_name))
{
    if (project_.empty()) project_ = std::filesystem::path(repo_).lexically_normal().filename().string();
    if (project_.empty()) project_ = std::filesystem::path(repo_).lexically_normal().parent_path().filename().string();
}

std::string GitSource::git(const std::vector<std::string>& args, bool allow_failure, int* status) const
{
    std::vector<std::string> argv{"git", "-C", repo_};
    argv.insert(argv.end(), args.begin(), args.end());
    int code = 0;
    auto out = run_process(argv, &code);
    if (status) *status = code;
    if (code != 0 && !allow_failure) throw FetchError("git " + args.front() + " failed with exit status " + std::to_string(code));
    return out;
}

namespace {

std::vector<std::string> split(std::string_view s, char sep)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto p = s.find(sep, start);
        if (p == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, p - start));
        start = p + 1;
    }
}

} // namespace

std::vector<ChangeRecord> GitSource::fetch_merged_changes(const Query& q)
{
    std::vector<std::string> branches = q.branches.empty() ? std::vector<std::string>{"HEAD"} : q.branches;
    std::vector<ChangeRecord> out;
    std::set<std::string> seen;
    for (const auto& branch : branches) {
        std::vector<std::string> args{"log", "--first-parent", "--format=%H%x00%P%x00%aI%x00%cI%x00%B%x1e"};
        if (!q.after.empty()) args.push_back("--since=" + q.after);
        if (!q.before.empty()) args.push_back("--until=" + q.before);
        args.push_back(branch);
        args.push_back("--");
        auto log = git(args);
        for (auto& rec : split(log, '\x1e')) {
            auto entry = util::trim(rec);
            if (entry.empty()) continue;
            auto f = split(entry, '\0');
            if (f.size() < 5) throw FetchError("unexpected git log record");
            ChangeRecord r;
            r.change_id = f[0];
            r.number = f[0];
            r.revision = f[0];
            r.project = project_;
            r.branch = branch;
            r.created = f[2];
            r.updated = f[3];
            auto parents = split(f[1], ' ');
            if (!parents.empty() && !parents[0].empty()) r.parent_revision = parents[0];
            r.message = f[4];
            if (parents.size() > 1) r.message = git({"log", "-1", "--format=%B", r.revision + "^2"});
            if (!seen.insert(r.change_id).second) continue;

            std::vector<std::string> dt{"diff-tree", "-r", "--no-renames", "--name-status", "-z"};
            if (r.parent_revision.empty()) dt.push_back("--root");
            else dt.push_back(r.parent_revision);
            dt.push_back(r.revision);
            std::vector<std::string> fields;
            for (auto& x : split(git(dt), '\0'))
                if (!x.empty()) fields.push_back(std::move(x));
            for (std::size_t k = 0; k + 1 < fields.size(); k += 2) {
                FileEntry fe;
                fe.status = file_status_from_name(fields[k].substr(0, 1));
                fe.path = fields[k + 1];
                r.files.push_back(std::move(fe));
            }
            out.push_back(std::move(r));
        }
    }
    spdlog::info("git {}: {} first-parent changes", repo_, out.size());
    return out;
}

FilePair GitSource::fetch_file_pair(const ChangeRecord& r, const FileEntry& f)
{
    auto show = [&](const std::string& rev) {
        int status = 0;
        auto out = git({"show", rev + ":" + f.path}, true, &status);
        if (status != 0) throw MissingBlob(rev + ":" + f.path);
        return out;
    };
    std::string before, after;
    if (f.status != FileStatus::Added && !r.parent_revision.empty()) before = show(r.parent_revision);
    if (f.status != FileStatus::Deleted) after = show(r.revision);
    auto b = util::decode_utf8_lossy(before);
    auto a = util::decode_utf8_lossy(after);
    FilePair p{r.change_id, f.path, std::move(b.text), std::move(a.text), b.replaced + a.replaced};
    if (p.replaced_bytes > 0) spdlog::warn("{} {}: {} invalid UTF-8 sequences replaced", r.number, f.path, p.replaced_bytes);
    return p;
}

} // namespace fixctx::ingest
