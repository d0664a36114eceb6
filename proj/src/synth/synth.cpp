#include <fixctx/synth/synth.hpp>

#include <algorithm>
#include <filesystem>
#include <random>

#include <fixctx/util/csv.hpp>
#include <fixctx/util/hash.hpp>
#include <fixctx/util/text.hpp>

namespace fs = std::filesystem;

namespace fixctx::synth {

namespace {

enum class Stmt { CallAssign, CallExpr, DictAssign, AugAssign, LogCall, Notify, Loop, Guard, Return, Other };

struct Line {
    int indent = 0;
    std::string text;
    Stmt kind = Stmt::Other;
};

const std::vector<std::string> kVars{"result", "value", "data", "item_id", "resp", "count", "status",
                                     "host",   "port",  "volume", "instance", "payload", "entry", "node"};
const std::vector<std::string> kObjects{"self.driver", "self.client", "self.db", "utils", "self._api", "rpc"};
const std::vector<std::string> kMethods{"get",    "update", "create", "delete",  "fetch",   "attach",
                                        "detach", "sync",   "notify", "allocate", "refresh", "lookup"};
const std::vector<std::string> kKeys{"id",          "name",       "status",    "host", "size",  "mac_address",
                                     "ip_address", "tenant_id", "zone",      "flavor", "owner", "device"};
const std::vector<std::string> kKeywords{"timeout", "force", "context",  "retry",
                                         "read_deleted", "check", "quiet", "ignore_errors"};
const std::vector<std::string> kClasses{"Manager", "Driver", "Scheduler", "Controller", "Agent", "Service"};
const std::vector<std::string> kModules{"os", "sys", "time", "json", "logging", "functools", "itertools"};

class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(seed) {}

    std::size_t below(std::size_t n)
    {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_);
    }
    bool chance(double p) { return std::uniform_real_distribution<double>(0, 1)(rng_) < p; }
    const std::string& pick(const std::vector<std::string>& v) { return v[below(v.size())]; }

    std::string args(std::size_t n)
    {
        std::string out;
        for (std::size_t k = 0; k < n; ++k) out += (k ? ", " : "") + pick(kVars);
        return out;
    }

    std::string call() { return pick(kObjects) + "." + pick(kMethods) + "(" + args(1 + below(3)) + ")"; }

    std::string dict()
    {
        std::size_t n = 2 + below(2);
        std::vector<std::string> keys = kKeys;
        std::shuffle(keys.begin(), keys.end(), rng_);
        std::string out = "{";
        for (std::size_t k = 0; k < n; ++k) out += (k ? ", '" : "'") + keys[k] + "': " + pick(kVars);
        return out + "}";
    }

    Line statement(int indent, Stmt kind)
    {
        switch (kind) {
        case Stmt::CallAssign:
            return {indent, pick(kVars) + " = " + call(), kind};
        case Stmt::CallExpr:
            return {indent, call(), kind};
        case Stmt::DictAssign:
            return {indent, pick(kVars) + " = " + dict(), kind};
        case Stmt::AugAssign:
            return {indent, pick(kVars) + " += 1", kind};
        case Stmt::LogCall:
            return {indent, "LOG.debug('" + pick(kMethods) + " %s', " + pick(kVars) + ")", kind};
        case Stmt::Notify:
            return {indent, "self.notifier.info(ctx, '" + pick(kVars) + "." + pick(kMethods) + "')", kind};
        default:
            return {indent, "pass", Stmt::Other};
        }
    }

    void body(std::vector<Line>& out, int indent, bool rich)
    {
        std::vector<Stmt> kinds;
        if (rich) kinds = {Stmt::CallAssign, Stmt::CallExpr, Stmt::DictAssign, Stmt::AugAssign, Stmt::Notify};
        std::size_t extra = 2 + below(4);
        const std::vector<Stmt> pool{Stmt::CallAssign, Stmt::CallExpr, Stmt::DictAssign, Stmt::AugAssign,
                                     Stmt::LogCall,    Stmt::Loop,     Stmt::Guard};
        for (std::size_t k = 0; k < extra; ++k) kinds.push_back(pool[below(pool.size())]);
        std::shuffle(kinds.begin(), kinds.end(), rng_);
        for (Stmt s : kinds) {
            if (s == Stmt::Loop) {
                out.push_back({indent, "for item in " + pick(kVars) + ":", Stmt::Loop});
                out.push_back({indent + 1, pick(kObjects) + "." + pick(kMethods) + "(item)", Stmt::Other});
            } else if (s == Stmt::Guard) {
                out.push_back({indent, "if " + pick(kVars) + " is None:", Stmt::Guard});
                out.push_back({indent + 1, pick(kVars) + " = " + std::to_string(below(10)), Stmt::Other});
            } else {
                out.push_back(statement(indent, s));
            }
        }
        out.push_back({indent, "return " + pick(kVars), Stmt::Return});
    }

    std::vector<Line> program()
    {
        std::vector<Line> out;
        std::vector<std::string> mods = kModules;
        std::shuffle(mods.begin(), mods.end(), rng_);
        std::size_t n_imports = 1 + below(3);
        std::sort(mods.begin(), mods.begin() + static_cast<std::ptrdiff_t>(n_imports));
        for (std::size_t k = 0; k < n_imports; ++k) out.push_back({0, "import " + mods[k], Stmt::Other});
        out.push_back({0, "", Stmt::Other});
        out.push_back({0, "LOG = logging.getLogger(__name__)", Stmt::Other});
        out.push_back({0, "", Stmt::Other});
        out.push_back({0, "", Stmt::Other});
        out.push_back({0, "class " + pick(kClasses) + "(object):", Stmt::Other});
        out.push_back({0, "", Stmt::Other});
        out.push_back({1, "def __init__(self, driver):", Stmt::Other});
        out.push_back({2, "self.driver = driver", Stmt::Other});
        out.push_back({2, "self.enabled = True", Stmt::Other});
        std::size_t methods = 2 + below(3);
        std::vector<std::string> names = kMethods;
        std::shuffle(names.begin(), names.end(), rng_);
        for (std::size_t m = 0; m < methods; ++m) {
            out.push_back({0, "", Stmt::Other});
            std::string name = (chance(0.3) ? "_" : "") + names[m] + "_" + pick(kVars);
            out.push_back({1, "def " + name + "(self, ctx, " + args(1 + below(2)) + "):", Stmt::Other});
            body(out, 2, m == 0);
        }
        out.push_back({0, "", Stmt::Other});
        out.push_back({0, "", Stmt::Other});
        out.push_back({0, "def " + pick(kMethods) + "_all(" + args(2) + "):", Stmt::Other});
        body(out, 1, false);
        return out;
    }

    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

std::string render(const std::vector<Line>& lines)
{
    std::string out;
    for (const auto& l : lines) {
        if (!l.text.empty()) out += std::string(static_cast<std::size_t>(l.indent) * 4, ' ') + l.text;
        out += '\n';
    }
    return out;
}

std::vector<std::size_t> slots(const std::vector<Line>& lines, std::initializer_list<Stmt> kinds)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (std::find(kinds.begin(), kinds.end(), lines[i].kind) != kinds.end()) out.push_back(i);
    return out;
}

void insert_before_last(std::string& s, char closing, const std::string& text)
{
    s.insert(s.rfind(closing), text);
}

/// Applies one edit and returns a message fragment describing it.
std::string edit_keyword(Gen& g, std::vector<Line>& p)
{
    auto c = slots(p, {Stmt::CallAssign, Stmt::CallExpr});
    auto& line = p[c[g.below(c.size())]];
    const auto& kw = g.pick(kKeywords);
    static const std::vector<std::string> values{"True", "False", "None", "ctx", "True", "False", "30", "'all'"};
    insert_before_last(line.text, ')', ", " + kw + "=" + g.pick(values));
    return "Fix missing " + kw + " argument";
}

std::string edit_wrap(Gen& g, std::vector<Line>& p)
{
    auto c = slots(p, {Stmt::Notify});
    auto at = c[g.below(c.size())];
    static const std::vector<std::string> conds{"self.enabled", "self.enabled", "self.enabled", "self.enabled",
                                                "force",        "force",        "not quiet",    "host is not None"};
    auto cond = g.pick(conds);
    Line guard{p[at].indent, "if " + cond + ":", Stmt::Guard};
    p[at].indent += 1;
    p[at].kind = Stmt::Other;
    p.insert(p.begin() + static_cast<std::ptrdiff_t>(at), guard);
    return "Fix call made when " + cond + " does not hold";
}

std::string edit_dict(Gen& g, std::vector<Line>& p)
{
    auto c = slots(p, {Stmt::DictAssign});
    auto& line = p[c[g.below(c.size())]];
    std::string key;
    do {
        key = g.pick(kKeys);
    } while (line.text.find("'" + key + "'") != std::string::npos);
    insert_before_last(line.text, '}', ", '" + key + "': " + g.pick(kVars));
    return "Fix missing '" + key + "' entry";
}

std::string edit_noise(Gen& g, std::vector<Line>& p)
{
    for (;;) {
        switch (g.below(10)) {
        case 0: {
            auto c = slots(p, {Stmt::CallAssign});
            if (c.empty()) break;
            auto& t = p[c[g.below(c.size())]].text;
            t = "new_" + t;
            return "Fix variable shadowing";
        }
        case 1: {
            auto c = slots(p, {Stmt::AugAssign});
            if (c.empty()) break;
            auto& t = p[c[g.below(c.size())]].text;
            t.replace(t.size() - 1, 1, std::to_string(2 + g.below(5)));
            return "Fix counter increment";
        }
        case 2: {
            auto c = slots(p, {Stmt::Return});
            auto at = c[g.below(c.size())];
            p.insert(p.begin() + static_cast<std::ptrdiff_t>(at), Line{p[at].indent, g.pick(kVars) + " = None", Stmt::Other});
            return "Fix stale value";
        }
        case 3: {
            auto c = slots(p, {Stmt::AugAssign, Stmt::LogCall});
            if (c.empty()) break;
            p.erase(p.begin() + static_cast<std::ptrdiff_t>(c[g.below(c.size())]));
            return "Fix redundant statement";
        }
        case 4: {
            auto c = slots(p, {Stmt::CallAssign, Stmt::CallExpr});
            auto& t = p[c[g.below(c.size())]].text;
            auto paren = t.find('(');
            t.insert(paren, "_v2");
            return "Fix wrong API method";
        }
        case 5: {
            auto c = slots(p, {Stmt::CallAssign, Stmt::CallExpr});
            insert_before_last(p[c[g.below(c.size())]].text, ')', ", " + g.pick(kVars));
            return "Fix missing positional argument";
        }
        case 6: {
            auto c = slots(p, {Stmt::LogCall});
            if (c.empty()) break;
            auto& t = p[c[g.below(c.size())]].text;
            t.insert(t.find('\'') + 1, "failed to ");
            return "Fix log message";
        }
        case 7: {
            p.insert(p.begin(), Line{0, "import " + g.pick(kModules), Stmt::Other});
            return "Fix missing import";
        }
        case 8: {
            auto c = slots(p, {Stmt::Return});
            auto& t = p[c[g.below(c.size())]].text;
            t = "return " + g.pick(kVars) + "_list";
            return "Fix returned value";
        }
        default: {
            p.push_back({0, "", Stmt::Other});
            p.push_back({0, "", Stmt::Other});
            p.push_back({0, "def _" + g.pick(kMethods) + "_helper(" + g.args(1) + "):", Stmt::Other});
            p.push_back({1, "return " + g.call(), Stmt::Return});
            return "Fix by adding helper";
        }
        }
    }
}

std::string hex_id(std::string_view seed_text)
{
    return util::sha256_hex(seed_text).substr(0, 40);
}

} // namespace

std::string_view family_name(Family f)
{
    switch (f) {
    case Family::KeywordArgument:
        return "keyword-argument";
    case Family::WrapInIf:
        return "wrap-in-if";
    case Family::DictEntry:
        return "dict-entry";
    case Family::Noise:
        return "noise";
    default:
        return "non-fix";
    }
}

std::optional<Family> family_from_name(std::string_view name)
{
    for (auto f : {Family::KeywordArgument, Family::WrapInIf, Family::DictEntry, Family::Noise, Family::NonFix})
        if (family_name(f) == name) return f;
    return std::nullopt;
}

CorpusSpec demo_spec()
{
    CorpusSpec s;
    s.per_family = 60;
    s.noise = 80;
    s.non_fix = 40;
    s.with_tests = 30;
    s.broken = 2;
    s.seed = 2017;
    s.project = "demo/compute";
    return s;
}

std::vector<SyntheticChange> generate(const CorpusSpec& spec)
{
    Gen g(spec.seed);
    std::vector<Family> plan;
    for (auto f : {Family::KeywordArgument, Family::WrapInIf, Family::DictEntry})
        plan.insert(plan.end(), spec.per_family, f);
    plan.insert(plan.end(), spec.noise, Family::Noise);
    plan.insert(plan.end(), spec.non_fix, Family::NonFix);
    std::shuffle(plan.begin(), plan.end(), g.rng());

    std::vector<std::size_t> noise_at, all(plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i)
        if (plan[i] == Family::Noise) noise_at.push_back(i);
    std::vector<bool> broken(plan.size()), tests(plan.size());
    for (std::size_t k = 0; k < spec.broken && k < noise_at.size(); ++k) broken[noise_at[k]] = true;
    for (std::size_t k = 0; k < spec.with_tests && k < plan.size(); ++k) tests[(k * 7 + 3) % plan.size()] = true;

    std::vector<SyntheticChange> out;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        auto before = g.program();
        auto after = before;
        std::string what;
        switch (plan[i]) {
        case Family::KeywordArgument:
            what = edit_keyword(g, after);
            break;
        case Family::WrapInIf:
            what = edit_wrap(g, after);
            break;
        case Family::DictEntry:
            what = edit_dict(g, after);
            break;
        default:
            what = edit_noise(g, after);
            break;
        }
        if (broken[i]) after.push_back({0, "def broken(:", Stmt::Other});

        SyntheticChange c;
        c.family = plan[i];
        auto& r = c.record;
        r.change_id = "I" + hex_id(std::to_string(spec.seed) + "/" + std::to_string(i));
        r.number = std::to_string(10000 + i);
        r.project = spec.project;
        r.branch = "master";
        r.parent_revision = hex_id("parent/" + r.change_id);
        r.revision = hex_id("rev/" + r.change_id);
        if (plan[i] == Family::NonFix) {
            static const std::vector<std::string> chores{"Refresh module layout", "Add docstrings", "Update helpers",
                                                         "Tidy imports", "Rework call sites"};
            r.message = g.pick(chores) + "\n\nChange-Id: " + r.change_id + "\n";
        } else {
            r.message = what + " in " + g.pick(kMethods) + "\n\nCloses-Bug: #" + std::to_string(1600000 + i) +
                        "\nChange-Id: " + r.change_id + "\n";
        }
        int day = static_cast<int>(i % 28) + 1, month = static_cast<int>(i / 28 % 12) + 1;
        char stamp[32];
        std::snprintf(stamp, sizeof stamp, "2017-%02d-%02d 12:00:00.000000000", month, day);
        r.created = stamp;
        r.updated = stamp;

        std::string path = "service/module_" + std::to_string(i) + ".py";
        r.files.push_back({path, ingest::FileStatus::Modified});
        c.files.push_back({r.change_id, path, render(before), render(after), 0});
        if (tests[i]) {
            std::string tpath = "service/tests/test_module_" + std::to_string(i) + ".py";
            r.files.push_back({tpath, ingest::FileStatus::Modified});
            c.files.push_back({r.change_id, tpath, "def test_a():\n    pass\n", "def test_a():\n    assert True\n", 0});
        }
        out.push_back(std::move(c));
    }
    return out;
}

void write_corpus(const CorpusSpec& spec, const std::string& dir)
{
    fs::remove_all(dir);
    ingest::Snapshot snap(dir);
    util::CsvWriter truth;
    truth.row({"change_id", "family"});
    for (const auto& c : generate(spec)) {
        snap.add(c.record, c.files);
        truth.row({c.record.change_id, std::string(family_name(c.family))});
    }
    snap.write();
    util::write_file_atomic((fs::path(dir) / "truth.csv").string(), truth.str());
}

std::map<std::string, Family> read_truth(const std::string& dir)
{
    auto table = util::parse_csv(util::read_file((fs::path(dir) / "truth.csv").string()));
    std::map<std::string, Family> out;
    for (std::size_t r = 1; r < table.size(); ++r) {
        if (table[r].size() != 2) continue;
        auto f = family_from_name(table[r][1]);
        if (!f) throw Error("truth.csv: unknown family '" + table[r][1] + "'");
        out[table[r][0]] = *f;
    }
    return out;
}

} // namespace fixctx::synth
