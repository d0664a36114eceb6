#include <fixctx/features/features.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <fixctx/util/csv.hpp>
#include <fixctx/util/text.hpp>

namespace fixctx::features {

using diff::ChangeLabel;
using diff::DiffNode;

void WeightConfig::validate() const
{
    for (double v : {w_type, w_role, r, c}) {
        if (!std::isfinite(v) || v <= 0) throw Error("weights must be finite and strictly positive");
    }
}

std::string FeatureId::name() const
{
    std::string out = direction == Direction::Add ? "add_" : "rem_";
    if (role) {
        out += grammar::role_name(*role);
        out += '_';
    }
    out += grammar::kind_name(kind);
    return out;
}

FeatureId FeatureId::parse(std::string_view name)
{
    FeatureId id;
    if (util::starts_with(name, "add_")) id.direction = Direction::Add;
    else if (util::starts_with(name, "rem_")) id.direction = Direction::Rem;
    else throw Error("not a change feature: " + std::string(name));
    auto rest = name.substr(4);
    // Kind names never contain '_'; role names may (FunctionDef-Decorator_list).
    auto cut = rest.rfind('_');
    auto kind = grammar::kind_from_name(cut == std::string_view::npos ? rest : rest.substr(cut + 1));
    if (!kind) throw Error("unknown kind in feature " + std::string(name));
    id.kind = *kind;
    if (cut != std::string_view::npos) {
        auto role = grammar::taxonomy().find_role(rest.substr(0, cut));
        if (!role) throw Error("unknown role in feature " + std::string(name));
        id.role = role;
    }
    return id;
}

namespace {

void accumulate(const DiffNode& n, std::size_t level, const WeightConfig& w, std::map<std::string, double>& out)
{
    FeatureId id;
    id.direction = n.label == ChangeLabel::Plus ? Direction::Add : Direction::Rem;
    id.kind = n.kind;
    const double scale = std::pow(w.r, static_cast<double>(level));
    out[id.name()] += w.w_type / scale;
    if (n.role) {
        id.role = n.role;
        out[id.name()] += (w.w_role * w.c) / scale;
    }
    for (const auto& c : n.children) accumulate(c, level + 1, w, out);
}

} // namespace

FeatureVector hunk_feature_vector(const diff::Hunk& h, const WeightConfig& w)
{
    w.validate();
    FeatureVector v;
    v.hunk_id = h.id;
    for (const auto& root : h.labeled_roots) accumulate(root, 0, w, v.entries);
    if (auto height = diff::hunk_height(h); height > 15) {
        spdlog::warn("hunk {} has height {} (> 15); small contributions lose integer exactness", h.id, height);
    }
    std::erase_if(v.entries, [](const auto& kv) { return kv.second == 0.0; });
    return v;
}

double FeatureMatrix::at(std::size_t row, std::size_t col) const
{
    const auto& r = cells.at(row);
    auto it = std::lower_bound(r.begin(), r.end(), col, [](const auto& p, std::size_t c) { return p.first < c; });
    return it != r.end() && it->first == col ? it->second : 0.0;
}

std::vector<double> FeatureMatrix::dense_row(std::size_t row) const
{
    std::vector<double> out(columns.size(), 0.0);
    for (const auto& [c, v] : cells.at(row)) out[c] = v;
    return out;
}

FeatureMatrix assemble_matrix(const std::vector<FeatureVector>& vectors)
{
    FeatureMatrix m;
    std::unordered_set<std::string> seen;
    std::set<std::string> names;
    for (const auto& v : vectors) {
        if (!seen.insert(v.hunk_id).second) throw DuplicateHunkId(v.hunk_id);
        for (const auto& [name, value] : v.entries) {
            if (value != 0.0) names.insert(name);
        }
    }
    m.columns.assign(names.begin(), names.end());
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < m.columns.size(); ++i) index[m.columns[i]] = i;
    for (const auto& v : vectors) {
        m.rows.push_back(v.hunk_id);
        auto& row = m.cells.emplace_back();
        for (const auto& [name, value] : v.entries) {
            if (value != 0.0) row.emplace_back(index.at(name), value);
        }
        std::sort(row.begin(), row.end());
    }
    return m;
}

std::string to_csv(const FeatureMatrix& m)
{
    util::CsvWriter w;
    std::vector<std::string> header{"hunk_id"};
    header.insert(header.end(), m.columns.begin(), m.columns.end());
    w.row(header);
    for (std::size_t r = 0; r < m.rows.size(); ++r) {
        std::vector<std::string> cells{m.rows[r]};
        for (double v : m.dense_row(r)) cells.push_back(util::format_double(v));
        w.row(cells);
    }
    return w.str();
}

FeatureMatrix matrix_from_csv(std::string_view csv)
{
    auto table = util::parse_csv(csv);
    if (table.empty() || table[0].empty() || table[0][0] != "hunk_id") throw Error("feature CSV lacks a hunk_id header");
    FeatureMatrix m;
    m.columns.assign(table[0].begin() + 1, table[0].end());
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& row = table[r];
        if (row.size() != table[0].size()) throw Error("feature CSV row " + std::to_string(r) + " has wrong width");
        m.rows.push_back(row[0]);
        auto& cells = m.cells.emplace_back();
        for (std::size_t c = 1; c < row.size(); ++c) {
            double v = util::parse_double(row[c]);
            if (v != 0.0) cells.emplace_back(c - 1, v);
        }
    }
    return m;
}

std::string to_jsonl(const std::vector<FeatureVector>& vectors)
{
    std::string out;
    for (const auto& v : vectors) {
        nlohmann::ordered_json j;
        j["hunk_id"] = v.hunk_id;
        auto& e = j["features"] = nlohmann::ordered_json::object();
        for (const auto& [k, val] : v.entries) e[k] = val;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<FeatureVector> vectors_from_jsonl(std::string_view text)
{
    std::vector<FeatureVector> out;
    for (auto line : util::split_lines(text)) {
        if (util::trim(line).empty()) continue;
        auto j = nlohmann::json::parse(line);
        FeatureVector v;
        v.hunk_id = j.at("hunk_id").get<std::string>();
        for (auto& [k, val] : j.at("features").items()) v.entries[k] = val.get<double>();
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace fixctx::features
