#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fixctx/ingest/ingest.hpp>

namespace fixctx::synth {

/// Injected change families. Noise edits are bug-fix changes outside the
/// families; NonFix changes carry no bug-fix keyword in their message.
enum class Family { KeywordArgument, WrapInIf, DictEntry, Noise, NonFix };

std::string_view family_name(Family f);
std::optional<Family> family_from_name(std::string_view name);

struct CorpusSpec {
    std::size_t per_family = 40;
    std::size_t noise = 80;
    std::size_t non_fix = 0;
    /// Changes that also touch a test file (dropped by the test-file rule).
    std::size_t with_tests = 0;
    /// Noise changes whose new version does not parse.
    std::size_t broken = 0;
    std::uint64_t seed = 7;
    std::string project = "synth/service";
};

/// The bundled 300-change demo corpus.
CorpusSpec demo_spec();

struct SyntheticChange {
    ingest::ChangeRecord record;
    std::vector<ingest::FilePair> files;
    Family family = Family::Noise;
};

/// Deterministic for a given CorpusSpec. Changes are interleaved, not grouped by family.
std::vector<SyntheticChange> generate(const CorpusSpec& spec);

/// Writes a snapshot (changes.jsonl + blobs) plus truth.csv (change_id,family).
void write_corpus(const CorpusSpec& spec, const std::string& dir);
std::map<std::string, Family> read_truth(const std::string& dir);

} // namespace fixctx::synth
