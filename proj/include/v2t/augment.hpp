#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "v2t/corpus.hpp"
#include "v2t/grammar.hpp"
#include "v2t/rng.hpp"

namespace v2t {

class TranslationClient;
struct MtDecodeMode;

enum class PairMode { identity, denoise, rtt, rtt_denoise };

std::string pair_mode_name(PairMode mode);
PairMode pair_mode_from_name(const std::string& name);

struct PairParams {
    double dropout_p = 0.2;
    double temperature = 1.0;  // synthetic paraphrase strength
};

struct SentencePair {
    Sentence input;
    Sentence target;
};

struct PairDataset {
    Vocab vocab;
    std::vector<SentencePair> pairs;
    PairMode mode = PairMode::identity;
    PairParams params;
};

struct ParaphraseRecord {
    std::string source;
    std::string pivot;
    std::string round_trip;
    double bleu = 0.0;  // sentence_bleu(round_trip, source)
};

// Each non-EOS token independently removed with probability p; EOS retained.
Sentence word_dropout(const Sentence& s, double p, Rng& rng);

// Meaning-preserving rewrites driven by the grammar: synonym-class phrase
// substitution, adjacent-modifier reordering, filler insertion/deletion.
// Edit rates scale linearly with temperature; temperature 0 is the identity.
// Words outside the grammar pass through unchanged.
class SyntheticParaphraser {
public:
    SyntheticParaphraser(const Vocab& vocab, const GrammarConfig& grammar, std::size_t max_len);

    Sentence operator()(const Sentence& s, double temperature, Rng& rng) const;

private:
    struct PhraseEntry {
        std::vector<std::string> words;
        std::size_t class_index;
    };

    const Vocab* vocab_;
    const GrammarConfig* grammar_;
    std::size_t max_len_;
    std::map<std::string, std::vector<PhraseEntry>> phrases_by_first_word_;
    std::set<std::string> modifier_words_;
    std::set<std::string> verb_words_;
    std::set<std::string> filler_words_;
};

// One pair per source sentence; targets are always the clean originals.
// Per-sentence generators are derived from (seed, sentence index) so output
// does not depend on evaluation order.
PairDataset build_pair_dataset(const SentenceDataset& ds, PairMode mode, const PairParams& params,
                               const GrammarConfig& grammar, std::uint64_t seed);

// Round-trip translation of one sentence through an external MT service.
ParaphraseRecord rtt_via_mt(const std::string& text, TranslationClient& client,
                            std::size_t sentence_index);

std::vector<ParaphraseRecord> rtt_corpus_via_mt(const std::vector<std::string>& texts,
                                                TranslationClient& client);

// TSV formats: pairs are `input<TAB>target`; records are
// `source<TAB>pivot<TAB>round_trip<TAB>bleu` with bleu at 4 decimals.
void write_pair_tsv(const std::filesystem::path& path, const PairDataset& ds);
std::vector<std::pair<std::string, std::string>> read_pair_tsv(const std::filesystem::path& path);
PairDataset load_pair_dataset(const std::filesystem::path& tsv_path, const Vocab& vocab,
                              std::size_t max_len, PairMode mode, const PairParams& params);
void write_record_tsv(const std::filesystem::path& path,
                      const std::vector<ParaphraseRecord>& records);

}  // namespace v2t
