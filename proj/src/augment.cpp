#include "v2t/augment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "v2t/bleu.hpp"
#include "v2t/errors.hpp"
#include "v2t/mt_client.hpp"

namespace v2t {

std::string pair_mode_name(PairMode mode) {
    switch (mode) {
        case PairMode::identity: return "identity";
        case PairMode::denoise: return "denoise";
        case PairMode::rtt: return "rtt";
        case PairMode::rtt_denoise: return "rtt_denoise";
    }
    throw ConfigError("unknown pair mode");
}

PairMode pair_mode_from_name(const std::string& name) {
    if (name == "identity") return PairMode::identity;
    if (name == "denoise") return PairMode::denoise;
    if (name == "rtt") return PairMode::rtt;
    if (name == "rtt_denoise" || name == "rtt+denoise") return PairMode::rtt_denoise;
    throw ConfigError("unknown pair mode '" + name + "'");
}

Sentence word_dropout(const Sentence& s, double p, Rng& rng) {
    if (p < 0.0 || p > 1.0) throw ConfigError("dropout probability must be in [0,1]");
    Sentence out;
    out.token_ids.reserve(s.token_ids.size());
    for (std::size_t i = 0; i + 1 < s.token_ids.size(); ++i) {
        if (!rng.bernoulli(p)) out.token_ids.push_back(s.token_ids[i]);
    }
    out.token_ids.push_back(kEosId);
    return out;
}

SyntheticParaphraser::SyntheticParaphraser(const Vocab& vocab, const GrammarConfig& grammar,
                                           std::size_t max_len)
    : vocab_(&vocab), grammar_(&grammar), max_len_(max_len) {
    for (std::size_t c = 0; c < grammar.synonym_classes.size(); ++c) {
        for (const auto& phrase : grammar.synonym_classes[c]) {
            auto words = whitespace_tokens(phrase);
            if (words.empty()) continue;
            phrases_by_first_word_[words.front()].push_back({std::move(words), c});
        }
    }
    // Longest phrase first so multiword members win over their head word.
    for (auto& [first, entries] : phrases_by_first_word_) {
        std::sort(entries.begin(), entries.end(), [](const PhraseEntry& a, const PhraseEntry& b) {
            return a.words.size() > b.words.size();
        });
    }
    for (const auto& topic : grammar.topics) {
        for (const auto& m : topic.modifiers) modifier_words_.insert(m);
        for (const auto& v : topic.verbs) {
            auto words = whitespace_tokens(v);
            if (words.size() == 1) verb_words_.insert(words.front());
        }
    }
    filler_words_.insert(grammar.fillers.begin(), grammar.fillers.end());
}

Sentence SyntheticParaphraser::operator()(const Sentence& s, double temperature, Rng& rng) const {
    if (temperature < 0.0) throw ConfigError("paraphrase temperature must be >= 0");
    const double syn_rate = std::min(1.0, 0.5 * temperature);
    const double swap_rate = std::min(1.0, 0.35 * temperature);
    const double filler_rate = std::min(1.0, 0.3 * temperature);

    std::vector<std::string> words = whitespace_tokens(decode_tokens(*vocab_, s.token_ids));

    // Pass 1: synonym-class substitution, leftmost-longest match.
    if (temperature > 0.0) {
        std::vector<std::string> next;
        std::size_t i = 0;
        while (i < words.size()) {
            const PhraseEntry* match = nullptr;
            auto it = phrases_by_first_word_.find(words[i]);
            if (it != phrases_by_first_word_.end()) {
                for (const auto& entry : it->second) {
                    if (i + entry.words.size() <= words.size() &&
                        std::equal(entry.words.begin(), entry.words.end(), words.begin() + i)) {
                        match = &entry;
                        break;
                    }
                }
            }
            if (match == nullptr) {
                next.push_back(words[i++]);
                continue;
            }
            if (rng.bernoulli(syn_rate)) {
                const auto& cls = grammar_->synonym_classes[match->class_index];
                std::string joined;
                for (std::size_t w = 0; w < match->words.size(); ++w) {
                    if (w) joined += ' ';
                    joined += match->words[w];
                }
                // Uniform over the other members.
                std::vector<const std::string*> others;
                for (const auto& member : cls) {
                    if (member != joined) others.push_back(&member);
                }
                const std::string& pickd = *others[rng.uniform(others.size())];
                for (auto& w : whitespace_tokens(pickd)) next.push_back(std::move(w));
            } else {
                for (const auto& w : match->words) next.push_back(w);
            }
            i += match->words.size();
        }
        words = std::move(next);
    }

    // Pass 2: adjacent-modifier reordering ("a and b" or "a b" with both modifiers).
    if (temperature > 0.0) {
        for (std::size_t i = 0; i + 2 < words.size(); ++i) {
            if (words[i + 1] == "and" && modifier_words_.count(words[i]) &&
                modifier_words_.count(words[i + 2]) && rng.bernoulli(swap_rate)) {
                std::swap(words[i], words[i + 2]);
                i += 2;
            }
        }
        for (std::size_t i = 0; i + 1 < words.size(); ++i) {
            if (modifier_words_.count(words[i]) && modifier_words_.count(words[i + 1]) &&
                rng.bernoulli(swap_rate)) {
                std::swap(words[i], words[i + 1]);
                ++i;
            }
        }
    }

    // Pass 3: filler deletion then insertion before the first verb.
    if (temperature > 0.0) {
        std::vector<std::string> next;
        for (auto& w : words) {
            if (filler_words_.count(w) && rng.bernoulli(filler_rate)) continue;
            next.push_back(std::move(w));
        }
        words = std::move(next);
        for (std::size_t i = 0; i < words.size(); ++i) {
            if (verb_words_.count(words[i])) {
                if (rng.bernoulli(filler_rate)) {
                    const auto& filler = grammar_->fillers[rng.uniform(grammar_->fillers.size())];
                    words.insert(words.begin() + static_cast<std::ptrdiff_t>(i), filler);
                }
                break;
            }
        }
    }

    std::string text;
    for (const auto& w : words) {
        if (!text.empty()) text += ' ';
        text += w;
    }
    return encode_sentence(*vocab_, text, max_len_);
}

PairDataset build_pair_dataset(const SentenceDataset& ds, PairMode mode, const PairParams& params,
                               const GrammarConfig& grammar, std::uint64_t seed) {
    if (params.dropout_p < 0.0 || params.dropout_p > 1.0) {
        throw ConfigError("dropout probability must be in [0,1]");
    }
    PairDataset out;
    out.vocab = ds.vocab;
    out.mode = mode;
    out.params = params;
    out.pairs.reserve(ds.sentences.size());

    std::size_t max_len = 0;
    for (const auto& s : ds.sentences) max_len = std::max(max_len, s.token_ids.size());
    SyntheticParaphraser paraphrase(out.vocab, grammar, std::max<std::size_t>(max_len + 8, 24));

    Rng base(seed);
    for (std::size_t i = 0; i < ds.sentences.size(); ++i) {
        Rng rng = base.split(i);
        const Sentence& target = ds.sentences[i];
        Sentence input;
        switch (mode) {
            case PairMode::identity: input = target; break;
            case PairMode::denoise: input = word_dropout(target, params.dropout_p, rng); break;
            case PairMode::rtt: input = paraphrase(target, params.temperature, rng); break;
            case PairMode::rtt_denoise: {
                Sentence mid = paraphrase(target, params.temperature, rng);
                input = word_dropout(mid, params.dropout_p, rng);
                break;
            }
        }
        if (input.text.empty()) input.text = decode_tokens(out.vocab, input.token_ids);
        out.pairs.push_back({std::move(input), target});
    }
    return out;
}

ParaphraseRecord rtt_via_mt(const std::string& text, TranslationClient& client,
                            std::size_t sentence_index) {
    try {
        ParaphraseRecord rec;
        rec.source = text;
        rec.pivot = client.translate_batch({text}, Direction::forward).front();
        rec.round_trip = client.translate_batch({rec.pivot}, Direction::backward).front();
        rec.bleu = sentence_bleu(rec.round_trip, rec.source);
        return rec;
    } catch (const Error& e) {
        throw AugmentError("round-trip translation failed at sentence " +
                               std::to_string(sentence_index) + ": " + e.what(),
                           sentence_index);
    }
}

std::vector<ParaphraseRecord> rtt_corpus_via_mt(const std::vector<std::string>& texts,
                                                TranslationClient& client) {
    std::vector<ParaphraseRecord> out;
    out.reserve(texts.size());
    std::vector<std::string> pivots;
    std::vector<std::string> round_trips;
    try {
        pivots = client.translate_batch(texts, Direction::forward);
        round_trips = client.translate_batch(pivots, Direction::backward);
    } catch (const Error& e) {
        throw AugmentError(std::string("round-trip translation failed: ") + e.what(), 0);
    }
    for (std::size_t i = 0; i < texts.size(); ++i) {
        out.push_back({texts[i], pivots[i], round_trips[i],
                       sentence_bleu(round_trips[i], texts[i])});
    }
    return out;
}

void write_pair_tsv(const std::filesystem::path& path, const PairDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& pair : ds.pairs) {
        out << decode_tokens(ds.vocab, pair.input.token_ids) << '\t'
            << decode_tokens(ds.vocab, pair.target.token_ids) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<std::pair<std::string, std::string>> read_pair_tsv(const std::filesystem::path& path) {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError("pair line without tab in " + path.string());
        pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return pairs;
}

PairDataset load_pair_dataset(const std::filesystem::path& tsv_path, const Vocab& vocab,
                              std::size_t max_len, PairMode mode, const PairParams& params) {
    PairDataset ds;
    ds.vocab = vocab;
    ds.mode = mode;
    ds.params = params;
    for (const auto& [input, target] : read_pair_tsv(tsv_path)) {
        ds.pairs.push_back({encode_sentence(vocab, input, max_len),
                            encode_sentence(vocab, target, max_len)});
    }
    return ds;
}

void write_record_tsv(const std::filesystem::path& path,
                      const std::vector<ParaphraseRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    char bleu[32];
    for (const auto& rec : records) {
        std::snprintf(bleu, sizeof bleu, "%.4f", rec.bleu);
        out << rec.source << '\t' << rec.pivot << '\t' << rec.round_trip << '\t' << bleu << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace v2t
