#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "v2t/augment.hpp"
#include "v2t/bleu.hpp"
#include "v2t/errors.hpp"
#include "v2t/grammar.hpp"

using namespace v2t;

namespace {

SentenceDataset grammar_dataset(std::uint64_t seed, std::size_t n) {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    auto corpus = generate_synthetic_corpus(seed, n, grammar);
    std::vector<std::string> texts;
    for (const auto& lt : corpus) texts.push_back(lt.text);
    SentenceDataset ds;
    ds.vocab = build_vocab(texts, 512, 1);
    ds.split_tag = "train";
    for (const auto& t : texts) ds.sentences.push_back(encode_sentence(ds.vocab, t, 24));
    return ds;
}

bool is_subsequence(const std::vector<TokenId>& sub, const std::vector<TokenId>& full) {
    std::size_t i = 0;
    for (TokenId id : full) {
        if (i < sub.size() && sub[i] == id) ++i;
    }
    return i == sub.size();
}

}  // namespace

TEST_CASE("word_dropout endpoint probabilities") {
    Vocab v = build_vocab({"a b c d e f"}, 12, 1);
    Sentence s = encode_sentence(v, "a b c d e f", 24);
    Rng rng(1);
    CHECK(word_dropout(s, 0.0, rng).token_ids == s.token_ids);
    Sentence gone = word_dropout(s, 1.0, rng);
    CHECK(gone.token_ids == std::vector<TokenId>{kEosId});
    CHECK_THROWS_AS(word_dropout(s, -0.1, rng), ConfigError);
    CHECK_THROWS_AS(word_dropout(s, 1.5, rng), ConfigError);
}

TEST_CASE("word_dropout keeps order and EOS") {
    Vocab v = build_vocab({"a b c d e f g h"}, 16, 1);
    Sentence s = encode_sentence(v, "a b c d e f g h", 24);
    Rng rng(4);
    for (int i = 0; i < 200; ++i) {
        Sentence d = word_dropout(s, 0.4, rng);
        REQUIRE(!d.token_ids.empty());
        CHECK(d.token_ids.back() == kEosId);
        CHECK(std::count(d.token_ids.begin(), d.token_ids.end(), kEosId) == 1);
        CHECK(is_subsequence(d.token_ids, s.token_ids));
    }
}

TEST_CASE("word_dropout retention matches the binomial expectation") {
    Vocab v = build_vocab({"a b c d e f g h i j"}, 16, 1);
    Sentence s = encode_sentence(v, "a b c d e f g h i j", 24);
    const double p = 0.2;
    const int trials = 100000;
    const int len = s.n_words();
    Rng rng(9);
    long kept = 0;
    for (int i = 0; i < trials; ++i) kept += word_dropout(s, p, rng).n_words();
    double mean_kept = static_cast<double>(kept) / trials;
    double sigma = std::sqrt(p * (1 - p) * len / static_cast<double>(trials));
    CHECK(std::fabs(mean_kept - (1 - p) * len) < 4 * sigma);
}

TEST_CASE("sentence_bleu endpoints") {
    CHECK(sentence_bleu("the quick brown fox jumps", "the quick brown fox jumps") ==
          doctest::Approx(100.0));
    CHECK(sentence_bleu("aa bb cc", "dd ee ff") == 0.0);
    CHECK(sentence_bleu("", "anything here") == 0.0);
    CHECK(sentence_bleu("abc", "abc") == doctest::Approx(100.0));
}

TEST_CASE("sentence_bleu matches the reference implementation") {
    CHECK(sentence_bleu("the cat sat", "the cat sat down") ==
          doctest::Approx(100.0 * std::exp(-1.0 / 3.0)).epsilon(1e-9));
    CHECK(sentence_bleu("the cat sat", "the cat sat down") ==
          doctest::Approx(oracle::reference_bleu("the cat sat", "the cat sat down"))
              .epsilon(1e-9));

    GrammarConfig grammar = GrammarConfig::default_grammar();
    SentenceDataset ds = grammar_dataset(31, 60);
    SyntheticParaphraser paraphrase(ds.vocab, grammar, 32);
    Rng rng(13);
    int checked = 0;
    for (std::size_t i = 0; i + 1 < ds.sentences.size(); i += 1) {
        Sentence p = paraphrase(ds.sentences[i], 1.2, rng);
        std::string hyp = decode_tokens(ds.vocab, p.token_ids);
        std::string ref = ds.sentences[i].text;
        double mine = sentence_bleu(hyp, ref);
        double reference = oracle::reference_bleu(hyp, ref);
        CHECK(mine == doctest::Approx(reference).epsilon(1e-8));
        CHECK(mine >= 0.0);
        CHECK(mine <= 100.0);
        ++checked;
    }
    CHECK(checked >= 50);
}

TEST_CASE("bleu histogram binning") {
    BleuHistogram all_hundred = bleu_histogram(std::vector<double>(10, 100.0), 5);
    CHECK(all_hundred.bins.back() == 10);
    CHECK(all_hundred.exact_100 == 10);
    CHECK(all_hundred.total == 10);

    BleuHistogram empty = bleu_histogram({}, 4);
    for (auto b : empty.bins) CHECK(b == 0);
    CHECK(empty.exact_100 == 0);

    BleuHistogram spread = bleu_histogram({0.0, 10.0, 55.0, 99.9}, 10);
    CHECK(spread.bins[0] == 1);
    CHECK(spread.bins[1] == 1);
    CHECK(spread.bins[5] == 1);
    CHECK(spread.bins[9] == 1);
    CHECK(spread.exact_100 == 0);

    CHECK_THROWS_AS(bleu_histogram({1.0}, 1), ConfigError);
}

TEST_CASE("paraphrase at temperature zero is the identity") {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    SentenceDataset ds = grammar_dataset(17, 300);
    SyntheticParaphraser paraphrase(ds.vocab, grammar, 32);
    Rng rng(5);
    for (const auto& s : ds.sentences) {
        CHECK(paraphrase(s, 0.0, rng).token_ids == s.token_ids);
    }
}

TEST_CASE("paraphrase applies the shipped synonym table") {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    // The grammar ships going -> {heading, on my way}.
    bool has_entry = false;
    for (const auto& cls : grammar.synonym_classes) {
        if (std::find(cls.begin(), cls.end(), "going") != cls.end() &&
            std::find(cls.begin(), cls.end(), "on my way") != cls.end()) {
            has_entry = true;
        }
    }
    CHECK(has_entry);

    Vocab v = build_vocab(
        {"i m going on my way heading to the beach seaside really just often certainly "
         "probably definitely"},
        40, 1);
    SyntheticParaphraser paraphrase(v, grammar, 32);
    Sentence s = encode_sentence(v, "i m going to the beach", 24);
    std::set<std::string> seen;
    Rng rng(23);
    for (int i = 0; i < 300; ++i) {
        seen.insert(decode_tokens(v, paraphrase(s, 1.0, rng).token_ids));
    }
    CHECK(seen.count("i m on my way to the beach") == 1);
    CHECK(seen.count("i m heading to the beach") == 1);
    for (const auto& out : seen) CHECK(out.find("<unk>") == std::string::npos);
}

TEST_CASE("paraphrase passes unknown tokens through unchanged") {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    Vocab v = build_vocab({"zzz qqq www"}, 16, 1);
    SyntheticParaphraser paraphrase(v, grammar, 24);
    Sentence s = encode_sentence(v, "zzz qqq www", 24);
    Rng rng(2);
    for (int i = 0; i < 20; ++i) CHECK(paraphrase(s, 1.0, rng).token_ids == s.token_ids);
}

TEST_CASE("mean paraphrase BLEU strictly decreases with temperature") {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    SentenceDataset ds = grammar_dataset(41, 1000);
    SyntheticParaphraser paraphrase(ds.vocab, grammar, 32);
    double means[3];
    double temps[3] = {0.0, 0.5, 1.0};
    for (int t = 0; t < 3; ++t) {
        Rng rng(100 + t);
        double total = 0.0;
        for (const auto& s : ds.sentences) {
            Sentence p = paraphrase(s, temps[t], rng);
            total += sentence_bleu(decode_tokens(ds.vocab, p.token_ids), s.text);
        }
        means[t] = total / static_cast<double>(ds.sentences.size());
    }
    CHECK(means[0] == doctest::Approx(100.0));
    CHECK(means[1] < means[0] - 1.0);
    CHECK(means[2] < means[1] - 1.0);
}

TEST_CASE("higher temperature shrinks the exact-100 BLEU fraction") {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    SentenceDataset ds = grammar_dataset(43, 1000);
    SyntheticParaphraser paraphrase(ds.vocab, grammar, 32);
    auto exact_fraction = [&](double temperature, std::uint64_t seed) {
        Rng rng(seed);
        std::vector<double> scores;
        for (const auto& s : ds.sentences) {
            Sentence p = paraphrase(s, temperature, rng);
            scores.push_back(sentence_bleu(decode_tokens(ds.vocab, p.token_ids), s.text));
        }
        BleuHistogram h = bleu_histogram(scores, 20);
        return static_cast<double>(h.exact_100) / static_cast<double>(h.total);
    };
    double low = exact_fraction(0.2, 303);
    double high = exact_fraction(1.0, 304);
    CHECK(high < low);
}

TEST_CASE("build_pair_dataset identity and determinism") {
    SentenceDataset ds = grammar_dataset(51, 400);
    GrammarConfig grammar = GrammarConfig::default_grammar();
    PairParams params;

    PairDataset identity = build_pair_dataset(ds, PairMode::identity, params, grammar, 1);
    REQUIRE(identity.pairs.size() == ds.sentences.size());
    for (const auto& pair : identity.pairs) {
        CHECK(pair.input.token_ids == pair.target.token_ids);
    }

    PairDataset a = build_pair_dataset(ds, PairMode::rtt_denoise, params, grammar, 5);
    PairDataset b = build_pair_dataset(ds, PairMode::rtt_denoise, params, grammar, 5);
    REQUIRE(a.pairs.size() == b.pairs.size());
    for (std::size_t i = 0; i < a.pairs.size(); ++i) {
        CHECK(a.pairs[i].input.token_ids == b.pairs[i].input.token_ids);
    }
}

TEST_CASE("denoise pairs have inputs that subsequence their targets") {
    SentenceDataset ds = grammar_dataset(52, 300);
    GrammarConfig grammar = GrammarConfig::default_grammar();
    PairParams params;
    PairDataset denoise = build_pair_dataset(ds, PairMode::denoise, params, grammar, 3);
    for (const auto& pair : denoise.pairs) {
        CHECK(is_subsequence(pair.input.token_ids, pair.target.token_ids));
    }
}

TEST_CASE("denoise mean input length is about (1-p) of the target length") {
    SentenceDataset ds = grammar_dataset(53, 10000);
    GrammarConfig grammar = GrammarConfig::default_grammar();
    PairParams params;
    params.dropout_p = 0.2;
    PairDataset denoise = build_pair_dataset(ds, PairMode::denoise, params, grammar, 11);
    double in_total = 0.0, target_total = 0.0;
    for (const auto& pair : denoise.pairs) {
        in_total += pair.input.n_words();
        target_total += pair.target.n_words();
    }
    double ratio = in_total / target_total;
    CHECK(ratio == doctest::Approx(0.8).epsilon(0.02));
}

TEST_CASE("rtt_denoise inputs differ from targets at least as often as rtt") {
    SentenceDataset ds = grammar_dataset(54, 4000);
    GrammarConfig grammar = GrammarConfig::default_grammar();
    PairParams params;
    auto differ_fraction = [&](PairMode mode) {
        PairDataset d = build_pair_dataset(ds, mode, params, grammar, 21);
        int differ = 0;
        for (const auto& pair : d.pairs) {
            if (pair.input.token_ids != pair.target.token_ids) ++differ;
        }
        return static_cast<double>(differ) / static_cast<double>(d.pairs.size());
    };
    double rtt = differ_fraction(PairMode::rtt);
    double combined = differ_fraction(PairMode::rtt_denoise);
    CHECK(combined >= rtt);
    CHECK(rtt > 0.3);
}

TEST_CASE("empty dropout results become EOS-only sentences") {
    SentenceDataset ds = grammar_dataset(55, 50);
    GrammarConfig grammar = GrammarConfig::default_grammar();
    PairParams params;
    params.dropout_p = 1.0;
    PairDataset d = build_pair_dataset(ds, PairMode::denoise, params, grammar, 2);
    for (const auto& pair : d.pairs) {
        CHECK(pair.input.token_ids == std::vector<TokenId>{kEosId});
    }
}

TEST_CASE("pair TSV round trip") {
    namespace fs = std::filesystem;
    SentenceDataset ds = grammar_dataset(56, 100);
    GrammarConfig grammar = GrammarConfig::default_grammar();
    PairDataset d = build_pair_dataset(ds, PairMode::denoise, PairParams{}, grammar, 2);
    fs::path dir = fs::temp_directory_path() / "v2t_test_pairs";
    fs::create_directories(dir);
    write_pair_tsv(dir / "pairs.tsv", d);
    PairDataset loaded =
        load_pair_dataset(dir / "pairs.tsv", ds.vocab, 24, PairMode::denoise, PairParams{});
    REQUIRE(loaded.pairs.size() == d.pairs.size());
    for (std::size_t i = 0; i < d.pairs.size(); ++i) {
        CHECK(loaded.pairs[i].input.token_ids == d.pairs[i].input.token_ids);
        CHECK(loaded.pairs[i].target.token_ids == d.pairs[i].target.token_ids);
    }
    fs::remove_all(dir);
}

TEST_CASE("paraphrase record TSV format") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "v2t_test_records";
    fs::create_directories(dir);
    std::vector<ParaphraseRecord> records = {
        {"a b", "x", "a b", 100.0},
        {"c d", "y", "c e", 12.34567},
    };
    write_record_tsv(dir / "records.tsv", records);
    auto lines = read_lines(dir / "records.tsv");
    REQUIRE(lines.size() == 2);
    CHECK(lines[0] == "a b\tx\ta b\t100.0000");
    CHECK(lines[1] == "c d\ty\tc e\t12.3457");
    fs::remove_all(dir);
}
