#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "v2t/augment.hpp"
#include "v2t/corpus.hpp"
#include "v2t/errors.hpp"
#include "v2t/grammar.hpp"
#include "v2t/rng.hpp"

using namespace v2t;

namespace {

std::string strip_ws(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) out += c;
    }
    return out;
}

}  // namespace

TEST_CASE("rng streams are deterministic and independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng parent(42);
    Rng c1 = parent.split(0);
    Rng c2 = parent.split(1);
    CHECK(c1.next_u64() != c2.next_u64());
    CHECK(parent.split(0).next_u64() == Rng(42).split(0).next_u64());
    CHECK(parent.split("train").next_u64() == Rng(42).split("train").next_u64());
    CHECK(parent.split("train").next_u64() != parent.split("eval").next_u64());

    Rng u(7);
    for (int i = 0; i < 1000; ++i) {
        double d = u.next_double();
        CHECK(d >= 0.0);
        CHECK(d < 1.0);
    }
}

TEST_CASE("rng normal moments") {
    Rng rng(3);
    double sum = 0.0, sq = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        double x = rng.normal();
        sum += x;
        sq += x * x;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("split_sentences basic contracts") {
    CHECK(split_sentences("A b. C d!") == std::vector<std::string>{"A b.", "C d!"});
    CHECK(split_sentences("") == std::vector<std::string>{});
    CHECK(split_sentences("No terminator") == std::vector<std::string>{"No terminator"});
    CHECK(split_sentences("Hi!! There.") == std::vector<std::string>{"Hi!!", "There."});
    CHECK(split_sentences("v2.0 rocks. Yes?") == std::vector<std::string>{"v2.0 rocks.", "Yes?"});
    CHECK(split_sentences("  padded.   out  ") == std::vector<std::string>{"padded.", "out"});
}

TEST_CASE("split_sentences preserves non-whitespace characters") {
    const std::string inputs[] = {
        "One two. Three four! Five?",
        "no end marker at all",
        "a.b stays together. tail",
        "!!leading? and. trailing!",
    };
    for (const auto& input : inputs) {
        std::string joined;
        for (const auto& s : split_sentences(input)) joined += s + " ";
        CHECK(strip_ws(joined) == strip_ws(input));
    }
}

TEST_CASE("build_vocab ranking and limits") {
    Vocab v = build_vocab({"a a b"}, 6, 1);
    REQUIRE(v.size() == 6);
    CHECK(v.token(4) == "a");
    CHECK(v.token(5) == "b");

    Vocab capped = build_vocab({"a a b"}, 5, 1);
    CHECK(capped.size() == 5);
    CHECK(capped.contains("a"));
    CHECK(!capped.contains("b"));

    Vocab only_reserved = build_vocab({"a"}, 10, 2);
    CHECK(only_reserved.size() == 4);

    CHECK_THROWS_AS(build_vocab({"a"}, 4, 1), ConfigError);

    // Frequency ties break lexicographically.
    Vocab ties = build_vocab({"b a c"}, 6, 1);
    CHECK(ties.token(4) == "a");
    CHECK(ties.token(5) == "b");
}

TEST_CASE("vocab build is order independent") {
    std::vector<std::string> sentences = {"a b c", "c d e", "e f g a", "b b g"};
    Vocab base = build_vocab(sentences, 10, 1);
    Rng rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        for (std::size_t i = sentences.size(); i > 1; --i) {
            std::swap(sentences[i - 1], sentences[rng.uniform(i)]);
        }
        Vocab shuffled = build_vocab(sentences, 10, 1);
        CHECK(shuffled.tokens() == base.tokens());
    }
}

TEST_CASE("encode and decode contracts") {
    Vocab v = build_vocab({"a a b"}, 6, 1);
    Sentence s = encode_sentence(v, "a b", 24);
    CHECK(s.token_ids == std::vector<TokenId>{4, 5, kEosId});
    CHECK(encode_sentence(v, "z", 24).token_ids == std::vector<TokenId>{kUnkId, kEosId});

    std::string long_text;
    for (int i = 0; i < 100; ++i) long_text += "a ";
    Sentence truncated = encode_sentence(v, long_text, 8);
    CHECK(truncated.token_ids.size() == 8);
    CHECK(truncated.token_ids.back() == kEosId);

    CHECK(decode_tokens(v, std::vector<TokenId>{4, 5, kEosId}) == "a b");
    CHECK(decode_tokens(v, std::vector<TokenId>{kEosId}) == "");
    CHECK(decode_tokens(v, std::vector<TokenId>{4, kEosId, 5}) == "a");
    CHECK(decode_tokens(v, std::vector<TokenId>{kPadId, kBosId, 4, kEosId}) == "a");
    CHECK_THROWS_AS(decode_tokens(v, std::vector<TokenId>{99}), DataError);
}

TEST_CASE("encode/decode round trip is the identity for in-vocab text") {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    auto corpus = generate_synthetic_corpus(9, 500, grammar);
    std::vector<std::string> texts;
    for (const auto& lt : corpus) texts.push_back(lt.text);
    Vocab v = build_vocab(texts, 512, 1);
    for (const auto& t : texts) {
        Sentence s = encode_sentence(v, t, 24);
        std::string decoded = decode_tokens(v, s.token_ids);
        CHECK(decoded == t);
        // Second pass is idempotent.
        Sentence s2 = encode_sentence(v, decoded, 24);
        CHECK(s2.token_ids == s.token_ids);
    }
}

TEST_CASE("synthetic corpus determinism and distinctness") {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    auto a = generate_synthetic_corpus(7, 200, grammar);
    auto b = generate_synthetic_corpus(7, 200, grammar);
    REQUIRE(a.size() == 200);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].text == b[i].text);
        CHECK(a[i].topic == b[i].topic);
    }
    auto c = generate_synthetic_corpus(8, 200, grammar);
    int differing = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].text != c[i].text) ++differing;
    }
    CHECK(differing > 100);
    CHECK(generate_synthetic_corpus(7, 0, grammar).empty());
}

TEST_CASE("default grammar yields at least 8000 unique sentences in 10k draws") {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    auto corpus = generate_synthetic_corpus(7, 10000, grammar);
    std::set<std::string> unique;
    for (const auto& lt : corpus) unique.insert(lt.text);
    CHECK(unique.size() >= 8000);

    // Every topic contributes and every sentence has a known label.
    std::set<std::string> topics;
    for (const auto& lt : corpus) topics.insert(lt.topic);
    CHECK(topics.size() == grammar.topics.size());
}

TEST_CASE("grammar requires at least 4 topics") {
    GrammarConfig g = GrammarConfig::default_grammar();
    g.topics.resize(3);
    CHECK_THROWS_AS(generate_synthetic_corpus(1, 10, g), ConfigError);
}

TEST_CASE("vocabulary is closed under synthetic paraphrasing") {
    GrammarConfig grammar = GrammarConfig::default_grammar();
    auto corpus = generate_synthetic_corpus(21, 3000, grammar);
    std::vector<std::string> texts;
    for (const auto& lt : corpus) texts.push_back(lt.text);
    Vocab v = build_vocab(texts, 512, 1);
    SyntheticParaphraser paraphrase(v, grammar, 32);
    Rng rng(77);
    for (std::size_t i = 0; i < 1000; ++i) {
        Sentence s = encode_sentence(v, texts[i], 24);
        Sentence p = paraphrase(s, 1.0, rng);
        for (TokenId id : p.token_ids) CHECK(id != kUnkId);
    }
}

TEST_CASE("vocab file round trip and validation") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "v2t_test_vocab";
    fs::create_directories(dir);
    Vocab v = build_vocab({"alpha beta gamma alpha"}, 10, 1);
    write_vocab_file(dir / "vocab.txt", v);
    Vocab loaded = read_vocab_file(dir / "vocab.txt");
    CHECK(loaded.tokens() == v.tokens());

    write_lines(dir / "bad.txt", std::vector<std::string>{"<pad>", "<bos>", "<eos>", "oops"});
    CHECK_THROWS_AS(read_vocab_file(dir / "bad.txt"), DataError);
    fs::remove_all(dir);
}

TEST_CASE("text_hash is stable and spreads") {
    CHECK(text_hash("abc") == text_hash("abc"));
    CHECK(text_hash("abc") != text_hash("abd"));
    std::set<std::uint64_t> seen;
    GrammarConfig grammar = GrammarConfig::default_grammar();
    for (const auto& lt : generate_synthetic_corpus(3, 1000, grammar)) {
        seen.insert(text_hash(lt.text));
    }
    CHECK(seen.size() > 800);
}
