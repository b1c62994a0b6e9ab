#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace v2t {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kUnkId = 3;
inline constexpr int kNumReserved = 4;

inline constexpr const char* kPadToken = "<pad>";
inline constexpr const char* kBosToken = "<bos>";
inline constexpr const char* kEosToken = "<eos>";
inline constexpr const char* kUnkToken = "<unk>";

// Dense id <-> token table. Ids 0..3 are reserved (pad, bos, eos, unk).
class Vocab {
public:
    Vocab();

    std::size_t size() const { return tokens_.size(); }
    TokenId lookup(std::string_view token) const;       // unknown -> kUnkId
    const std::string& token(TokenId id) const;         // out of range -> DataError
    bool contains(std::string_view token) const;
    void append(std::string token);                     // next dense id

    const std::vector<std::string>& tokens() const { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

// One tokenized sentence; token_ids always ends with the single EOS.
struct Sentence {
    std::string text;
    std::vector<TokenId> token_ids;

    // Tokens excluding the trailing EOS.
    int n_words() const { return static_cast<int>(token_ids.size()) - 1; }
    bool empty() const { return token_ids.size() <= 1; }
    bool same_tokens(const Sentence& other) const { return token_ids == other.token_ids; }
};

struct SentenceDataset {
    Vocab vocab;
    std::vector<Sentence> sentences;
    std::string split_tag;  // "train" or "eval"
};

std::vector<std::string> whitespace_tokens(std::string_view text);

// Maximal substrings closed by '.', '!' or '?' followed by whitespace or end
// of input; a trailing unterminated fragment is kept as its own sentence.
std::vector<std::string> split_sentences(std::string_view raw_text);

// Tokens ranked by (frequency desc, lexicographic asc); the top max_size-4
// with frequency >= min_freq follow the reserved entries.
Vocab build_vocab(const std::vector<std::string>& sentences, std::size_t max_size,
                  std::size_t min_freq);

// Whitespace tokenization, unknowns to UNK, truncation to max_len-1 tokens,
// trailing EOS.
Sentence encode_sentence(const Vocab& vocab, std::string_view text, std::size_t max_len);

// Drops PAD/BOS, stops at the first EOS, joins with single spaces.
std::string decode_tokens(const Vocab& vocab, std::span<const TokenId> ids);

// Stable 64-bit hash of a sentence's text, used for split assignment.
std::uint64_t text_hash(std::string_view text);

// --- file formats ---

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_lines(const std::filesystem::path& path, std::span<const std::string> lines);

Vocab read_vocab_file(const std::filesystem::path& path);
void write_vocab_file(const std::filesystem::path& path, const Vocab& vocab);

SentenceDataset load_dataset(const std::filesystem::path& corpus_path,
                             const std::filesystem::path& vocab_path,
                             std::size_t max_len, std::string split_tag);

}  // namespace v2t
