#include "v2t/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "v2t/errors.hpp"

namespace v2t {

Vocab::Vocab() {
    append(kPadToken);
    append(kBosToken);
    append(kEosToken);
    append(kUnkToken);
}

TokenId Vocab::lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
        throw DataError("token id " + std::to_string(id) + " out of range for vocab of size " +
                        std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const {
    return index_.count(std::string(token)) > 0;
}

void Vocab::append(std::string token) {
    index_.emplace(token, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(token));
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
    }
    return out;
}

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

std::vector<std::string> split_sentences(std::string_view raw_text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < raw_text.size(); ++i) {
        if (!is_terminator(raw_text[i])) continue;
        // Consume a run of terminators so "Hi!!" stays one sentence.
        std::size_t j = i;
        while (j + 1 < raw_text.size() && is_terminator(raw_text[j + 1])) ++j;
        bool at_end = j + 1 == raw_text.size();
        if (at_end || std::isspace(static_cast<unsigned char>(raw_text[j + 1]))) {
            std::string s = trim(raw_text.substr(start, j + 1 - start));
            if (!s.empty()) out.push_back(std::move(s));
            start = j + 1;
        }
        i = j;
    }
    if (start < raw_text.size()) {
        std::string s = trim(raw_text.substr(start));
        if (!s.empty()) out.push_back(std::move(s));
    }
    return out;
}

Vocab build_vocab(const std::vector<std::string>& sentences, std::size_t max_size,
                  std::size_t min_freq) {
    if (max_size < static_cast<std::size_t>(kNumReserved) + 1) {
        throw ConfigError("vocab max_size must be at least 5, got " + std::to_string(max_size));
    }
    std::map<std::string, std::size_t> freq;
    for (const auto& s : sentences) {
        for (auto& tok : whitespace_tokens(s)) ++freq[std::move(tok)];
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });

    Vocab vocab;
    std::size_t capacity = max_size - static_cast<std::size_t>(kNumReserved);
    for (const auto& [tok, count] : ranked) {
        if (vocab.size() - kNumReserved >= capacity) break;
        if (count < min_freq) break;  // ranked by frequency, so the rest fail too
        vocab.append(tok);
    }
    return vocab;
}

Sentence encode_sentence(const Vocab& vocab, std::string_view text, std::size_t max_len) {
    if (max_len < 1) throw ConfigError("max_len must be >= 1");
    Sentence s;
    s.text = std::string(text);
    auto words = whitespace_tokens(text);
    std::size_t keep = std::min(words.size(), max_len - 1);
    s.token_ids.reserve(keep + 1);
    for (std::size_t i = 0; i < keep; ++i) s.token_ids.push_back(vocab.lookup(words[i]));
    s.token_ids.push_back(kEosId);
    return s;
}

std::string decode_tokens(const Vocab& vocab, std::span<const TokenId> ids) {
    std::string out;
    for (TokenId id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab.size()) {
            throw DataError("token id " + std::to_string(id) + " out of range for vocab of size " +
                            std::to_string(vocab.size()));
        }
        if (id == kEosId) break;
        if (id == kPadId || id == kBosId) continue;
        if (!out.empty()) out += ' ';
        out += vocab.token(id);
    }
    return out;
}

std::uint64_t text_hash(std::string_view text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    // Finalize so nearby strings spread across the full range.
    h ^= h >> 30;
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 27;
    h *= 0x94D049BB133111EBULL;
    h ^= h >> 31;
    return h;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_lines(const std::filesystem::path& path, std::span<const std::string> lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& line : lines) out << line << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

Vocab read_vocab_file(const std::filesystem::path& path) {
    auto lines = read_lines(path);
    if (lines.size() < static_cast<std::size_t>(kNumReserved) || lines[0] != kPadToken ||
        lines[1] != kBosToken || lines[2] != kEosToken || lines[3] != kUnkToken) {
        throw DataError("vocab file must start with the four reserved tokens: " + path.string());
    }
    Vocab vocab;
    for (std::size_t i = kNumReserved; i < lines.size(); ++i) {
        if (lines[i].empty()) throw DataError("empty vocab entry at line " + std::to_string(i + 1));
        if (vocab.contains(lines[i])) {
            throw DataError("duplicate vocab entry '" + lines[i] + "' at line " +
                              std::to_string(i + 1));
        }
        vocab.append(lines[i]);
    }
    return vocab;
}

void write_vocab_file(const std::filesystem::path& path, const Vocab& vocab) {
    write_lines(path, vocab.tokens());
}

SentenceDataset load_dataset(const std::filesystem::path& corpus_path,
                             const std::filesystem::path& vocab_path, std::size_t max_len,
                             std::string split_tag) {
    SentenceDataset ds;
    ds.vocab = read_vocab_file(vocab_path);
    ds.split_tag = std::move(split_tag);
    for (const auto& line : read_lines(corpus_path)) {
        if (line.empty()) continue;
        ds.sentences.push_back(encode_sentence(ds.vocab, line, max_len));
    }
    return ds;
}

}  // namespace v2t
