#include "v2t/mt_client.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "v2t/errors.hpp"

namespace v2t {

namespace {

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr)) {
        throw Error("SHA-256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

// "http://host:port/path" -> (scheme://host:port, /path)
std::pair<std::string, std::string> split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read cache entry: " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw IoError("cannot write cache entry: " + tmp.string());
        out << content;
        if (!out) throw IoError("cache write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::string MtDecodeMode::tag() const {
    char buf[48];
    if (kind == Kind::nucleus) {
        std::snprintf(buf, sizeof buf, "nucleus:%.4f", top_p);
    } else {
        std::snprintf(buf, sizeof buf, "beam:%d", beam_width);
    }
    return buf;
}

MtDecodeMode MtDecodeMode::nucleus(double p) {
    if (p <= 0.0 || p > 1.0) throw ConfigError("nucleus p must be in (0,1]");
    MtDecodeMode m;
    m.kind = Kind::nucleus;
    m.top_p = p;
    return m;
}

MtDecodeMode MtDecodeMode::beam(int width) {
    if (width < 1) throw ConfigError("beam width must be >= 1");
    MtDecodeMode m;
    m.kind = Kind::beam;
    m.beam_width = width;
    return m;
}

TranslationClient::TranslationClient(TranslationClientConfig config, LogFn log)
    : config_(std::move(config)), log_(std::move(log)), jitter_rng_(0x5DEECE66DULL) {
    if (config_.batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (config_.retry.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
    if (config_.decode_mode.kind == MtDecodeMode::Kind::nucleus &&
        (config_.decode_mode.top_p <= 0.0 || config_.decode_mode.top_p > 1.0)) {
        throw ConfigError("nucleus p must be in (0,1]");
    }
    if (const char* env_key = std::getenv("MT_API_KEY"); env_key != nullptr && *env_key != '\0') {
        config_.api_key = env_key;
    }
    if (!config_.cache_dir.empty()) {
        std::filesystem::create_directories(config_.cache_dir);
    }
}

void TranslationClient::log(const std::string& message) {
    if (log_) log_(message);
}

std::string TranslationClient::cache_key(const std::string& text, Direction direction) const {
    std::string dir_tag = direction == Direction::forward
                              ? config_.source_lang + ">" + config_.pivot_lang
                              : config_.pivot_lang + ">" + config_.source_lang;
    return sha256_hex(text + '\x1f' + dir_tag + '\x1f' + config_.decode_mode.tag());
}

std::vector<std::string> TranslationClient::translate_batch(const std::vector<std::string>& texts,
                                                            Direction direction) {
    if (texts.empty()) throw ConfigError("translate_batch needs a non-empty text list");
    for (const auto& t : texts) {
        if (t.size() > 4096) throw ConfigError("text exceeds the 4096-byte request limit");
    }

    std::vector<std::string> result(texts.size());
    std::vector<std::size_t> miss_indices;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (!config_.cache_dir.empty()) {
            auto entry = config_.cache_dir / cache_key(texts[i], direction);
            if (std::filesystem::exists(entry)) {
                result[i] = read_file(entry);
                continue;
            }
        }
        miss_indices.push_back(i);
    }
    if (!miss_indices.empty()) {
        log("translating " + std::to_string(miss_indices.size()) + " of " +
            std::to_string(texts.size()) + " texts (rest cached)");
    }

    for (std::size_t chunk_start = 0; chunk_start < miss_indices.size();
         chunk_start += static_cast<std::size_t>(config_.batch_size)) {
        std::size_t chunk_end = std::min(miss_indices.size(),
                                         chunk_start + static_cast<std::size_t>(config_.batch_size));
        std::vector<std::string> chunk;
        chunk.reserve(chunk_end - chunk_start);
        for (std::size_t k = chunk_start; k < chunk_end; ++k) chunk.push_back(texts[miss_indices[k]]);

        auto translated = request_chunk(chunk, direction);
        for (std::size_t k = chunk_start; k < chunk_end; ++k) {
            std::size_t i = miss_indices[k];
            result[i] = translated[k - chunk_start];
            if (!config_.cache_dir.empty()) {
                write_file_atomic(config_.cache_dir / cache_key(texts[i], direction), result[i]);
            }
        }
    }
    return result;
}

std::vector<std::string> TranslationClient::request_chunk(const std::vector<std::string>& texts,
                                                          Direction direction) {
    const std::string& url =
        direction == Direction::forward ? config_.forward_url : config_.backward_url;
    auto [base, path] = split_url(url);

    nlohmann::json body;
    body["texts"] = texts;
    body["source_lang"] =
        direction == Direction::forward ? config_.source_lang : config_.pivot_lang;
    body["target_lang"] =
        direction == Direction::forward ? config_.pivot_lang : config_.source_lang;
    body["decode_mode"] = config_.decode_mode.tag();
    std::string payload = body.dump();

    std::string last_failure;
    for (int attempt = 0; attempt < config_.retry.max_attempts; ++attempt) {
        if (attempt > 0) {
            double jitter = jitter_rng_.next_double();
            auto delay = static_cast<long>(static_cast<double>(config_.retry.base_backoff_ms) *
                                           static_cast<double>(1L << (attempt - 1)) * jitter);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client http(base);
        http.set_connection_timeout(10);
        http.set_read_timeout(60);
        httplib::Headers headers;
        if (!config_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        }
        auto res = http.Post(path, headers, payload, "application/json");

        if (!res) {
            last_failure = "connection error";
            log("request failed (" + last_failure + "), attempt " + std::to_string(attempt + 1));
            continue;
        }
        if (res->status == 200) {
            nlohmann::json parsed;
            try {
                parsed = nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolError(std::string("unparseable translation response: ") + e.what());
            }
            if (!parsed.contains("translations") || !parsed["translations"].is_array() ||
                parsed["translations"].size() != texts.size()) {
                throw ProtocolError("translation response length mismatch: expected " +
                                    std::to_string(texts.size()));
            }
            std::vector<std::string> out;
            out.reserve(texts.size());
            for (const auto& t : parsed["translations"]) out.push_back(t.get<std::string>());
            return out;
        }
        if (res->status == 429 || res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            log("retryable failure (" + last_failure + "), attempt " + std::to_string(attempt + 1));
            continue;
        }
        throw ClientError("translation request rejected with HTTP " + std::to_string(res->status));
    }
    throw TransportError("translation failed after " + std::to_string(config_.retry.max_attempts) +
                         " attempts (" + last_failure + ")");
}

CacheStats TranslationClient::cache_stats() const {
    CacheStats stats;
    if (config_.cache_dir.empty()) return stats;
    std::error_code ec;
    std::filesystem::directory_iterator it(config_.cache_dir, ec);
    if (ec) throw IoError("cannot read cache directory: " + config_.cache_dir.string());
    for (const auto& entry : it) {
        if (!entry.is_regular_file()) continue;
        ++stats.entries;
        stats.bytes += entry.file_size();
    }
    return stats;
}

}  // namespace v2t
