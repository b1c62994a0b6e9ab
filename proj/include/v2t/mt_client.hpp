#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "v2t/rng.hpp"

namespace v2t {

enum class Direction { forward, backward };  // source->pivot, pivot->source

struct MtDecodeMode {
    enum class Kind { nucleus, beam };
    Kind kind = Kind::nucleus;
    double top_p = 0.9;
    int beam_width = 4;

    std::string tag() const;  // stable string used in cache keys and requests
    static MtDecodeMode nucleus(double p);
    static MtDecodeMode beam(int width);
};

struct RetryPolicy {
    int max_attempts = 3;
    int base_backoff_ms = 100;  // doubled per attempt, full jitter
};

struct TranslationClientConfig {
    std::string forward_url;   // source -> pivot
    std::string backward_url;  // pivot -> source
    std::string api_key;       // MT_API_KEY env var overrides when set
    std::string source_lang = "en";
    std::string pivot_lang = "de";
    MtDecodeMode decode_mode;
    int batch_size = 16;
    RetryPolicy retry;
    std::filesystem::path cache_dir;
    int max_in_flight = 4;
};

struct CacheStats {
    std::size_t entries = 0;
    std::uintmax_t bytes = 0;
};

// JSON-over-HTTP translation client with a content-addressed on-disk cache.
// Requests POST {"texts": [...], "source_lang", "target_lang", "decode_mode"}
// and expect {"translations": [...]} aligned by index. 429 and 5xx responses
// are retried with exponential backoff and full jitter; other 4xx fail
// immediately. Cache entries are keyed by SHA-256 of (text, direction,
// decode mode) and written via temp-file-then-rename, so a corpus is
// translated at most once regardless of ordering. Requests for cache misses
// go out one chunk of batch_size at a time, which keeps the number of
// in-flight requests within max_in_flight. The api_key is sent only as the
// Authorization header and never logged or cached.
class TranslationClient {
public:
    using LogFn = std::function<void(const std::string&)>;

    explicit TranslationClient(TranslationClientConfig config, LogFn log = nullptr);

    std::vector<std::string> translate_batch(const std::vector<std::string>& texts,
                                             Direction direction);

    CacheStats cache_stats() const;

    const TranslationClientConfig& config() const { return config_; }

private:
    std::string cache_key(const std::string& text, Direction direction) const;
    std::vector<std::string> request_chunk(const std::vector<std::string>& texts,
                                           Direction direction);
    void log(const std::string& message);

    TranslationClientConfig config_;
    LogFn log_;
    Rng jitter_rng_;
};

}  // namespace v2t
