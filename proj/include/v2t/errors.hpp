#pragma once

#include <stdexcept>
#include <string>

namespace v2t {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration or parameters.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or out-of-range data encountered at run time.
struct DataError : Error {
    using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
    using Error::Error;
};

// Unparseable or inconsistent on-disk artifacts (checkpoints, reports).
struct FormatError : Error {
    using Error::Error;
};

// Report schema version disagreement between runs.
struct SchemaError : Error {
    using Error::Error;
};

// Non-finite loss or other training failure.
struct TrainingError : Error {
    using Error::Error;
};

// Metric preconditions violated (degenerate clusters, too few points).
struct MetricError : Error {
    using Error::Error;
};

// Translation service unreachable after retries.
struct TransportError : Error {
    using Error::Error;
};

// Translation service rejected the request (non-retryable 4xx).
struct ClientError : Error {
    using Error::Error;
};

// Translation service answered with an inconsistent payload.
struct ProtocolError : Error {
    using Error::Error;
};

// Pair augmentation failed; carries the offending sentence index.
struct AugmentError : Error {
    AugmentError(const std::string& what, std::size_t index)
        : Error(what), sentence_index(index) {}
    std::size_t sentence_index;
};

}  // namespace v2t
