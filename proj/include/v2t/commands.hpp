#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "v2t/augment.hpp"
#include "v2t/model.hpp"

namespace v2t {

// Exit codes shared by the CLI and by the exception mapping in main().
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitArtifactMismatch = 3;
inline constexpr int kExitSchemaMismatch = 4;
inline constexpr int kExitTrainingDiverged = 5;

struct PrepareOptions {
    std::string source_path;  // empty -> synthetic grammar corpus
    std::uint64_t seed = 0;
    std::size_t n_sentences = 10000;
    std::size_t vocab_max = 512;
    std::size_t vocab_min_freq = 1;
    std::size_t max_len = 24;
    double eval_fraction = 0.05;
    int topic_sentences = 8;  // eval sentences per topic written to topics.txt
    std::filesystem::path out_dir;
};

struct AugmentOptions {
    std::filesystem::path data_dir;  // output of prepare
    std::vector<PairMode> modes;
    double dropout_p = 0.2;
    double temperature = 1.0;
    std::uint64_t seed = 0;
    std::size_t max_len = 24;
    std::string mt_endpoint;  // empty -> synthetic paraphraser for rtt modes
    std::string mt_decode = "nucleus:0.9";
    std::filesystem::path mt_cache;
    std::filesystem::path out_dir;
};

struct TrainOptions {
    std::filesystem::path pair_file;
    std::filesystem::path vocab_file;
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> resume;
    ModelConfig model;  // vocab_size filled from the vocab file
    TrainConfig train;
    long checkpoint_every = 1000;
    PairMode mode = PairMode::identity;  // recorded in the loss csv header
};

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::optional<std::filesystem::path> scorer_checkpoint;
    std::filesystem::path data_dir;
    std::optional<std::filesystem::path> topics_file;  // default: data_dir/topics.txt
    std::optional<int> expect_bottleneck;              // mismatch -> artifact error
    std::vector<double> alphas{0.5, 0.75, 1.0, 1.5, 2.0};
    std::vector<double> etas{0.0, 0.5, 1.0, 2.0, 3.0};
    int n_samples = 32;
    int n_pairs = 8;
    int hull_samples = 12;
    double decode_top_p = 0.95;
    double paraphrase_temperature = 1.0;
    std::uint64_t seed = 0;
    std::string model_tag = "model";
    bool plots = false;
    std::filesystem::path out_dir;
};

struct ReportOptions {
    std::vector<std::filesystem::path> run_dirs;
    std::filesystem::path out_file;
};

void cmd_prepare(const PrepareOptions& opt);
void cmd_augment(const AugmentOptions& opt);
void cmd_train(const TrainOptions& opt);
void cmd_eval(const EvalOptions& opt);
void cmd_report(const ReportOptions& opt);

}  // namespace v2t
