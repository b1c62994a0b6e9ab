#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "v2t/corpus.hpp"
#include "v2t/grammar.hpp"
#include "v2t/model.hpp"
#include "v2t/rng.hpp"

namespace v2t {

// Distribution over sentences indexed by an embedding. The estimators below
// only need exact draws and exact scoring, so tests can plug in enumerable
// hand-built distributions.
class SentenceDistribution {
public:
    virtual ~SentenceDistribution() = default;
    virtual Sentence sample_full(std::span<const double> embedding, Rng& rng) const = 0;
    virtual double log_prob(std::span<const double> embedding, const Sentence& s) const = 0;
};

// Model-backed distribution: exact draws via nucleus p=1 sampling, scoring by
// teacher-forced log-likelihood.
class ModelDistribution : public SentenceDistribution {
public:
    explicit ModelDistribution(const Model& model) : model_(&model) {}

    Sentence sample_full(std::span<const double> embedding, Rng& rng) const override;
    double log_prob(std::span<const double> embedding, const Sentence& s) const override;
    Sentence sample_nucleus(std::span<const double> embedding, double top_p, Rng& rng) const;

private:
    const Model* model_;
};

struct EvalSet {
    std::vector<Sentence> sentences;
    std::vector<Embedding> embeddings;
};

EvalSet make_eval_set(const Model& model, std::span<const Sentence> sentences);

struct InterpolationSpec {
    std::vector<double> alphas{0.5, 0.75, 1.0, 1.5, 2.0};
    int n_pairs = 8;

    void validate() const;  // non-empty and must include the anchor alpha 1
};

struct NoiseSpec {
    std::vector<double> etas{0.0, 0.5, 1.0, 2.0, 3.0};
    std::vector<double> sigma;  // per-dimension std of the embeddings

    void validate(std::size_t dim) const;  // must include eta 0; sigma entries >= 0
};

struct InterpPoint {
    Embedding embedding;
    int x1 = 0, x2 = 0;
    double alpha = 1.0;
};

struct NoisePoint {
    Embedding embedding;
    int x = 0;
    double eta = 0.0;
};

// alpha*E(x1) + (1-alpha)*E(x2); alpha 1 and 0 return the anchors bitwise.
Embedding interpolate(const Embedding& e1, const Embedding& e2, double alpha);

// anchor + u/||u||_2 * sigma * eta with u ~ N(0, I); eta 0 returns the anchor
// bitwise.
Embedding noise_offset(const Embedding& anchor, std::span<const double> sigma, double eta,
                       Rng& rng);

std::vector<InterpPoint> build_interpolation_space(const EvalSet& eval_set,
                                                   const InterpolationSpec& spec, Rng& rng);
std::vector<NoisePoint> build_noise_space(const EvalSet& eval_set, const NoiseSpec& spec,
                                          Rng& rng);

// Population standard deviation per coordinate; needs >= 2 embeddings.
std::vector<double> per_dim_std(std::span<const Embedding> embeddings);

struct EntropyEstimate {
    double entropy = 0.0;
    double entropy_per_token = 0.0;  // per-sentence normalization, then mean
};

// Monte-Carlo entropy of D(embedding): mean self-surprisal of n exact draws.
EntropyEstimate entropy_estimate(const SentenceDistribution& d, std::span<const double> embedding,
                                 int n_samples, Rng& rng);

// Symmetrized-KL estimate between D(e_anchor) and D(e_probe) from paired
// draws s1 ~ D(e_anchor), si ~ D(e_probe):
//   mean of [llh(anchor,s1) - llh(probe,s1) + llh(probe,si) - llh(anchor,si)] / 2.
double jeffreys_approx(const SentenceDistribution& d, std::span<const double> e_anchor,
                       std::span<const double> e_probe, int n_samples, Rng& rng);

Embedding convex_combination(std::span<const Embedding> vertices,
                             std::span<const double> weights);
std::vector<double> dirichlet_flat(std::size_t k, Rng& rng);
std::vector<Embedding> convex_hull_samples(std::span<const Embedding> vertices, int n, Rng& rng);

struct ClusteringScores {
    double calinski_harabasz = 0.0;
    double davies_bouldin = 0.0;
    double silhouette = 0.0;
};

// Euclidean-distance scores; 0/0 ratios resolve to 0. Requires >= 2 clusters
// and >= 2 points in every cluster.
ClusteringScores clustering_scores(std::span<const Embedding> points, std::span<const int> labels);

struct TopicSet {
    std::string topic;
    std::vector<std::string> sentences;  // >= 3
};

// Topic file: blocks of `# <topic-name>` followed by one sentence per line.
std::vector<TopicSet> read_topic_file(const std::filesystem::path& path);
void write_topic_file(const std::filesystem::path& path, std::span<const TopicSet> topics);

int max_word_repeat(const std::string& text);  // lowercased word occurrence max

class FluencyScorer {
public:
    virtual ~FluencyScorer() = default;
    virtual double log_prob_self(const Sentence& s) const = 0;  // log p(s|s)
};

class ModelFluencyScorer : public FluencyScorer {
public:
    explicit ModelFluencyScorer(const Model& model) : model_(&model) {}
    double log_prob_self(const Sentence& s) const override;

private:
    const Model* model_;
};

struct FluencyStats {
    double mean_n_tokens = 0.0;
    double mean_max_word_repeat = 0.0;
    double mean_lm_llh = 0.0;
    double mean_lm_llh_per_token = 0.0;
    bool has_llh = false;
};

// n_tokens counts non-EOS tokens; LM LLH divides by n_tokens+1 (EOS).
// Samples must carry their text. scorer may be null (LLH columns omitted).
FluencyStats fluency_metrics(std::span<const Sentence> samples, const FluencyScorer* scorer);

// --- property suite ---

struct ReportRow {
    std::string condition;
    std::optional<double> param;  // alpha or eta
    std::optional<double> accuracy;
    std::optional<double> entropy;
    std::optional<double> entropy_per_token;
    std::optional<double> mean_n_tokens;
    std::optional<double> mean_max_word_repeat;
    std::optional<double> mean_lm_llh;
    std::optional<double> mean_lm_llh_per_token;
    std::optional<double> jeffreys;
};

struct PropertyReport {
    std::vector<ReportRow> rows;
    std::optional<ClusteringScores> clustering;
    std::vector<std::pair<std::string, std::string>> metadata;
};

struct SuiteConfig {
    InterpolationSpec interpolation;
    std::vector<double> etas{0.0, 0.5, 1.0, 2.0, 3.0};
    int n_samples = 32;          // decodes per condition, spread over anchors
    double decode_top_p = 0.95;  // presentation decodes for fluency metrics
    int hull_samples = 12;
    double paraphrase_temperature = 1.0;
    std::uint64_t seed = 0;
    std::string model_tag = "model";
    int max_eval_sentences = 512;  // cap on embedded eval sentences
};

// The full measurement battery: entropy/fluency/Jeffreys along the
// interpolation and noise spaces, reconstruction accuracy on clean and
// paraphrased eval pairs, per-topic convex-hull decodes, and clustering of
// topic embeddings. Deterministic given cfg.seed.
PropertyReport run_property_suite(const Model& model, const Model* fluency_scorer,
                                  const SentenceDataset& eval_ds, const GrammarConfig& grammar,
                                  std::span<const TopicSet> topics, const SuiteConfig& cfg);

}  // namespace v2t
