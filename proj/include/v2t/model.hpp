#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "v2t/augment.hpp"
#include "v2t/corpus.hpp"
#include "v2t/mat.hpp"
#include "v2t/rng.hpp"
#include "v2t/tape.hpp"

namespace v2t {

using Embedding = std::vector<double>;

struct ModelConfig {
    int vocab_size = 0;
    int max_len = 24;
    int d_model = 64;
    int n_heads = 2;
    int n_layers = 2;  // encoder and decoder each
    int d_ff = 256;
    int bottleneck_dim = 32;  // 0 disables the bottleneck (full-memory decoder)
    double dropout_rate = 0.0;

    void validate() const;
    bool operator==(const ModelConfig&) const = default;
};

struct DecodeConfig {
    enum class Strategy { greedy, nucleus, beam };
    Strategy strategy = Strategy::nucleus;
    double top_p = 0.95;
    int beam_width = 4;
    int max_decode_len = 24;
    std::uint64_t seed = 0;

    void validate(const ModelConfig& config) const;
    static DecodeConfig greedy_decode(int max_decode_len);
    static DecodeConfig nucleus_decode(double p, int max_decode_len);
    static DecodeConfig beam_decode(int width, int max_decode_len);
};

struct TrainConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    int batch_size = 32;
    long total_steps = 0;
    int warmup_steps = 200;
    double clip_norm = 1.0;
    std::uint64_t seed = 0;
    int n_threads = 1;

    void validate() const;
};

struct LogLik {
    double total = 0.0;
    std::vector<double> per_token;  // one entry per target position, EOS included
};

struct SampleResult {
    Sentence sentence;
    // Log-probability of the emitted tokens under the realized sampling path:
    // the truncated renormalized distribution for nucleus, the full model
    // distribution for greedy and beam.
    double path_logprob = 0.0;
};

// Pre-norm transformer encoder-decoder with an optional bottleneck between
// them: encoder states are mean-pooled over positions and linearly projected
// to bottleneck_dim; the decoder cross-attends to that vector re-expanded to
// d_model as a single memory position. With bottleneck_dim == 0 the decoder
// attends to the full encoder state sequence instead.
//
// Parameters are held as doubles but kept on the float32 grid (checkpoints
// store f32), so save/load round-trips are bit-exact. All inference methods
// are const and safe to call concurrently; train_step mutates state.
class Model {
public:
    Model(ModelConfig config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }
    long step() const { return step_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    int param_index(const std::string& name) const;

    // --- encoding ---
    // PAD/BOS ids are ignored; EOS participates in the pooled mean.
    Embedding encode(const Sentence& s) const;           // requires bottleneck_dim > 0
    Mat encode_full(const Sentence& s) const;            // [L, d_model], no pooling
    Mat memory_from_embedding(const Embedding& e) const; // [1, d_model]
    Mat memory_from_sentence(const Sentence& s) const;   // bottleneck or full by config

    // --- decoder distributions ---
    // Returns prefix.size()+1 rows of vocab logits: row i is the next-token
    // distribution after consuming prefix[0..i-1].
    Mat decoder_logits(const Embedding& e, std::span<const TokenId> prefix) const;
    Mat decoder_logits_from_memory(const Mat& memory, std::span<const TokenId> prefix) const;

    LogLik log_likelihood(const Embedding& e, const Sentence& s) const;
    LogLik log_likelihood_from_memory(const Mat& memory, const Sentence& s) const;

    SampleResult sample(const Embedding& e, const DecodeConfig& dc, Rng& rng) const;
    SampleResult sample_from_memory(const Mat& memory, const DecodeConfig& dc, Rng& rng) const;

    // Teacher-forced per-token argmax accuracy against the pair targets.
    double token_accuracy(std::span<const SentencePair> pairs) const;

    // --- training ---
    // Cross-entropy per target token, averaged over the batch; global-norm
    // clipping and Adam with linear warmup. Throws TrainingError on a
    // non-finite loss.
    double train_step(std::span<const SentencePair> batch, const TrainConfig& tc);

    // Forward-only loss / analytic gradients with the train_step reduction,
    // for finite-difference checks. Dropout is not applied.
    double batch_loss(std::span<const SentencePair> batch) const;
    std::vector<Mat> batch_gradients(std::span<const SentencePair> batch) const;

    // --- checkpoints ---
    void save_checkpoint(const std::filesystem::path& path) const;
    static Model load_checkpoint(const std::filesystem::path& path);

private:
    struct AttentionRefs {
        int wq, bq, wk, bk, wv, bv, wo, bo;
    };
    struct LayerNormRefs {
        int gain, bias;
    };
    struct FfnRefs {
        int w1, b1, w2, b2;
    };
    struct EncoderLayerRefs {
        LayerNormRefs ln1;
        AttentionRefs attn;
        LayerNormRefs ln2;
        FfnRefs ffn;
    };
    struct DecoderLayerRefs {
        LayerNormRefs ln1;
        AttentionRefs self_attn;
        LayerNormRefs ln2;
        AttentionRefs cross_attn;
        LayerNormRefs ln3;
        FfnRefs ffn;
    };

    // Incremental decoding cache: per-layer self K/V grown one row per
    // position, plus fixed per-layer projections of the memory.
    struct DecoderState {
        std::vector<Mat> self_k, self_v;
        std::vector<Mat> mem_k, mem_v;
        int t = 0;
    };

    void register_params();
    void init_params(std::uint64_t seed);
    void quantize_params();
    std::vector<TokenId> content_ids(const Sentence& s) const;

    // plain (tape-free) inference helpers
    Mat encoder_states(std::span<const TokenId> ids) const;
    DecoderState make_decoder_state(const Mat& memory) const;
    Mat decoder_advance(DecoderState& state, TokenId token) const;  // token<0 -> start vector
    Mat all_decoder_logits(const Mat& memory, std::span<const TokenId> prefix) const;
    SampleResult sample_beam(const Mat& memory, const DecodeConfig& dc) const;

    // tape (training) path
    int memory_node(Tape& tape, std::span<const TokenId> src_ids, Rng* dropout_rng) const;
    int logits_node(Tape& tape, int memory, std::span<const TokenId> teacher_inputs,
                    Rng* dropout_rng) const;
    // Returns summed CE over target tokens; used by train_step and batch_loss.
    double sample_loss(const SentencePair& pair, std::vector<Mat>* sink, Rng* dropout_rng) const;

    ModelConfig config_;
    long step_ = 0;
    ParamStore params_;
    Mat pos_enc_;  // [max_len, d_model] fixed sinusoidal

    int embedding_ = -1;
    std::vector<EncoderLayerRefs> enc_layers_;
    LayerNormRefs enc_final_ln_{};
    int bottleneck_proj_ = -1;
    int memory_expand_ = -1;
    int start_vec_ = -1;
    std::vector<DecoderLayerRefs> dec_layers_;
    LayerNormRefs dec_final_ln_{};
    int out_proj_ = -1;
    int out_bias_ = -1;

    // Adam state (not checkpointed; resume restarts the moments).
    std::vector<Mat> adam_m_, adam_v_;
    // Reused per-sample gradient buffers for train_step.
    std::vector<std::vector<Mat>> sink_pool_;
};

// Decoding primitives, exposed for direct testing.
int greedy_pick(std::span<const double> probs);  // ties resolve to the lowest id
struct NucleusPick {
    int id;
    double logprob;  // under the truncated renormalized distribution
};
NucleusPick nucleus_pick(std::span<const double> probs, double top_p, Rng& rng);
std::vector<double> softmax_row(std::span<const double> logits);

}  // namespace v2t
