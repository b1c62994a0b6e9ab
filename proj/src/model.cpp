#include "v2t/model.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "v2t/errors.hpp"

namespace v2t {

void ModelConfig::validate() const {
    if (vocab_size < 1) throw ConfigError("vocab_size must be >= 1");
    if (max_len < 2) throw ConfigError("max_len must be >= 2");
    if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) {
        throw ConfigError("d_model must be a positive multiple of n_heads");
    }
    if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
    if (d_ff < 1) throw ConfigError("d_ff must be >= 1");
    if (bottleneck_dim != 0 &&
        (bottleneck_dim < 4 || bottleneck_dim > d_model * max_len)) {
        throw ConfigError("bottleneck_dim must be 0 or in [4, d_model*max_len]");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must be in [0,1)");
    }
}

void DecodeConfig::validate(const ModelConfig& config) const {
    if (strategy == Strategy::nucleus && (top_p <= 0.0 || top_p > 1.0)) {
        throw ConfigError("nucleus p must be in (0,1]");
    }
    if (strategy == Strategy::beam && beam_width < 1) throw ConfigError("beam width must be >= 1");
    if (max_decode_len < 2 || max_decode_len > config.max_len) {
        throw ConfigError("max_decode_len must be in [2, max_len]");
    }
}

DecodeConfig DecodeConfig::greedy_decode(int max_decode_len) {
    DecodeConfig dc;
    dc.strategy = Strategy::greedy;
    dc.max_decode_len = max_decode_len;
    return dc;
}

DecodeConfig DecodeConfig::nucleus_decode(double p, int max_decode_len) {
    DecodeConfig dc;
    dc.strategy = Strategy::nucleus;
    dc.top_p = p;
    dc.max_decode_len = max_decode_len;
    return dc;
}

DecodeConfig DecodeConfig::beam_decode(int width, int max_decode_len) {
    DecodeConfig dc;
    dc.strategy = Strategy::beam;
    dc.beam_width = width;
    dc.max_decode_len = max_decode_len;
    return dc;
}

void TrainConfig::validate() const {
    if (lr < 0.0) throw ConfigError("learning rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
    if (clip_norm < 0.0) throw ConfigError("clip_norm must be >= 0");
    if (n_threads < 1) throw ConfigError("n_threads must be >= 1");
}

// --- construction ---

Model::Model(ModelConfig config, std::uint64_t seed) : config_(config) {
    config_.validate();
    register_params();
    init_params(seed);
    quantize_params();

    pos_enc_ = Mat(config_.max_len, config_.d_model);
    for (int t = 0; t < config_.max_len; ++t) {
        for (int i = 0; i < config_.d_model; i += 2) {
            double rate = std::pow(10000.0, static_cast<double>(i) / config_.d_model);
            pos_enc_(t, i) = std::sin(t / rate);
            if (i + 1 < config_.d_model) pos_enc_(t, i + 1) = std::cos(t / rate);
        }
    }
}

void Model::register_params() {
    const int dm = config_.d_model;
    const int dff = config_.d_ff;
    auto ln = [&](const std::string& prefix) {
        LayerNormRefs refs;
        refs.gain = params_.add(prefix + ".gain", Mat(1, dm));
        refs.bias = params_.add(prefix + ".bias", Mat(1, dm));
        return refs;
    };
    auto attn = [&](const std::string& prefix) {
        AttentionRefs refs;
        refs.wq = params_.add(prefix + ".wq", Mat(dm, dm));
        refs.bq = params_.add(prefix + ".bq", Mat(1, dm));
        refs.wk = params_.add(prefix + ".wk", Mat(dm, dm));
        refs.bk = params_.add(prefix + ".bk", Mat(1, dm));
        refs.wv = params_.add(prefix + ".wv", Mat(dm, dm));
        refs.bv = params_.add(prefix + ".bv", Mat(1, dm));
        refs.wo = params_.add(prefix + ".wo", Mat(dm, dm));
        refs.bo = params_.add(prefix + ".bo", Mat(1, dm));
        return refs;
    };
    auto ffn = [&](const std::string& prefix) {
        FfnRefs refs;
        refs.w1 = params_.add(prefix + ".w1", Mat(dm, dff));
        refs.b1 = params_.add(prefix + ".b1", Mat(1, dff));
        refs.w2 = params_.add(prefix + ".w2", Mat(dff, dm));
        refs.b2 = params_.add(prefix + ".b2", Mat(1, dm));
        return refs;
    };

    embedding_ = params_.add("embedding", Mat(config_.vocab_size, dm));
    for (int l = 0; l < config_.n_layers; ++l) {
        std::string p = "enc." + std::to_string(l);
        enc_layers_.push_back({ln(p + ".ln1"), attn(p + ".attn"), ln(p + ".ln2"), ffn(p + ".ffn")});
    }
    enc_final_ln_ = ln("enc.final_ln");
    if (config_.bottleneck_dim > 0) {
        bottleneck_proj_ = params_.add("bottleneck.proj", Mat(dm, config_.bottleneck_dim));
        memory_expand_ = params_.add("memory.expand", Mat(config_.bottleneck_dim, dm));
    }
    start_vec_ = params_.add("decoder.start", Mat(1, dm));
    for (int l = 0; l < config_.n_layers; ++l) {
        std::string p = "dec." + std::to_string(l);
        dec_layers_.push_back({ln(p + ".ln1"), attn(p + ".self"), ln(p + ".ln2"),
                               attn(p + ".cross"), ln(p + ".ln3"), ffn(p + ".ffn")});
    }
    dec_final_ln_ = ln("dec.final_ln");
    out_proj_ = params_.add("out.proj", Mat(dm, config_.vocab_size));
    out_bias_ = params_.add("out.bias", Mat(1, config_.vocab_size));
}

void Model::init_params(std::uint64_t seed) {
    Rng rng = Rng(seed).split("init");
    for (std::size_t i = 0; i < params_.count(); ++i) {
        auto& entry = params_.entry(static_cast<int>(i));
        bool is_gain = entry.name.ends_with(".gain");
        bool is_bias = entry.name.ends_with(".bias") || entry.name.ends_with(".bq") ||
                       entry.name.ends_with(".bk") || entry.name.ends_with(".bv") ||
                       entry.name.ends_with(".bo") || entry.name.ends_with(".b1") ||
                       entry.name.ends_with(".b2");
        if (is_gain) {
            std::fill(entry.value.d.begin(), entry.value.d.end(), 1.0);
        } else if (is_bias) {
            entry.value.set_zero();
        } else {
            double bound = std::sqrt(6.0 / (entry.value.rows + entry.value.cols));
            for (auto& x : entry.value.d) x = (2.0 * rng.next_double() - 1.0) * bound;
        }
    }
}

void Model::quantize_params() {
    for (std::size_t i = 0; i < params_.count(); ++i) {
        for (auto& x : params_.value(static_cast<int>(i)).d) {
            x = static_cast<double>(static_cast<float>(x));
        }
    }
}

int Model::param_index(const std::string& name) const {
    for (std::size_t i = 0; i < params_.count(); ++i) {
        if (params_.entry(static_cast<int>(i)).name == name) return static_cast<int>(i);
    }
    throw DataError("no parameter named '" + name + "'");
}

std::vector<TokenId> Model::content_ids(const Sentence& s) const {
    // Reserved ids only exist once the vocab is big enough to hold them;
    // degenerate configs (vocab_size < 4) treat every id as content.
    const bool reserved = config_.vocab_size >= kNumReserved;
    std::vector<TokenId> ids;
    ids.reserve(s.token_ids.size());
    for (TokenId id : s.token_ids) {
        if (reserved && (id == kPadId || id == kBosId)) continue;
        if (id < 0 || id >= config_.vocab_size) {
            throw DataError("token id " + std::to_string(id) + " outside model vocab of size " +
                            std::to_string(config_.vocab_size));
        }
        ids.push_back(id);
    }
    if (ids.empty()) throw DataError("sentence has no content tokens");
    if (static_cast<int>(ids.size()) > config_.max_len) {
        throw DataError("sentence length " + std::to_string(ids.size()) + " exceeds max_len " +
                        std::to_string(config_.max_len));
    }
    return ids;
}

// --- plain inference helpers ---

namespace {

Mat linear(const Mat& x, const Mat& w, const Mat* bias) {
    Mat y(x.rows, w.cols);
    gemm_nn(x, w, y, false);
    if (bias != nullptr) {
        for (int r = 0; r < y.rows; ++r) {
            for (int c = 0; c < y.cols; ++c) y(r, c) += (*bias)(0, c);
        }
    }
    return y;
}

Mat layernorm_full(const Mat& x, const Mat& gain, const Mat& bias, double eps = 1e-5) {
    Mat y(x.rows, x.cols);
    for (int r = 0; r < x.rows; ++r) {
        double mean = 0.0;
        for (int c = 0; c < x.cols; ++c) mean += x(r, c);
        mean /= x.cols;
        double var = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            double d = x(r, c) - mean;
            var += d * d;
        }
        var /= x.cols;
        double inv_std = 1.0 / std::sqrt(var + eps);
        for (int c = 0; c < x.cols; ++c) {
            y(r, c) = (x(r, c) - mean) * inv_std * gain(0, c) + bias(0, c);
        }
    }
    return y;
}

void gelu_inplace(Mat& x) {
    for (auto& v : x.d) v = 0.5 * v * (1.0 + std::erf(v * 0.7071067811865475244));
}

void add_inplace(Mat& x, const Mat& y) {
    for (std::size_t i = 0; i < x.size(); ++i) x.d[i] += y.d[i];
}

// Single-query attention over the first n_rows of keys/values, head-blocked.
Mat attend_row(const Mat& q, const Mat& keys, const Mat& values, int n_rows, int n_heads) {
    const int dm = q.cols;
    const int dk = dm / n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    Mat ctx(1, dm);
    std::vector<double> scores(static_cast<std::size_t>(n_rows));
    for (int h = 0; h < n_heads; ++h) {
        const int off = h * dk;
        double max_score = -1e300;
        for (int j = 0; j < n_rows; ++j) {
            double s = 0.0;
            for (int c = 0; c < dk; ++c) s += q(0, off + c) * keys(j, off + c);
            scores[static_cast<std::size_t>(j)] = s * scale;
            max_score = std::max(max_score, s * scale);
        }
        double sum = 0.0;
        for (int j = 0; j < n_rows; ++j) {
            double e = std::exp(scores[static_cast<std::size_t>(j)] - max_score);
            scores[static_cast<std::size_t>(j)] = e;
            sum += e;
        }
        for (int j = 0; j < n_rows; ++j) {
            double a = scores[static_cast<std::size_t>(j)] / sum;
            for (int c = 0; c < dk; ++c) ctx(0, off + c) += a * values(j, off + c);
        }
    }
    return ctx;
}

double log_softmax_at(const Mat& logits, int row, TokenId target) {
    double m = logits(row, 0);
    for (int c = 1; c < logits.cols; ++c) m = std::max(m, logits(row, c));
    double sum = 0.0;
    for (int c = 0; c < logits.cols; ++c) sum += std::exp(logits(row, c) - m);
    return logits(row, target) - m - std::log(sum);
}

}  // namespace

Mat Model::encoder_states(std::span<const TokenId> ids) const {
    const int n = static_cast<int>(ids.size());
    const Mat& emb = params_.value(embedding_);
    Mat x(n, config_.d_model);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < config_.d_model; ++c) {
            x(i, c) = emb(ids[static_cast<std::size_t>(i)], c) + pos_enc_(i, c);
        }
    }
    const int dk = config_.d_model / config_.n_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
    for (const auto& layer : enc_layers_) {
        Mat h = layernorm_full(x, params_.value(layer.ln1.gain), params_.value(layer.ln1.bias));
        Mat q = linear(h, params_.value(layer.attn.wq), &params_.value(layer.attn.bq));
        Mat k = linear(h, params_.value(layer.attn.wk), &params_.value(layer.attn.bk));
        Mat v = linear(h, params_.value(layer.attn.wv), &params_.value(layer.attn.bv));
        Mat ctx(n, config_.d_model);
        std::vector<double> scores(static_cast<std::size_t>(n));
        for (int head = 0; head < config_.n_heads; ++head) {
            const int off = head * dk;
            for (int i = 0; i < n; ++i) {
                double max_score = -1e300;
                for (int j = 0; j < n; ++j) {
                    double s = 0.0;
                    for (int c = 0; c < dk; ++c) s += q(i, off + c) * k(j, off + c);
                    scores[static_cast<std::size_t>(j)] = s * scale;
                    max_score = std::max(max_score, s * scale);
                }
                double sum = 0.0;
                for (int j = 0; j < n; ++j) {
                    double e = std::exp(scores[static_cast<std::size_t>(j)] - max_score);
                    scores[static_cast<std::size_t>(j)] = e;
                    sum += e;
                }
                for (int j = 0; j < n; ++j) {
                    double a = scores[static_cast<std::size_t>(j)] / sum;
                    for (int c = 0; c < dk; ++c) ctx(i, off + c) += a * v(j, off + c);
                }
            }
        }
        add_inplace(x, linear(ctx, params_.value(layer.attn.wo), &params_.value(layer.attn.bo)));
        Mat h2 = layernorm_full(x, params_.value(layer.ln2.gain), params_.value(layer.ln2.bias));
        Mat f = linear(h2, params_.value(layer.ffn.w1), &params_.value(layer.ffn.b1));
        gelu_inplace(f);
        add_inplace(x, linear(f, params_.value(layer.ffn.w2), &params_.value(layer.ffn.b2)));
    }
    return layernorm_full(x, params_.value(enc_final_ln_.gain), params_.value(enc_final_ln_.bias));
}

Embedding Model::encode(const Sentence& s) const {
    if (config_.bottleneck_dim == 0) {
        throw ConfigError("encode requires a bottleneck; use encode_full");
    }
    Mat states = encoder_states(content_ids(s));
    Mat pooled(1, config_.d_model);
    for (int r = 0; r < states.rows; ++r) {
        for (int c = 0; c < states.cols; ++c) pooled(0, c) += states(r, c);
    }
    for (int c = 0; c < pooled.cols; ++c) pooled(0, c) /= states.rows;
    Mat e = linear(pooled, params_.value(bottleneck_proj_), nullptr);
    return Embedding(e.d.begin(), e.d.end());
}

Mat Model::encode_full(const Sentence& s) const { return encoder_states(content_ids(s)); }

Mat Model::memory_from_embedding(const Embedding& e) const {
    if (config_.bottleneck_dim == 0) throw ConfigError("model has no bottleneck");
    if (static_cast<int>(e.size()) != config_.bottleneck_dim) {
        throw DataError("embedding length " + std::to_string(e.size()) +
                        " does not match bottleneck_dim " +
                        std::to_string(config_.bottleneck_dim));
    }
    Mat em(1, config_.bottleneck_dim);
    std::copy(e.begin(), e.end(), em.d.begin());
    return linear(em, params_.value(memory_expand_), nullptr);
}

Mat Model::memory_from_sentence(const Sentence& s) const {
    if (config_.bottleneck_dim > 0) return memory_from_embedding(encode(s));
    return encode_full(s);
}

Model::DecoderState Model::make_decoder_state(const Mat& memory) const {
    DecoderState st;
    st.self_k.reserve(dec_layers_.size());
    st.self_v.reserve(dec_layers_.size());
    for (const auto& layer : dec_layers_) {
        st.self_k.emplace_back(config_.max_len, config_.d_model);
        st.self_v.emplace_back(config_.max_len, config_.d_model);
        st.mem_k.push_back(
            linear(memory, params_.value(layer.cross_attn.wk), &params_.value(layer.cross_attn.bk)));
        st.mem_v.push_back(
            linear(memory, params_.value(layer.cross_attn.wv), &params_.value(layer.cross_attn.bv)));
    }
    return st;
}

Mat Model::decoder_advance(DecoderState& st, TokenId token) const {
    const int dm = config_.d_model;
    Mat x(1, dm);
    if (token < 0) {
        const Mat& start = params_.value(start_vec_);
        for (int c = 0; c < dm; ++c) x(0, c) = start(0, c);
    } else {
        const Mat& emb = params_.value(embedding_);
        for (int c = 0; c < dm; ++c) x(0, c) = emb(token, c);
    }
    for (int c = 0; c < dm; ++c) x(0, c) += pos_enc_(st.t, c);

    for (std::size_t l = 0; l < dec_layers_.size(); ++l) {
        const auto& layer = dec_layers_[l];
        Mat h = layernorm_full(x, params_.value(layer.ln1.gain), params_.value(layer.ln1.bias));
        Mat q = linear(h, params_.value(layer.self_attn.wq), &params_.value(layer.self_attn.bq));
        Mat k = linear(h, params_.value(layer.self_attn.wk), &params_.value(layer.self_attn.bk));
        Mat v = linear(h, params_.value(layer.self_attn.wv), &params_.value(layer.self_attn.bv));
        for (int c = 0; c < dm; ++c) {
            st.self_k[l](st.t, c) = k(0, c);
            st.self_v[l](st.t, c) = v(0, c);
        }
        Mat ctx = attend_row(q, st.self_k[l], st.self_v[l], st.t + 1, config_.n_heads);
        add_inplace(x, linear(ctx, params_.value(layer.self_attn.wo),
                              &params_.value(layer.self_attn.bo)));

        Mat h2 = layernorm_full(x, params_.value(layer.ln2.gain), params_.value(layer.ln2.bias));
        Mat q2 = linear(h2, params_.value(layer.cross_attn.wq), &params_.value(layer.cross_attn.bq));
        Mat ctx2 = attend_row(q2, st.mem_k[l], st.mem_v[l], st.mem_k[l].rows, config_.n_heads);
        add_inplace(x, linear(ctx2, params_.value(layer.cross_attn.wo),
                              &params_.value(layer.cross_attn.bo)));

        Mat h3 = layernorm_full(x, params_.value(layer.ln3.gain), params_.value(layer.ln3.bias));
        Mat f = linear(h3, params_.value(layer.ffn.w1), &params_.value(layer.ffn.b1));
        gelu_inplace(f);
        add_inplace(x, linear(f, params_.value(layer.ffn.w2), &params_.value(layer.ffn.b2)));
    }
    Mat y = layernorm_full(x, params_.value(dec_final_ln_.gain), params_.value(dec_final_ln_.bias));
    ++st.t;
    return linear(y, params_.value(out_proj_), &params_.value(out_bias_));
}

Mat Model::all_decoder_logits(const Mat& memory, std::span<const TokenId> prefix) const {
    if (static_cast<int>(prefix.size()) >= config_.max_len) {
        throw DataError("decoder prefix must be shorter than max_len");
    }
    DecoderState st = make_decoder_state(memory);
    Mat logits(static_cast<int>(prefix.size()) + 1, config_.vocab_size);
    Mat row = decoder_advance(st, -1);
    for (int c = 0; c < logits.cols; ++c) logits(0, c) = row(0, c);
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        row = decoder_advance(st, prefix[i]);
        for (int c = 0; c < logits.cols; ++c) logits(static_cast<int>(i) + 1, c) = row(0, c);
    }
    return logits;
}

Mat Model::decoder_logits(const Embedding& e, std::span<const TokenId> prefix) const {
    return all_decoder_logits(memory_from_embedding(e), prefix);
}

Mat Model::decoder_logits_from_memory(const Mat& memory, std::span<const TokenId> prefix) const {
    return all_decoder_logits(memory, prefix);
}

LogLik Model::log_likelihood_from_memory(const Mat& memory, const Sentence& s) const {
    std::vector<TokenId> ids = content_ids(s);
    std::span<const TokenId> teacher(ids.data(), ids.size() - 1);
    Mat logits = all_decoder_logits(memory, teacher);
    LogLik out;
    out.per_token.reserve(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double lp = log_softmax_at(logits, static_cast<int>(i), ids[i]);
        out.per_token.push_back(lp);
        out.total += lp;
    }
    return out;
}

LogLik Model::log_likelihood(const Embedding& e, const Sentence& s) const {
    return log_likelihood_from_memory(memory_from_embedding(e), s);
}

double Model::token_accuracy(std::span<const SentencePair> pairs) const {
    if (pairs.empty()) throw ConfigError("token_accuracy needs a non-empty pair list");
    long correct = 0;
    long total = 0;
    for (const auto& pair : pairs) {
        Mat memory = memory_from_sentence(pair.input);
        std::vector<TokenId> target = content_ids(pair.target);
        std::span<const TokenId> teacher(target.data(), target.size() - 1);
        Mat logits = all_decoder_logits(memory, teacher);
        for (std::size_t i = 0; i < target.size(); ++i) {
            int best = 0;
            for (int c = 1; c < logits.cols; ++c) {
                if (logits(static_cast<int>(i), c) > logits(static_cast<int>(i), best)) best = c;
            }
            if (best == target[i]) ++correct;
            ++total;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

// --- sampling ---

std::vector<double> softmax_row(std::span<const double> logits) {
    std::vector<double> probs(logits.size());
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - m);
        sum += probs[i];
    }
    for (auto& p : probs) p /= sum;
    return probs;
}

int greedy_pick(std::span<const double> probs) {
    int best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

NucleusPick nucleus_pick(std::span<const double> probs, double top_p, Rng& rng) {
    std::vector<int> order(probs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)]) {
            return probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)];
        }
        return a < b;
    });
    std::size_t keep = order.size();
    double cumulative = 0.0;
    // The tolerance keeps exact boundaries (e.g. 0.6+0.3 vs p=0.9) inside the
    // intended smallest set despite floating-point rounding.
    const double boundary = top_p - 1e-12;
    for (std::size_t i = 0; i < order.size(); ++i) {
        cumulative += probs[static_cast<std::size_t>(order[i])];
        if (cumulative >= boundary) {
            keep = i + 1;
            break;
        }
    }
    double mass = 0.0;
    for (std::size_t i = 0; i < keep; ++i) mass += probs[static_cast<std::size_t>(order[i])];
    double u = rng.next_double() * mass;
    double acc = 0.0;
    for (std::size_t i = 0; i < keep; ++i) {
        acc += probs[static_cast<std::size_t>(order[i])];
        if (u < acc || i + 1 == keep) {
            return {order[i], std::log(probs[static_cast<std::size_t>(order[i])] / mass)};
        }
    }
    return {order[0], std::log(probs[static_cast<std::size_t>(order[0])] / mass)};
}

SampleResult Model::sample_from_memory(const Mat& memory, const DecodeConfig& dc, Rng& rng) const {
    dc.validate(config_);
    if (config_.vocab_size <= kEosId) {
        throw ConfigError("sampling needs a vocab that includes the EOS id");
    }
    if (dc.strategy == DecodeConfig::Strategy::beam) return sample_beam(memory, dc);

    SampleResult out;
    DecoderState st = make_decoder_state(memory);
    TokenId prev = -1;
    while (true) {
        Mat logits = decoder_advance(st, prev);
        std::vector<double> probs = softmax_row({logits.data(), logits.size()});
        TokenId tok;
        double lp;
        if (dc.strategy == DecodeConfig::Strategy::greedy) {
            tok = greedy_pick(probs);
            lp = std::log(probs[static_cast<std::size_t>(tok)]);
        } else {
            NucleusPick pick = nucleus_pick(probs, dc.top_p, rng);
            tok = pick.id;
            lp = pick.logprob;
        }
        out.path_logprob += lp;
        if (tok == kEosId) break;
        out.sentence.token_ids.push_back(tok);
        if (static_cast<int>(out.sentence.token_ids.size()) >= dc.max_decode_len - 1) break;
        prev = tok;
    }
    out.sentence.token_ids.push_back(kEosId);
    return out;
}

SampleResult Model::sample_beam(const Mat& memory, const DecodeConfig& dc) const {
    struct Beam {
        DecoderState st;
        std::vector<TokenId> ids;
        double logp = 0.0;
    };
    struct Finished {
        std::vector<TokenId> ids;  // without EOS
        double logp = 0.0;
        double normalized = 0.0;
    };

    std::vector<Beam> live;
    live.push_back({make_decoder_state(memory), {}, 0.0});
    std::vector<Finished> finished;

    for (int step_idx = 0; step_idx < dc.max_decode_len - 1 && !live.empty(); ++step_idx) {
        struct Cand {
            std::size_t beam;
            TokenId tok;
            double logp;
        };
        std::vector<Cand> cands;
        for (std::size_t b = 0; b < live.size(); ++b) {
            Mat logits = decoder_advance(live[b].st, live[b].ids.empty() ? -1 : live[b].ids.back());
            double m = logits(0, 0);
            for (int c = 1; c < logits.cols; ++c) m = std::max(m, logits(0, c));
            double sum = 0.0;
            for (int c = 0; c < logits.cols; ++c) sum += std::exp(logits(0, c) - m);
            double lse = m + std::log(sum);
            for (int c = 0; c < logits.cols; ++c) {
                cands.push_back({b, c, live[b].logp + logits(0, c) - lse});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.logp != b.logp) return a.logp > b.logp;
            if (a.beam != b.beam) return a.beam < b.beam;
            return a.tok < b.tok;
        });
        std::vector<Beam> next;
        for (const Cand& c : cands) {
            if (static_cast<int>(next.size()) >= dc.beam_width &&
                static_cast<int>(finished.size()) >= dc.beam_width) {
                break;
            }
            if (c.tok == kEosId) {
                if (static_cast<int>(finished.size()) < dc.beam_width) {
                    double len = static_cast<double>(live[c.beam].ids.size()) + 1.0;
                    finished.push_back({live[c.beam].ids, c.logp, c.logp / len});
                }
            } else if (static_cast<int>(next.size()) < dc.beam_width) {
                Beam nb;
                nb.st = live[c.beam].st;
                nb.ids = live[c.beam].ids;
                nb.ids.push_back(c.tok);
                nb.logp = c.logp;
                next.push_back(std::move(nb));
            }
        }
        live = std::move(next);
    }
    // Length cap reached: close out remaining beams with a forced EOS.
    for (auto& b : live) {
        Mat logits = decoder_advance(b.st, b.ids.empty() ? -1 : b.ids.back());
        double lp = log_softmax_at(logits, 0, kEosId);
        double total = b.logp + lp;
        double len = static_cast<double>(b.ids.size()) + 1.0;
        finished.push_back({std::move(b.ids), total, total / len});
    }

    const Finished* best = &finished.front();
    for (const auto& f : finished) {
        if (f.normalized > best->normalized) best = &f;
    }
    SampleResult out;
    out.sentence.token_ids = best->ids;
    out.sentence.token_ids.push_back(kEosId);
    out.path_logprob = best->logp;
    return out;
}

SampleResult Model::sample(const Embedding& e, const DecodeConfig& dc, Rng& rng) const {
    return sample_from_memory(memory_from_embedding(e), dc, rng);
}

// --- training (tape path) ---

int Model::memory_node(Tape& tape, std::span<const TokenId> src_ids, Rng* dropout_rng) const {
    const int n = static_cast<int>(src_ids.size());
    const int dk = config_.d_model / config_.n_heads;
    Mat pos(n, config_.d_model);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < config_.d_model; ++c) pos(r, c) = pos_enc_(r, c);
    }
    int x = tape.add_const(tape.embed(embedding_, src_ids), pos);
    if (dropout_rng != nullptr) x = tape.dropout(x, config_.dropout_rate, *dropout_rng);

    for (const auto& layer : enc_layers_) {
        int h = tape.layernorm(x, tape.param(layer.ln1.gain), tape.param(layer.ln1.bias));
        int q = tape.add_rowvec(tape.matmul(h, tape.param(layer.attn.wq)), tape.param(layer.attn.bq));
        int k = tape.add_rowvec(tape.matmul(h, tape.param(layer.attn.wk)), tape.param(layer.attn.bk));
        int v = tape.add_rowvec(tape.matmul(h, tape.param(layer.attn.wv)), tape.param(layer.attn.bv));
        std::vector<int> heads;
        for (int hd = 0; hd < config_.n_heads; ++hd) {
            int qh = tape.slice_cols(q, hd * dk, (hd + 1) * dk);
            int kh = tape.slice_cols(k, hd * dk, (hd + 1) * dk);
            int vh = tape.slice_cols(v, hd * dk, (hd + 1) * dk);
            int scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dk)));
            heads.push_back(tape.matmul(tape.softmax_rows(scores), vh));
        }
        int ctx = tape.concat_cols(heads);
        int attn_out =
            tape.add_rowvec(tape.matmul(ctx, tape.param(layer.attn.wo)), tape.param(layer.attn.bo));
        if (dropout_rng != nullptr) {
            attn_out = tape.dropout(attn_out, config_.dropout_rate, *dropout_rng);
        }
        x = tape.add(x, attn_out);
        int h2 = tape.layernorm(x, tape.param(layer.ln2.gain), tape.param(layer.ln2.bias));
        int f = tape.gelu(
            tape.add_rowvec(tape.matmul(h2, tape.param(layer.ffn.w1)), tape.param(layer.ffn.b1)));
        int f2 =
            tape.add_rowvec(tape.matmul(f, tape.param(layer.ffn.w2)), tape.param(layer.ffn.b2));
        if (dropout_rng != nullptr) f2 = tape.dropout(f2, config_.dropout_rate, *dropout_rng);
        x = tape.add(x, f2);
    }
    x = tape.layernorm(x, tape.param(enc_final_ln_.gain), tape.param(enc_final_ln_.bias));
    if (config_.bottleneck_dim == 0) return x;
    int pooled = tape.mean_rows(x);
    int e = tape.matmul(pooled, tape.param(bottleneck_proj_));
    return tape.matmul(e, tape.param(memory_expand_));
}

int Model::logits_node(Tape& tape, int memory, std::span<const TokenId> teacher_inputs,
                       Rng* dropout_rng) const {
    const int n = static_cast<int>(teacher_inputs.size()) + 1;
    const int dk = config_.d_model / config_.n_heads;
    Mat pos(n, config_.d_model);
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < config_.d_model; ++c) pos(r, c) = pos_enc_(r, c);
    }
    int x;
    if (teacher_inputs.empty()) {
        x = tape.add_const(tape.param(start_vec_), pos);
    } else {
        x = tape.add_const(
            tape.concat_rows(tape.param(start_vec_), tape.embed(embedding_, teacher_inputs)), pos);
    }
    if (dropout_rng != nullptr) x = tape.dropout(x, config_.dropout_rate, *dropout_rng);

    Mat causal(n, n);
    for (int r = 0; r < n; ++r) {
        for (int c = r + 1; c < n; ++c) causal(r, c) = -1e9;
    }

    for (const auto& layer : dec_layers_) {
        int h = tape.layernorm(x, tape.param(layer.ln1.gain), tape.param(layer.ln1.bias));
        int q = tape.add_rowvec(tape.matmul(h, tape.param(layer.self_attn.wq)),
                                tape.param(layer.self_attn.bq));
        int k = tape.add_rowvec(tape.matmul(h, tape.param(layer.self_attn.wk)),
                                tape.param(layer.self_attn.bk));
        int v = tape.add_rowvec(tape.matmul(h, tape.param(layer.self_attn.wv)),
                                tape.param(layer.self_attn.bv));
        std::vector<int> heads;
        for (int hd = 0; hd < config_.n_heads; ++hd) {
            int qh = tape.slice_cols(q, hd * dk, (hd + 1) * dk);
            int kh = tape.slice_cols(k, hd * dk, (hd + 1) * dk);
            int vh = tape.slice_cols(v, hd * dk, (hd + 1) * dk);
            int scores = tape.add_const(
                tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dk))), causal);
            heads.push_back(tape.matmul(tape.softmax_rows(scores), vh));
        }
        int attn_out = tape.add_rowvec(
            tape.matmul(tape.concat_cols(heads), tape.param(layer.self_attn.wo)),
            tape.param(layer.self_attn.bo));
        if (dropout_rng != nullptr) {
            attn_out = tape.dropout(attn_out, config_.dropout_rate, *dropout_rng);
        }
        x = tape.add(x, attn_out);

        int h2 = tape.layernorm(x, tape.param(layer.ln2.gain), tape.param(layer.ln2.bias));
        int q2 = tape.add_rowvec(tape.matmul(h2, tape.param(layer.cross_attn.wq)),
                                 tape.param(layer.cross_attn.bq));
        int mk = tape.add_rowvec(tape.matmul(memory, tape.param(layer.cross_attn.wk)),
                                 tape.param(layer.cross_attn.bk));
        int mv = tape.add_rowvec(tape.matmul(memory, tape.param(layer.cross_attn.wv)),
                                 tape.param(layer.cross_attn.bv));
        std::vector<int> cross_heads;
        for (int hd = 0; hd < config_.n_heads; ++hd) {
            int qh = tape.slice_cols(q2, hd * dk, (hd + 1) * dk);
            int kh = tape.slice_cols(mk, hd * dk, (hd + 1) * dk);
            int vh = tape.slice_cols(mv, hd * dk, (hd + 1) * dk);
            int scores = tape.scale(tape.matmul_nt(qh, kh), 1.0 / std::sqrt(double(dk)));
            cross_heads.push_back(tape.matmul(tape.softmax_rows(scores), vh));
        }
        int cross_out = tape.add_rowvec(
            tape.matmul(tape.concat_cols(cross_heads), tape.param(layer.cross_attn.wo)),
            tape.param(layer.cross_attn.bo));
        if (dropout_rng != nullptr) {
            cross_out = tape.dropout(cross_out, config_.dropout_rate, *dropout_rng);
        }
        x = tape.add(x, cross_out);

        int h3 = tape.layernorm(x, tape.param(layer.ln3.gain), tape.param(layer.ln3.bias));
        int f = tape.gelu(
            tape.add_rowvec(tape.matmul(h3, tape.param(layer.ffn.w1)), tape.param(layer.ffn.b1)));
        int f2 =
            tape.add_rowvec(tape.matmul(f, tape.param(layer.ffn.w2)), tape.param(layer.ffn.b2));
        if (dropout_rng != nullptr) f2 = tape.dropout(f2, config_.dropout_rate, *dropout_rng);
        x = tape.add(x, f2);
    }
    x = tape.layernorm(x, tape.param(dec_final_ln_.gain), tape.param(dec_final_ln_.bias));
    return tape.add_rowvec(tape.matmul(x, tape.param(out_proj_)), tape.param(out_bias_));
}

double Model::sample_loss(const SentencePair& pair, std::vector<Mat>* sink,
                          Rng* dropout_rng) const {
    Tape tape(params_, sink);
    std::vector<TokenId> src = content_ids(pair.input);
    std::vector<TokenId> target = content_ids(pair.target);
    int memory = memory_node(tape, src, dropout_rng);
    std::span<const TokenId> teacher(target.data(), target.size() - 1);
    int logits = logits_node(tape, memory, teacher, dropout_rng);
    int loss = tape.cross_entropy_sum(logits, target);
    if (sink != nullptr) tape.backward(loss);
    return tape.value(loss)(0, 0);
}

double Model::batch_loss(std::span<const SentencePair> batch) const {
    if (batch.empty()) throw ConfigError("batch must be non-empty");
    double total = 0.0;
    long tokens = 0;
    for (const auto& pair : batch) {
        total += sample_loss(pair, nullptr, nullptr);
        tokens += static_cast<long>(content_ids(pair.target).size());
    }
    return total / static_cast<double>(tokens);
}

std::vector<Mat> Model::batch_gradients(std::span<const SentencePair> batch) const {
    if (batch.empty()) throw ConfigError("batch must be non-empty");
    std::vector<Mat> grads = params_.zero_grads();
    long tokens = 0;
    for (const auto& pair : batch) {
        sample_loss(pair, &grads, nullptr);
        tokens += static_cast<long>(content_ids(pair.target).size());
    }
    const double inv = 1.0 / static_cast<double>(tokens);
    for (auto& g : grads) {
        for (auto& x : g.d) x *= inv;
    }
    return grads;
}

double Model::train_step(std::span<const SentencePair> batch, const TrainConfig& tc) {
    tc.validate();
    if (batch.empty()) throw TrainingError("empty batch at step " + std::to_string(step_));

    const std::size_t n = batch.size();
    // Per-sample gradient sinks reduced in sample order, so results do not
    // depend on the thread count.
    while (sink_pool_.size() < n) sink_pool_.push_back(params_.zero_grads());
    std::vector<std::vector<Mat>>& sinks = sink_pool_;
    std::vector<double> losses(n, 0.0);
    std::vector<long> tokens(n, 0);
    std::vector<std::string> failures(n);

    const bool use_dropout = config_.dropout_rate > 0.0;
    auto worker = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            try {
                for (Mat& g : sinks[i]) g.set_zero();
                tokens[i] = static_cast<long>(content_ids(batch[i].target).size());
                Rng dropout_rng = Rng(tc.seed).split("dropout").split(step_).split(i);
                losses[i] =
                    sample_loss(batch[i], &sinks[i], use_dropout ? &dropout_rng : nullptr);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(tc.n_threads), n);
    if (n_threads <= 1) {
        worker(0, n);
    } else {
        std::vector<std::thread> threads;
        std::size_t chunk = (n + n_threads - 1) / n_threads;
        for (std::size_t t = 0; t < n_threads; ++t) {
            std::size_t begin = t * chunk;
            std::size_t end = std::min(n, begin + chunk);
            if (begin < end) threads.emplace_back(worker, begin, end);
        }
        for (auto& t : threads) t.join();
    }
    for (const auto& failure : failures) {
        if (!failure.empty()) {
            throw TrainingError("step " + std::to_string(step_) + ": " + failure);
        }
    }

    double total_loss = 0.0;
    long total_tokens = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total_loss += losses[i];
        total_tokens += tokens[i];
    }
    double mean_loss = total_loss / static_cast<double>(total_tokens);
    if (!std::isfinite(mean_loss)) {
        throw TrainingError("non-finite loss " + std::to_string(mean_loss) + " at step " +
                            std::to_string(step_) + " (batch of " + std::to_string(n) + ")");
    }

    std::vector<Mat> grads = params_.zero_grads();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < grads.size(); ++p) {
            for (std::size_t j = 0; j < grads[p].size(); ++j) grads[p].d[j] += sinks[i][p].d[j];
        }
    }
    const double inv_tokens = 1.0 / static_cast<double>(total_tokens);
    double norm_sq = 0.0;
    for (auto& g : grads) {
        for (auto& x : g.d) {
            x *= inv_tokens;
            norm_sq += x * x;
        }
    }
    if (tc.clip_norm > 0.0) {
        double norm = std::sqrt(norm_sq);
        if (norm > tc.clip_norm) {
            double scale = tc.clip_norm / norm;
            for (auto& g : grads) {
                for (auto& x : g.d) x *= scale;
            }
        }
    }

    if (adam_m_.empty()) {
        adam_m_ = params_.zero_grads();
        adam_v_ = params_.zero_grads();
    }
    const long t = step_ + 1;
    const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(t));
    double lr = tc.lr;
    if (tc.warmup_steps > 0) {
        lr *= std::min(1.0, static_cast<double>(t) / static_cast<double>(tc.warmup_steps));
    }
    for (std::size_t p = 0; p < grads.size(); ++p) {
        Mat& value = params_.value(static_cast<int>(p));
        Mat& m = adam_m_[p];
        Mat& v = adam_v_[p];
        for (std::size_t j = 0; j < value.size(); ++j) {
            double g = grads[p].d[j];
            m.d[j] = tc.beta1 * m.d[j] + (1.0 - tc.beta1) * g;
            v.d[j] = tc.beta2 * v.d[j] + (1.0 - tc.beta2) * g * g;
            double mhat = m.d[j] / bc1;
            double vhat = v.d[j] / bc2;
            value.d[j] -= lr * mhat / (std::sqrt(vhat) + tc.adam_eps);
        }
    }
    quantize_params();
    ++step_;
    return mean_loss;
}

}  // namespace v2t
