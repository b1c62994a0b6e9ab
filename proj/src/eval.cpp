#include "v2t/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>

#include "v2t/augment.hpp"
#include "v2t/errors.hpp"

namespace v2t {

Sentence ModelDistribution::sample_full(std::span<const double> embedding, Rng& rng) const {
    Embedding e(embedding.begin(), embedding.end());
    DecodeConfig dc = DecodeConfig::nucleus_decode(1.0, model_->config().max_len);
    return model_->sample(e, dc, rng).sentence;
}

double ModelDistribution::log_prob(std::span<const double> embedding, const Sentence& s) const {
    Embedding e(embedding.begin(), embedding.end());
    return model_->log_likelihood(e, s).total;
}

Sentence ModelDistribution::sample_nucleus(std::span<const double> embedding, double top_p,
                                           Rng& rng) const {
    Embedding e(embedding.begin(), embedding.end());
    DecodeConfig dc = DecodeConfig::nucleus_decode(top_p, model_->config().max_len);
    return model_->sample(e, dc, rng).sentence;
}

EvalSet make_eval_set(const Model& model, std::span<const Sentence> sentences) {
    EvalSet set;
    set.sentences.assign(sentences.begin(), sentences.end());
    set.embeddings.reserve(sentences.size());
    for (const auto& s : set.sentences) set.embeddings.push_back(model.encode(s));
    return set;
}

void InterpolationSpec::validate() const {
    if (alphas.empty()) throw ConfigError("interpolation spec needs at least one alpha");
    if (std::find(alphas.begin(), alphas.end(), 1.0) == alphas.end()) {
        throw ConfigError("interpolation alphas must include the anchor value 1");
    }
    if (n_pairs < 1) throw ConfigError("n_pairs must be >= 1");
}

void NoiseSpec::validate(std::size_t dim) const {
    if (etas.empty()) throw ConfigError("noise spec needs at least one eta");
    if (std::find(etas.begin(), etas.end(), 0.0) == etas.end()) {
        throw ConfigError("noise etas must include the anchor value 0");
    }
    if (sigma.size() != dim) {
        throw ConfigError("sigma length " + std::to_string(sigma.size()) +
                          " does not match embedding dim " + std::to_string(dim));
    }
    for (double s : sigma) {
        if (s < 0.0) throw ConfigError("sigma entries must be >= 0");
    }
}

Embedding interpolate(const Embedding& e1, const Embedding& e2, double alpha) {
    if (e1.size() != e2.size()) throw DataError("interpolation endpoints differ in length");
    if (alpha == 1.0) return e1;
    if (alpha == 0.0) return e2;
    Embedding out(e1.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * e1[i] + (1.0 - alpha) * e2[i];
    return out;
}

Embedding noise_offset(const Embedding& anchor, std::span<const double> sigma, double eta,
                       Rng& rng) {
    if (sigma.size() != anchor.size()) throw DataError("sigma length does not match embedding");
    if (eta == 0.0) return anchor;
    std::vector<double> u(anchor.size());
    double norm_sq = 0.0;
    for (auto& x : u) {
        x = rng.normal();
        norm_sq += x * x;
    }
    double norm = std::sqrt(norm_sq);
    Embedding out(anchor.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = anchor[i] + u[i] / norm * sigma[i] * eta;
    }
    return out;
}

std::vector<InterpPoint> build_interpolation_space(const EvalSet& eval_set,
                                                   const InterpolationSpec& spec, Rng& rng) {
    spec.validate();
    if (eval_set.sentences.size() < 2) {
        throw ConfigError("interpolation space needs at least 2 eval sentences");
    }
    Rng pair_rng = rng.split("interp_pairs");
    std::vector<InterpPoint> out;
    out.reserve(static_cast<std::size_t>(spec.n_pairs) * spec.alphas.size());
    for (int p = 0; p < spec.n_pairs; ++p) {
        int x1 = static_cast<int>(pair_rng.uniform(eval_set.sentences.size()));
        int x2 = static_cast<int>(pair_rng.uniform(eval_set.sentences.size() - 1));
        if (x2 >= x1) ++x2;
        for (double alpha : spec.alphas) {
            out.push_back({interpolate(eval_set.embeddings[static_cast<std::size_t>(x1)],
                                       eval_set.embeddings[static_cast<std::size_t>(x2)], alpha),
                           x1, x2, alpha});
        }
    }
    return out;
}

std::vector<NoisePoint> build_noise_space(const EvalSet& eval_set, const NoiseSpec& spec,
                                          Rng& rng) {
    if (eval_set.sentences.empty()) throw ConfigError("noise space needs eval sentences");
    spec.validate(eval_set.embeddings.front().size());
    Rng base = rng.split("noise");
    std::vector<NoisePoint> out;
    out.reserve(eval_set.sentences.size() * spec.etas.size());
    std::uint64_t counter = 0;
    for (std::size_t x = 0; x < eval_set.sentences.size(); ++x) {
        for (double eta : spec.etas) {
            Rng point_rng = base.split(counter++);
            out.push_back({noise_offset(eval_set.embeddings[x], spec.sigma, eta, point_rng),
                           static_cast<int>(x), eta});
        }
    }
    return out;
}

std::vector<double> per_dim_std(std::span<const Embedding> embeddings) {
    if (embeddings.size() < 2) {
        throw MetricError("per-dimension std needs at least 2 embeddings");
    }
    const std::size_t dim = embeddings.front().size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& e : embeddings) {
        for (std::size_t i = 0; i < dim; ++i) mean[i] += e[i];
    }
    for (auto& m : mean) m /= static_cast<double>(embeddings.size());
    std::vector<double> var(dim, 0.0);
    for (const auto& e : embeddings) {
        for (std::size_t i = 0; i < dim; ++i) {
            double d = e[i] - mean[i];
            var[i] += d * d;
        }
    }
    for (auto& v : var) v = std::sqrt(v / static_cast<double>(embeddings.size()));
    return var;
}

EntropyEstimate entropy_estimate(const SentenceDistribution& d, std::span<const double> embedding,
                                 int n_samples, Rng& rng) {
    if (n_samples < 1) throw ConfigError("entropy_estimate needs n_samples >= 1");
    EntropyEstimate out;
    for (int i = 0; i < n_samples; ++i) {
        Sentence s = d.sample_full(embedding, rng);
        double surprisal = -d.log_prob(embedding, s);
        out.entropy += surprisal;
        out.entropy_per_token += surprisal / static_cast<double>(s.token_ids.size());
    }
    out.entropy /= n_samples;
    out.entropy_per_token /= n_samples;
    return out;
}

double jeffreys_approx(const SentenceDistribution& d, std::span<const double> e_anchor,
                       std::span<const double> e_probe, int n_samples, Rng& rng) {
    if (n_samples < 1) throw ConfigError("jeffreys_approx needs n_samples >= 1");
    double total = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        Sentence s1 = d.sample_full(e_anchor, rng);
        Sentence si = d.sample_full(e_probe, rng);
        double forward = d.log_prob(e_anchor, s1) - d.log_prob(e_probe, s1);
        double backward = d.log_prob(e_probe, si) - d.log_prob(e_anchor, si);
        total += 0.5 * (forward + backward);
    }
    return total / n_samples;
}

Embedding convex_combination(std::span<const Embedding> vertices,
                             std::span<const double> weights) {
    if (vertices.size() != weights.size() || vertices.empty()) {
        throw DataError("convex combination needs matching non-empty vertices and weights");
    }
    Embedding out(vertices.front().size(), 0.0);
    for (std::size_t j = 0; j < vertices.size(); ++j) {
        if (weights[j] == 0.0) continue;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[j] * vertices[j][i];
    }
    return out;
}

std::vector<double> dirichlet_flat(std::size_t k, Rng& rng) {
    // Normalized unit-rate exponentials.
    std::vector<double> w(k);
    double sum = 0.0;
    for (auto& x : w) {
        x = -std::log1p(-rng.next_double());
        sum += x;
    }
    for (auto& x : w) x /= sum;
    return w;
}

std::vector<Embedding> convex_hull_samples(std::span<const Embedding> vertices, int n, Rng& rng) {
    if (vertices.size() < 2) throw ConfigError("convex hull needs at least 2 vertices");
    std::vector<Embedding> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        out.push_back(convex_combination(vertices, dirichlet_flat(vertices.size(), rng)));
    }
    return out;
}

namespace {

double euclidean(const Embedding& a, const Embedding& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double ratio_or_zero(double num, double den) { return num == 0.0 && den == 0.0 ? 0.0 : num / den; }

}  // namespace

ClusteringScores clustering_scores(std::span<const Embedding> points,
                                   std::span<const int> labels) {
    if (points.size() != labels.size() || points.empty()) {
        throw MetricError("clustering needs matching non-empty points and labels");
    }
    std::map<int, std::vector<std::size_t>> clusters;
    for (std::size_t i = 0; i < labels.size(); ++i) clusters[labels[i]].push_back(i);
    if (clusters.size() < 2) {
        throw MetricError("clustering scores need at least 2 clusters, got " +
                          std::to_string(clusters.size()));
    }
    for (const auto& [label, members] : clusters) {
        if (members.size() < 2) {
            throw MetricError("cluster " + std::to_string(label) +
                              " is a singleton; every cluster needs >= 2 points");
        }
    }

    const std::size_t dim = points.front().size();
    const std::size_t n = points.size();
    const std::size_t k = clusters.size();

    Embedding global_centroid(dim, 0.0);
    for (const auto& p : points) {
        for (std::size_t i = 0; i < dim; ++i) global_centroid[i] += p[i];
    }
    for (auto& c : global_centroid) c /= static_cast<double>(n);

    std::map<int, Embedding> centroids;
    for (const auto& [label, members] : clusters) {
        Embedding c(dim, 0.0);
        for (std::size_t m : members) {
            for (std::size_t i = 0; i < dim; ++i) c[i] += points[m][i];
        }
        for (auto& x : c) x /= static_cast<double>(members.size());
        centroids[label] = std::move(c);
    }

    // Calinski-Harabasz: between/within dispersion ratio.
    double between = 0.0;
    double within = 0.0;
    for (const auto& [label, members] : clusters) {
        double dist = euclidean(centroids[label], global_centroid);
        between += static_cast<double>(members.size()) * dist * dist;
        for (std::size_t m : members) {
            double d = euclidean(points[m], centroids[label]);
            within += d * d;
        }
    }
    ClusteringScores scores;
    scores.calinski_harabasz =
        ratio_or_zero(between / static_cast<double>(k - 1), within / static_cast<double>(n - k));

    // Davies-Bouldin: mean over clusters of the worst similarity ratio.
    std::map<int, double> spread;
    for (const auto& [label, members] : clusters) {
        double s = 0.0;
        for (std::size_t m : members) s += euclidean(points[m], centroids[label]);
        spread[label] = s / static_cast<double>(members.size());
    }
    double db = 0.0;
    for (const auto& [li, ci] : centroids) {
        double worst = 0.0;
        for (const auto& [lj, cj] : centroids) {
            if (li == lj) continue;
            worst = std::max(worst, ratio_or_zero(spread.at(li) + spread.at(lj), euclidean(ci, cj)));
        }
        db += worst;
    }
    scores.davies_bouldin = db / static_cast<double>(k);

    // Silhouette with the 0/0 -> 0 convention.
    double sil_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = 0.0;
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [label, members] : clusters) {
            double total = 0.0;
            for (std::size_t m : members) {
                if (m != i) total += euclidean(points[i], points[m]);
            }
            if (label == labels[i]) {
                a = total / static_cast<double>(members.size() - 1);
            } else {
                b = std::min(b, total / static_cast<double>(members.size()));
            }
        }
        double denom = std::max(a, b);
        sil_sum += denom == 0.0 ? 0.0 : (b - a) / denom;
    }
    scores.silhouette = sil_sum / static_cast<double>(n);
    return scores;
}

std::vector<TopicSet> read_topic_file(const std::filesystem::path& path) {
    std::vector<TopicSet> topics;
    for (const auto& line : read_lines(path)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            std::string name = line.substr(1);
            std::size_t start = name.find_first_not_of(" \t");
            topics.push_back({start == std::string::npos ? "" : name.substr(start), {}});
            continue;
        }
        if (topics.empty()) throw DataError("topic file must start with a '# <topic>' header");
        topics.back().sentences.push_back(line);
    }
    for (const auto& t : topics) {
        if (t.sentences.size() < 3) {
            throw DataError("topic '" + t.topic + "' needs at least 3 sentences");
        }
    }
    return topics;
}

void write_topic_file(const std::filesystem::path& path, std::span<const TopicSet> topics) {
    std::vector<std::string> lines;
    for (const auto& t : topics) {
        lines.push_back("# " + t.topic);
        for (const auto& s : t.sentences) lines.push_back(s);
    }
    write_lines(path, lines);
}

int max_word_repeat(const std::string& text) {
    std::map<std::string, int> counts;
    int best = 0;
    for (auto word : whitespace_tokens(text)) {
        for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        best = std::max(best, ++counts[word]);
    }
    return best;
}

double ModelFluencyScorer::log_prob_self(const Sentence& s) const {
    return model_->log_likelihood_from_memory(model_->memory_from_sentence(s), s).total;
}

FluencyStats fluency_metrics(std::span<const Sentence> samples, const FluencyScorer* scorer) {
    if (samples.empty()) throw ConfigError("fluency_metrics needs at least one sample");
    FluencyStats stats;
    stats.has_llh = scorer != nullptr;
    for (const auto& s : samples) {
        stats.mean_n_tokens += s.n_words();
        stats.mean_max_word_repeat += max_word_repeat(s.text);
        if (scorer != nullptr) {
            double llh = scorer->log_prob_self(s);
            stats.mean_lm_llh += llh;
            stats.mean_lm_llh_per_token += llh / static_cast<double>(s.n_words() + 1);
        }
    }
    const auto n = static_cast<double>(samples.size());
    stats.mean_n_tokens /= n;
    stats.mean_max_word_repeat /= n;
    stats.mean_lm_llh /= n;
    stats.mean_lm_llh_per_token /= n;
    return stats;
}

// --- property suite ---

namespace {

struct ConditionMetrics {
    EntropyEstimate entropy;
    FluencyStats fluency;
    double jeffreys = 0.0;
};

// Entropy, fluency and Jeffreys for one condition, averaged over its
// per-anchor (anchor, probe) embedding pairs.
ConditionMetrics condition_metrics(const ModelDistribution& dist, const Vocab& vocab,
                                   const FluencyScorer* scorer,
                                   std::span<const std::pair<Embedding, Embedding>> anchor_probe,
                                   const SuiteConfig& cfg, Rng condition_rng) {
    ConditionMetrics out;
    const int n_anchors = static_cast<int>(anchor_probe.size());
    const int per_anchor = std::max(1, cfg.n_samples / n_anchors);

    Rng entropy_rng = condition_rng.split("entropy");
    Rng decode_rng = condition_rng.split("decode");
    Rng jeffreys_rng = condition_rng.split("jeffreys");

    std::vector<Sentence> decoded;
    for (int a = 0; a < n_anchors; ++a) {
        const auto& [anchor, probe] = anchor_probe[static_cast<std::size_t>(a)];
        Rng er = entropy_rng.split(a);
        EntropyEstimate est = entropy_estimate(dist, probe, per_anchor, er);
        out.entropy.entropy += est.entropy;
        out.entropy.entropy_per_token += est.entropy_per_token;

        Rng jr = jeffreys_rng.split(a);
        out.jeffreys += jeffreys_approx(dist, anchor, probe, per_anchor, jr);

        Rng dr = decode_rng.split(a);
        for (int s = 0; s < per_anchor; ++s) {
            Sentence sent = dist.sample_nucleus(probe, cfg.decode_top_p, dr);
            sent.text = decode_tokens(vocab, sent.token_ids);
            decoded.push_back(std::move(sent));
        }
    }
    out.entropy.entropy /= n_anchors;
    out.entropy.entropy_per_token /= n_anchors;
    out.jeffreys /= n_anchors;
    out.fluency = fluency_metrics(decoded, scorer);
    return out;
}

ReportRow metrics_row(std::string condition, double param, const ConditionMetrics& m) {
    ReportRow row;
    row.condition = std::move(condition);
    row.param = param;
    row.entropy = m.entropy.entropy;
    row.entropy_per_token = m.entropy.entropy_per_token;
    row.mean_n_tokens = m.fluency.mean_n_tokens;
    row.mean_max_word_repeat = m.fluency.mean_max_word_repeat;
    if (m.fluency.has_llh) {
        row.mean_lm_llh = m.fluency.mean_lm_llh;
        row.mean_lm_llh_per_token = m.fluency.mean_lm_llh_per_token;
    }
    row.jeffreys = m.jeffreys;
    return row;
}

}  // namespace

PropertyReport run_property_suite(const Model& model, const Model* fluency_scorer,
                                  const SentenceDataset& eval_ds, const GrammarConfig& grammar,
                                  std::span<const TopicSet> topics, const SuiteConfig& cfg) {
    if (model.config().bottleneck_dim == 0) {
        throw ConfigError("property suite needs a bottlenecked model");
    }
    cfg.interpolation.validate();
    if (eval_ds.sentences.size() < 2) throw ConfigError("eval dataset too small");

    Rng root(cfg.seed);
    PropertyReport report;
    const ModelDistribution dist(model);
    std::unique_ptr<ModelFluencyScorer> scorer;
    if (fluency_scorer != nullptr) scorer = std::make_unique<ModelFluencyScorer>(*fluency_scorer);

    std::size_t n_embed = std::min<std::size_t>(eval_ds.sentences.size(),
                                                static_cast<std::size_t>(cfg.max_eval_sentences));
    EvalSet eval_set =
        make_eval_set(model, std::span<const Sentence>(eval_ds.sentences.data(), n_embed));
    std::vector<double> sigma = per_dim_std(eval_set.embeddings);

    // Anchor pairs, shared by every interpolation condition.
    Rng pair_rng = root.split("anchors");
    const int n_pairs = cfg.interpolation.n_pairs;
    std::vector<std::pair<int, int>> pairs;
    for (int p = 0; p < n_pairs; ++p) {
        int x1 = static_cast<int>(pair_rng.uniform(eval_set.sentences.size()));
        int x2 = static_cast<int>(pair_rng.uniform(eval_set.sentences.size() - 1));
        if (x2 >= x1) ++x2;
        pairs.emplace_back(x1, x2);
    }

    for (std::size_t ai = 0; ai < cfg.interpolation.alphas.size(); ++ai) {
        double alpha = cfg.interpolation.alphas[ai];
        std::vector<std::pair<Embedding, Embedding>> anchor_probe;
        for (const auto& [x1, x2] : pairs) {
            const Embedding& e1 = eval_set.embeddings[static_cast<std::size_t>(x1)];
            const Embedding& e2 = eval_set.embeddings[static_cast<std::size_t>(x2)];
            anchor_probe.emplace_back(e1, interpolate(e1, e2, alpha));
        }
        ConditionMetrics m = condition_metrics(dist, eval_ds.vocab, scorer.get(), anchor_probe,
                                               cfg, root.split("interp").split(ai));
        report.rows.push_back(metrics_row("interp", alpha, m));
    }

    // Noise anchors reuse the pairs' first sentences.
    Rng noise_rng = root.split("noise_offsets");
    for (std::size_t ei = 0; ei < cfg.etas.size(); ++ei) {
        double eta = cfg.etas[ei];
        std::vector<std::pair<Embedding, Embedding>> anchor_probe;
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const Embedding& anchor = eval_set.embeddings[static_cast<std::size_t>(pairs[p].first)];
            Rng point_rng = noise_rng.split(ei).split(p);
            anchor_probe.emplace_back(anchor, noise_offset(anchor, sigma, eta, point_rng));
        }
        ConditionMetrics m = condition_metrics(dist, eval_ds.vocab, scorer.get(), anchor_probe,
                                               cfg, root.split("noise").split(ei));
        report.rows.push_back(metrics_row("noise", eta, m));
    }

    // Reconstruction accuracy on clean and paraphrased eval pairs.
    {
        std::vector<SentencePair> clean;
        for (std::size_t i = 0; i < n_embed; ++i) {
            clean.push_back({eval_set.sentences[i], eval_set.sentences[i]});
        }
        ReportRow row;
        row.condition = "recon_clean";
        row.accuracy = model.token_accuracy(clean);
        report.rows.push_back(row);

        SyntheticParaphraser paraphrase(eval_ds.vocab, grammar,
                                        static_cast<std::size_t>(model.config().max_len));
        Rng rtt_rng = root.split("eval_rtt");
        std::vector<SentencePair> rtt;
        for (std::size_t i = 0; i < n_embed; ++i) {
            Rng r = rtt_rng.split(i);
            rtt.push_back({paraphrase(eval_set.sentences[i], cfg.paraphrase_temperature, r),
                           eval_set.sentences[i]});
        }
        ReportRow rtt_row;
        rtt_row.condition = "recon_rtt";
        rtt_row.accuracy = model.token_accuracy(rtt);
        report.rows.push_back(rtt_row);
    }

    // Topic convex hulls: decode hull samples, report their fluency profile.
    Rng hull_rng = root.split("hull");
    for (std::size_t t = 0; t < topics.size(); ++t) {
        const TopicSet& topic = topics[t];
        std::vector<Embedding> vertices;
        for (const auto& text : topic.sentences) {
            vertices.push_back(
                model.encode(encode_sentence(eval_ds.vocab, text, model.config().max_len)));
        }
        Rng tr = hull_rng.split(t);
        std::vector<Embedding> hull = convex_hull_samples(vertices, cfg.hull_samples, tr);
        Rng dr = hull_rng.split(t).split("decode");
        std::vector<Sentence> decoded;
        for (const auto& e : hull) {
            Sentence s = dist.sample_nucleus(e, cfg.decode_top_p, dr);
            s.text = decode_tokens(eval_ds.vocab, s.token_ids);
            decoded.push_back(std::move(s));
        }
        FluencyStats fl = fluency_metrics(decoded, scorer.get());
        ReportRow row;
        row.condition = "hull_" + topic.topic;
        row.mean_n_tokens = fl.mean_n_tokens;
        row.mean_max_word_repeat = fl.mean_max_word_repeat;
        if (fl.has_llh) {
            row.mean_lm_llh = fl.mean_lm_llh;
            row.mean_lm_llh_per_token = fl.mean_lm_llh_per_token;
        }
        report.rows.push_back(row);
    }

    // Topic clustering over sentence embeddings.
    if (!topics.empty()) {
        std::vector<Embedding> points;
        std::vector<int> labels;
        for (std::size_t t = 0; t < topics.size(); ++t) {
            for (const auto& text : topics[t].sentences) {
                points.push_back(
                    model.encode(encode_sentence(eval_ds.vocab, text, model.config().max_len)));
                labels.push_back(static_cast<int>(t));
            }
        }
        report.clustering = clustering_scores(points, labels);
    }

    // Reference statistics on the clean eval corpus (the dotted lines).
    {
        FluencyStats ref_stats = fluency_metrics(
            std::span<const Sentence>(eval_set.sentences.data(), eval_set.sentences.size()),
            scorer.get());
        char buf[32];
        auto fmt = [&](double v) {
            std::snprintf(buf, sizeof buf, "%.6g", v);
            return std::string(buf);
        };
        report.metadata.emplace_back("model_tag", cfg.model_tag);
        report.metadata.emplace_back("seed", std::to_string(cfg.seed));
        report.metadata.emplace_back("n_samples", std::to_string(cfg.n_samples));
        report.metadata.emplace_back("n_pairs", std::to_string(n_pairs));
        report.metadata.emplace_back("hull_samples", std::to_string(cfg.hull_samples));
        report.metadata.emplace_back("decode_top_p", fmt(cfg.decode_top_p));
        report.metadata.emplace_back("paraphrase_temperature", fmt(cfg.paraphrase_temperature));
        report.metadata.emplace_back("eval_sentences", std::to_string(n_embed));
        report.metadata.emplace_back("entropy_per_token_normalization", "per_sentence_then_mean");
        report.metadata.emplace_back("ref_mean_n_tokens", fmt(ref_stats.mean_n_tokens));
        report.metadata.emplace_back("ref_mean_max_word_repeat",
                                     fmt(ref_stats.mean_max_word_repeat));
        if (ref_stats.has_llh) {
            report.metadata.emplace_back("ref_mean_lm_llh", fmt(ref_stats.mean_lm_llh));
            report.metadata.emplace_back("ref_mean_lm_llh_per_token",
                                         fmt(ref_stats.mean_lm_llh_per_token));
        }
    }
    return report;
}

}  // namespace v2t
