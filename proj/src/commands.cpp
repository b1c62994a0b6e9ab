#include "v2t/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "v2t/bleu.hpp"
#include "v2t/errors.hpp"
#include "v2t/eval.hpp"
#include "v2t/grammar.hpp"
#include "v2t/mt_client.hpp"
#include "v2t/report.hpp"
#include "v2t/svg.hpp"

namespace v2t {

namespace {

namespace fs = std::filesystem;

// Two commands must not share an output directory; the lock file enforces it.
class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) {
        fs::create_directories(dir);
        lock_path_ = dir / ".lock";
        fd_ = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd_ < 0) {
            throw ConfigError("output directory " + dir.string() +
                              " is locked by another command (.lock exists)");
        }
    }
    ~OutputLock() {
        if (fd_ >= 0) {
            ::close(fd_);
            ::unlink(lock_path_.c_str());
        }
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path lock_path_;
    int fd_ = -1;
};

// Outputs are written here and renamed into place on commit.
class Staging {
public:
    explicit Staging(fs::path out_dir) : out_(std::move(out_dir)), staging_(out_ / ".staging") {
        fs::remove_all(staging_);
        fs::create_directories(staging_);
    }
    ~Staging() {
        if (!committed_) fs::remove_all(staging_);
    }
    fs::path path(const std::string& name) const { return staging_ / name; }
    void commit() {
        for (const auto& entry : fs::directory_iterator(staging_)) {
            fs::rename(entry.path(), out_ / entry.path().filename());
        }
        fs::remove_all(staging_);
        committed_ = true;
    }

private:
    fs::path out_;
    fs::path staging_;
    bool committed_ = false;
};

void atomic_rename_into(const fs::path& tmp, const fs::path& final_path) {
    fs::rename(tmp, final_path);
}

std::vector<std::string> texts_of(const std::vector<LabeledText>& labeled) {
    std::vector<std::string> out;
    out.reserve(labeled.size());
    for (const auto& lt : labeled) out.push_back(lt.text);
    return out;
}

// Eval split: the unique texts whose hash falls in the smallest
// round(eval_fraction * unique) quantile. Duplicates follow their text, so
// the splits are disjoint by exact text match.
std::set<std::string> pick_eval_texts(const std::vector<std::string>& texts,
                                      double eval_fraction) {
    std::set<std::string> unique(texts.begin(), texts.end());
    std::vector<std::pair<std::uint64_t, const std::string*>> ranked;
    ranked.reserve(unique.size());
    for (const auto& t : unique) ranked.emplace_back(text_hash(t), &t);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return *a.second < *b.second;
    });
    auto n_eval = static_cast<std::size_t>(
        std::llround(eval_fraction * static_cast<double>(unique.size())));
    std::set<std::string> eval_texts;
    for (std::size_t i = 0; i < std::min(n_eval, ranked.size()); ++i) {
        eval_texts.insert(*ranked[i].second);
    }
    return eval_texts;
}

Model load_model_for_vocab(const fs::path& checkpoint, const Vocab& vocab) {
    Model model = Model::load_checkpoint(checkpoint);
    if (model.config().vocab_size != static_cast<int>(vocab.size())) {
        throw FormatError("checkpoint " + checkpoint.string() + " was trained with vocab size " +
                          std::to_string(model.config().vocab_size) + " but the vocab file has " +
                          std::to_string(vocab.size()) + " entries");
    }
    return model;
}

}  // namespace

void cmd_prepare(const PrepareOptions& opt) {
    if (opt.eval_fraction <= 0.0 || opt.eval_fraction >= 1.0) {
        throw ConfigError("eval fraction must be in (0,1)");
    }
    OutputLock lock(opt.out_dir);
    Staging staging(opt.out_dir);

    GrammarConfig grammar = GrammarConfig::default_grammar();
    std::vector<LabeledText> labeled;
    if (opt.source_path.empty()) {
        labeled = generate_synthetic_corpus(opt.seed, opt.n_sentences, grammar);
    } else {
        std::ifstream in(opt.source_path, std::ios::binary);
        if (!in) throw IoError("cannot open source corpus: " + opt.source_path);
        std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        for (auto& s : split_sentences(raw)) labeled.push_back({std::move(s), ""});
    }

    // Keep only sentences that fit max_len without truncation.
    std::erase_if(labeled, [&](const LabeledText& lt) {
        return whitespace_tokens(lt.text).size() > opt.max_len - 1;
    });
    if (labeled.empty()) throw DataError("no usable sentences in the corpus source");

    std::vector<std::string> texts = texts_of(labeled);
    Vocab vocab = build_vocab(texts, opt.vocab_max, opt.vocab_min_freq);
    std::set<std::string> eval_texts = pick_eval_texts(texts, opt.eval_fraction);

    std::vector<std::string> train_lines, eval_lines;
    for (const auto& t : texts) {
        (eval_texts.count(t) ? eval_lines : train_lines).push_back(t);
    }
    write_lines(staging.path("corpus_train.txt"), train_lines);
    write_lines(staging.path("corpus_eval.txt"), eval_lines);
    write_vocab_file(staging.path("vocab.txt"), vocab);

    if (opt.source_path.empty()) {
        // Topic blocks for the clustering/hull evaluation, drawn from the
        // eval split (training split as fallback).
        std::vector<TopicSet> topics;
        for (const auto& topic : grammar.topics) {
            TopicSet set;
            set.topic = topic.name;
            std::set<std::string> seen;
            for (bool from_eval : {true, false}) {
                for (const auto& lt : labeled) {
                    if (static_cast<int>(set.sentences.size()) >= opt.topic_sentences) break;
                    if (lt.topic != topic.name) continue;
                    if (eval_texts.count(lt.text) != from_eval) continue;
                    if (!seen.insert(lt.text).second) continue;
                    set.sentences.push_back(lt.text);
                }
            }
            if (set.sentences.size() >= 3) topics.push_back(std::move(set));
        }
        write_topic_file(staging.path("topics.txt"), topics);
    }
    staging.commit();
    std::fprintf(stderr, "prepare: %zu train / %zu eval sentences, vocab %zu\n",
                 train_lines.size(), eval_lines.size(), vocab.size());
}

void cmd_augment(const AugmentOptions& opt) {
    if (opt.modes.empty()) throw ConfigError("augment needs at least one --mode");
    OutputLock lock(opt.out_dir);
    Staging staging(opt.out_dir);

    SentenceDataset train = load_dataset(opt.data_dir / "corpus_train.txt",
                                         opt.data_dir / "vocab.txt", opt.max_len, "train");
    GrammarConfig grammar = GrammarConfig::default_grammar();
    PairParams params;
    params.dropout_p = opt.dropout_p;
    params.temperature = opt.temperature;

    for (PairMode mode : opt.modes) {
        const std::string name = pair_mode_name(mode);
        const bool wants_mt = mode == PairMode::rtt || mode == PairMode::rtt_denoise;
        if (wants_mt && !opt.mt_endpoint.empty()) {
            TranslationClientConfig cfg;
            cfg.forward_url = opt.mt_endpoint;
            cfg.backward_url = opt.mt_endpoint;
            cfg.cache_dir = opt.mt_cache.empty() ? opt.out_dir / "mt_cache" : opt.mt_cache;
            if (opt.mt_decode.rfind("beam:", 0) == 0) {
                cfg.decode_mode = MtDecodeMode::beam(std::stoi(opt.mt_decode.substr(5)));
            } else if (opt.mt_decode.rfind("nucleus:", 0) == 0) {
                cfg.decode_mode = MtDecodeMode::nucleus(std::stod(opt.mt_decode.substr(8)));
            } else {
                throw ConfigError("unknown --mt-decode '" + opt.mt_decode + "'");
            }
            TranslationClient client(cfg, [](const std::string& m) {
                std::fprintf(stderr, "mt: %s\n", m.c_str());
            });
            std::vector<std::string> texts;
            for (const auto& s : train.sentences) texts.push_back(s.text);
            auto records = rtt_corpus_via_mt(texts, client);
            write_record_tsv(staging.path("records_" + name + ".tsv"), records);

            PairDataset ds;
            ds.vocab = train.vocab;
            ds.mode = mode;
            ds.params = params;
            Rng base(opt.seed);
            for (std::size_t i = 0; i < records.size(); ++i) {
                Sentence input = encode_sentence(train.vocab, records[i].round_trip, opt.max_len);
                if (mode == PairMode::rtt_denoise) {
                    Rng rng = base.split(i);
                    input = word_dropout(input, params.dropout_p, rng);
                    input.text = decode_tokens(train.vocab, input.token_ids);
                }
                ds.pairs.push_back({std::move(input), train.sentences[i]});
            }
            write_pair_tsv(staging.path("pairs_" + name + ".tsv"), ds);
        } else {
            if (wants_mt) {
                std::fprintf(stderr,
                             "augment: --mt-endpoint not set, using the synthetic paraphraser "
                             "for mode %s\n",
                             name.c_str());
            }
            PairDataset ds = build_pair_dataset(train, mode, params, grammar, opt.seed);
            write_pair_tsv(staging.path("pairs_" + name + ".tsv"), ds);
        }
    }
    staging.commit();
}

void cmd_train(const TrainOptions& opt) {
    opt.train.validate();
    OutputLock lock(opt.out_dir);

    Vocab vocab = read_vocab_file(opt.vocab_file);
    ModelConfig model_config = opt.model;
    model_config.vocab_size = static_cast<int>(vocab.size());
    PairDataset pairs = load_pair_dataset(opt.pair_file, vocab,
                                          static_cast<std::size_t>(model_config.max_len),
                                          opt.mode, PairParams{});
    if (pairs.pairs.empty()) throw DataError("pair file is empty: " + opt.pair_file.string());

    Model model = [&]() {
        if (opt.resume) {
            Model m = load_model_for_vocab(*opt.resume, vocab);
            return m;
        }
        return Model(model_config, opt.train.seed);
    }();

    std::ofstream loss_csv(opt.out_dir / "loss.csv", std::ios::binary);
    if (!loss_csv) throw IoError("cannot open loss csv for writing");
    loss_csv << "step,loss\n";

    Rng shuffle_rng = Rng(opt.train.seed).split("batches");
    std::vector<std::size_t> order(pairs.pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // force an initial shuffle
    std::uint64_t epoch = 0;

    const fs::path latest = opt.out_dir / "ckpt_latest.v2tm";
    auto save_latest = [&]() {
        fs::path tmp = latest;
        tmp += ".tmp";
        model.save_checkpoint(tmp);
        atomic_rename_into(tmp, latest);
    };

    try {
        while (model.step() < opt.train.total_steps) {
            std::vector<SentencePair> batch;
            batch.reserve(static_cast<std::size_t>(opt.train.batch_size));
            for (int b = 0; b < opt.train.batch_size; ++b) {
                if (cursor >= order.size()) {
                    Rng r = shuffle_rng.split(epoch++);
                    for (std::size_t i = order.size(); i > 1; --i) {
                        std::swap(order[i - 1], order[r.uniform(i)]);
                    }
                    cursor = 0;
                }
                batch.push_back(pairs.pairs[order[cursor++]]);
            }
            double loss = model.train_step(batch, opt.train);
            loss_csv << model.step() << ',' << format_real(loss) << '\n';
            if (opt.checkpoint_every > 0 && model.step() % opt.checkpoint_every == 0) {
                loss_csv.flush();
                save_latest();
            }
        }
    } catch (const TrainingError&) {
        loss_csv.flush();
        throw;  // ckpt_latest.v2tm keeps the last good state
    }

    save_latest();
    fs::path tmp = opt.out_dir / "model.v2tm.tmp";
    model.save_checkpoint(tmp);
    atomic_rename_into(tmp, opt.out_dir / "model.v2tm");
    std::fprintf(stderr, "train: finished at step %ld\n", model.step());
}

void cmd_eval(const EvalOptions& opt) {
    OutputLock lock(opt.out_dir);
    Staging staging(opt.out_dir);

    Vocab vocab = read_vocab_file(opt.data_dir / "vocab.txt");
    Model model = load_model_for_vocab(opt.checkpoint, vocab);
    if (opt.expect_bottleneck && model.config().bottleneck_dim != *opt.expect_bottleneck) {
        throw FormatError("checkpoint bottleneck is " +
                          std::to_string(model.config().bottleneck_dim) + ", expected " +
                          std::to_string(*opt.expect_bottleneck));
    }
    std::optional<Model> scorer;
    if (opt.scorer_checkpoint) scorer.emplace(load_model_for_vocab(*opt.scorer_checkpoint, vocab));

    SentenceDataset eval_ds =
        load_dataset(opt.data_dir / "corpus_eval.txt", opt.data_dir / "vocab.txt",
                     static_cast<std::size_t>(model.config().max_len), "eval");

    std::vector<TopicSet> topics;
    fs::path topics_path = opt.topics_file ? *opt.topics_file : opt.data_dir / "topics.txt";
    if (fs::exists(topics_path)) topics = read_topic_file(topics_path);

    SuiteConfig cfg;
    cfg.interpolation.alphas = opt.alphas;
    cfg.interpolation.n_pairs = opt.n_pairs;
    cfg.etas = opt.etas;
    cfg.n_samples = opt.n_samples;
    cfg.hull_samples = opt.hull_samples;
    cfg.decode_top_p = opt.decode_top_p;
    cfg.paraphrase_temperature = opt.paraphrase_temperature;
    cfg.seed = opt.seed;
    cfg.model_tag = opt.model_tag;

    GrammarConfig grammar = GrammarConfig::default_grammar();
    PropertyReport report = run_property_suite(model, scorer ? &*scorer : nullptr, eval_ds,
                                               grammar, topics, cfg);

    write_report_csv(staging.path("report.csv"), report);
    if (report.clustering) write_clustering_csv(staging.path("clustering.csv"), *report.clustering);
    write_metadata_json(staging.path("meta.json"), report);

    if (opt.plots) {
        auto meta_value = [&](const std::string& key) -> std::optional<double> {
            for (const auto& [k, v] : report.metadata) {
                if (k == key) return std::stod(v);
            }
            return std::nullopt;
        };
        struct MetricSpec {
            const char* name;
            std::optional<double> (*get)(const ReportRow&);
            const char* ref_key;
        };
        static const MetricSpec metrics[] = {
            {"entropy", [](const ReportRow& r) { return r.entropy; }, nullptr},
            {"entropy_per_token", [](const ReportRow& r) { return r.entropy_per_token; }, nullptr},
            {"mean_n_tokens", [](const ReportRow& r) { return r.mean_n_tokens; },
             "ref_mean_n_tokens"},
            {"mean_max_word_repeat", [](const ReportRow& r) { return r.mean_max_word_repeat; },
             "ref_mean_max_word_repeat"},
            {"mean_lm_llh", [](const ReportRow& r) { return r.mean_lm_llh; }, "ref_mean_lm_llh"},
            {"mean_lm_llh_per_token",
             [](const ReportRow& r) { return r.mean_lm_llh_per_token; },
             "ref_mean_lm_llh_per_token"},
            {"jeffreys", [](const ReportRow& r) { return r.jeffreys; }, nullptr},
        };
        for (const char* space : {"interp", "noise"}) {
            for (const auto& metric : metrics) {
                LineSeries series;
                series.label = opt.model_tag;
                for (const auto& row : report.rows) {
                    if (row.condition != space || !row.param) continue;
                    auto v = metric.get(row);
                    if (v) series.points.emplace_back(*row.param, *v);
                }
                if (series.points.empty()) continue;
                LinePlot plot;
                plot.title = std::string(metric.name) + " vs " +
                             (std::string(space) == "interp" ? "alpha" : "eta");
                plot.x_label = std::string(space) == "interp" ? "alpha" : "eta";
                plot.y_label = metric.name;
                plot.series.push_back(std::move(series));
                if (metric.ref_key != nullptr) {
                    if (auto ref = meta_value(metric.ref_key)) {
                        plot.references.push_back({"eval corpus", *ref});
                    }
                }
                write_svg(staging.path(std::string(space) + "_" + metric.name + ".svg"), plot);
            }
        }
    }
    staging.commit();
}

void cmd_report(const ReportOptions& opt) {
    if (opt.run_dirs.empty()) throw ConfigError("report needs at least one run directory");
    std::vector<LoadedRun> runs;
    runs.reserve(opt.run_dirs.size());
    for (const auto& dir : opt.run_dirs) runs.push_back(load_run(dir));
    write_comparison_csv(opt.out_file, runs);
}

}  // namespace v2t
