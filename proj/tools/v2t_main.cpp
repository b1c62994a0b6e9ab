#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "v2t/commands.hpp"
#include "v2t/errors.hpp"

namespace {

std::vector<double> parse_real_list(const std::string& csv) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= csv.size()) {
        std::size_t comma = csv.find(',', start);
        std::string item = csv.substr(start, comma == std::string::npos ? comma : comma - start);
        if (!item.empty()) out.push_back(std::stod(item));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw v2t::ConfigError("expected a comma-separated list of reals");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale laboratory for vector-to-text sentence autoencoders"};
    app.require_subcommand(1);
    app.set_config("--config", "", "key=value config file; command-line flags win");

    v2t::PrepareOptions prepare;
    auto* cmd_prepare = app.add_subcommand("prepare", "build corpus, vocab and topic files");
    cmd_prepare->add_option("--source", prepare.source_path,
                            "plain-text corpus file; omit for the synthetic grammar");
    cmd_prepare->add_option("--seed", prepare.seed, "global seed")->required();
    cmd_prepare->add_option("--n", prepare.n_sentences, "synthetic corpus size");
    cmd_prepare->add_option("--vocab-size", prepare.vocab_max, "vocabulary cap");
    cmd_prepare->add_option("--min-freq", prepare.vocab_min_freq, "vocabulary frequency floor");
    cmd_prepare->add_option("--max-len", prepare.max_len, "token length cap per sentence");
    cmd_prepare->add_option("--eval-fraction", prepare.eval_fraction, "held-out split fraction");
    cmd_prepare->add_option("--topic-sentences", prepare.topic_sentences,
                            "sentences per topic in topics.txt");
    cmd_prepare->add_option("--out", prepare.out_dir, "output directory")->required();

    v2t::AugmentOptions augment;
    std::vector<std::string> mode_names;
    auto* cmd_augment = app.add_subcommand("augment", "build training pair files");
    cmd_augment->add_option("--data", augment.data_dir, "directory produced by prepare")
        ->required();
    cmd_augment
        ->add_option("--mode", mode_names, "identity|denoise|rtt|rtt_denoise (repeatable)")
        ->required();
    cmd_augment->add_option("--dropout-p", augment.dropout_p, "word dropout probability");
    cmd_augment->add_option("--temperature", augment.temperature,
                            "synthetic paraphrase temperature");
    cmd_augment->add_option("--seed", augment.seed, "global seed")->required();
    cmd_augment->add_option("--max-len", augment.max_len, "token length cap per sentence");
    cmd_augment->add_option("--mt-endpoint", augment.mt_endpoint,
                            "translation service URL; omit to use the synthetic paraphraser");
    cmd_augment->add_option("--mt-decode", augment.mt_decode, "nucleus:<p> or beam:<width>");
    cmd_augment->add_option("--mt-cache", augment.mt_cache, "translation cache directory");
    cmd_augment->add_option("--out", augment.out_dir, "output directory")->required();

    v2t::TrainOptions train;
    std::string train_mode = "identity";
    std::string resume_path;
    auto* cmd_train = app.add_subcommand("train", "train an autoencoder on a pair file");
    cmd_train->add_option("--pairs", train.pair_file, "pair TSV from augment")->required();
    cmd_train->add_option("--vocab", train.vocab_file, "vocab file from prepare")->required();
    cmd_train->add_option("--steps", train.train.total_steps, "total optimizer steps")
        ->required();
    cmd_train->add_option("--seed", train.train.seed, "global seed")->required();
    cmd_train->add_option("--bottleneck", train.model.bottleneck_dim,
                          "bottleneck width (0 disables it)");
    cmd_train->add_option("--d-model", train.model.d_model, "model width");
    cmd_train->add_option("--layers", train.model.n_layers, "encoder/decoder layers");
    cmd_train->add_option("--heads", train.model.n_heads, "attention heads");
    cmd_train->add_option("--d-ff", train.model.d_ff, "feed-forward width");
    cmd_train->add_option("--max-len", train.model.max_len, "token length cap");
    cmd_train->add_option("--dropout", train.model.dropout_rate, "residual dropout rate");
    cmd_train->add_option("--lr", train.train.lr, "learning rate");
    cmd_train->add_option("--batch", train.train.batch_size, "batch size");
    cmd_train->add_option("--warmup", train.train.warmup_steps, "linear warmup steps");
    cmd_train->add_option("--clip", train.train.clip_norm, "gradient norm clip (0 disables)");
    cmd_train->add_option("--threads", train.train.n_threads, "batch-parallel worker threads");
    cmd_train->add_option("--checkpoint-every", train.checkpoint_every,
                          "steps between rolling checkpoints");
    cmd_train->add_option("--resume", resume_path, "checkpoint to continue from");
    cmd_train->add_option("--mode", train_mode, "pair mode tag for bookkeeping");
    cmd_train->add_option("--out", train.out_dir, "output directory")->required();

    v2t::EvalOptions evaluate;
    std::string alphas_csv, etas_csv, scorer_path, topics_path;
    int expect_bottleneck = -1;
    auto* cmd_eval = app.add_subcommand("eval", "run the property measurement suite");
    cmd_eval->add_option("--checkpoint", evaluate.checkpoint, "model checkpoint")->required();
    cmd_eval->add_option("--scorer", scorer_path, "fluency scorer checkpoint");
    cmd_eval->add_option("--data", evaluate.data_dir, "directory produced by prepare")
        ->required();
    cmd_eval->add_option("--topics", topics_path, "topic file (default: <data>/topics.txt)");
    cmd_eval->add_option("--bottleneck", expect_bottleneck,
                         "expected bottleneck width; mismatch fails");
    cmd_eval->add_option("--alphas", alphas_csv, "comma-separated interpolation weights");
    cmd_eval->add_option("--etas", etas_csv, "comma-separated noise levels");
    cmd_eval->add_option("--samples", evaluate.n_samples, "decodes per condition");
    cmd_eval->add_option("--anchor-pairs", evaluate.n_pairs, "anchor pairs per condition");
    cmd_eval->add_option("--hull-samples", evaluate.hull_samples, "decodes per topic hull");
    cmd_eval->add_option("--top-p", evaluate.decode_top_p, "nucleus p for presentation decodes");
    cmd_eval->add_option("--temperature", evaluate.paraphrase_temperature,
                         "paraphrase temperature for the rtt accuracy row");
    cmd_eval->add_option("--seed", evaluate.seed, "global seed")->required();
    cmd_eval->add_option("--tag", evaluate.model_tag, "model tag recorded in metadata");
    cmd_eval->add_flag("--plots", evaluate.plots, "emit SVG charts");
    cmd_eval->add_option("--out", evaluate.out_dir, "output directory")->required();

    v2t::ReportOptions report;
    auto* cmd_report = app.add_subcommand("report", "merge eval runs into one comparison CSV");
    cmd_report->add_option("--out", report.out_file, "comparison CSV path")->required();
    cmd_report->add_option("runs", report.run_dirs, "eval output directories")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_prepare->parsed()) {
            v2t::cmd_prepare(prepare);
        } else if (cmd_augment->parsed()) {
            for (const auto& name : mode_names) {
                augment.modes.push_back(v2t::pair_mode_from_name(name));
            }
            v2t::cmd_augment(augment);
        } else if (cmd_train->parsed()) {
            train.mode = v2t::pair_mode_from_name(train_mode);
            if (!resume_path.empty()) train.resume = resume_path;
            v2t::cmd_train(train);
        } else if (cmd_eval->parsed()) {
            if (!alphas_csv.empty()) evaluate.alphas = parse_real_list(alphas_csv);
            if (!etas_csv.empty()) evaluate.etas = parse_real_list(etas_csv);
            if (!scorer_path.empty()) evaluate.scorer_checkpoint = scorer_path;
            if (!topics_path.empty()) evaluate.topics_file = topics_path;
            if (expect_bottleneck >= 0) evaluate.expect_bottleneck = expect_bottleneck;
            v2t::cmd_eval(evaluate);
        } else if (cmd_report->parsed()) {
            v2t::cmd_report(report);
        }
    } catch (const v2t::SchemaError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return v2t::kExitSchemaMismatch;
    } catch (const v2t::FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return v2t::kExitArtifactMismatch;
    } catch (const v2t::TrainingError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return v2t::kExitTrainingDiverged;
    } catch (const v2t::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return v2t::kExitInputError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return v2t::kExitInputError;
    }
    return v2t::kExitOk;
}
