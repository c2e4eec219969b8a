// Copyright 2026 The MedRG Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <unordered_set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "medrg/config_file.hpp"
#include "medrg/errors.hpp"
#include "medrg/evaluation.hpp"
#include "medrg/model.hpp"
#include "medrg/overlay.hpp"
#include "medrg/synth_data.hpp"
#include "medrg/trainer.hpp"

namespace medrg::cli {

namespace fs = std::filesystem;

namespace {

/// Flag combinations that parse but make no sense; maps to the usage exit code.
class UsageError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct GlobalOptions {
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string config_path;
};

struct GenDataOptions {
    std::string out;
    int patients = 16;
    int per_patient = 1;
    int size = 224;
    int min_distractors = 1;
    int max_distractors = 4;
};

struct TrainOptions {
    std::string data;
    std::string out;
    std::optional<int> steps;
    std::optional<double> lr;
    std::optional<int> warmup;
    std::optional<int> eval_every;
    std::optional<int> threads;
    bool quiet = false;
};

struct EvalOptions {
    std::string checkpoint;
    std::string data;
    std::string predictions;
    std::string split = "test";
    std::string split_file;
    std::string out;
};

struct PredictOptions {
    std::string checkpoint;
    std::string data;
    std::string split = "all";
    std::string split_file;
    std::string out;
};

struct OverlayOptions {
    std::string data;
    std::string predictions;
    std::string out;
};

const std::vector<std::string> kSplitNames{"all", "train", "validation", "test"};

nlohmann::json split_to_json(const DatasetSplit &split, std::uint64_t seed) {
    const auto ids = [](const std::vector<GroundingSample> &v) {
        std::vector<std::string> out;
        for (const auto &s : v) {
            out.push_back(s.id);
        }
        return out;
    };
    return {{"seed", seed}, {"train", ids(split.train)}, {"validation", ids(split.validation)},
            {"test", ids(split.test)}};
}

std::vector<GroundingSample> select_split(const std::vector<GroundingSample> &samples, const std::string &split,
                                          const std::string &split_file) {
    if (split == "all") {
        return samples;
    }
    if (split_file.empty()) {
        throw UsageError("--split " + split + " needs --split-file (written by 'train')");
    }
    std::ifstream in(split_file);
    if (!in) {
        throw IoError(split_file, "cannot open split file");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(split_file, 1, e.what());
    }
    if (!j.contains(split) || !j[split].is_array()) {
        throw ParseError(split_file, 1, "missing id list '" + split + "'");
    }
    std::unordered_set<std::string> wanted;
    for (const auto &id : j[split]) {
        wanted.insert(id.get<std::string>());
    }
    std::vector<GroundingSample> out;
    for (const auto &s : samples) {
        if (wanted.count(s.id) != 0) {
            out.push_back(s);
        }
    }
    if (out.size() != wanted.size()) {
        throw InvalidArgument("split file names ids that are not in the dataset");
    }
    return out;
}

std::string default_split_file(const std::string &checkpoint) {
    if (checkpoint.empty()) {
        return {};
    }
    const fs::path candidate = fs::path(checkpoint).parent_path() / "split.json";
    return fs::exists(candidate) ? candidate.string() : std::string{};
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path);
    if (!out || !(out << text)) {
        throw IoError(path.string(), "write failure");
    }
}

int gen_data(const GlobalOptions &g, const GenDataOptions &o, std::ostream &out) {
    CorpusConfig config;
    config.n_patients = o.patients;
    config.samples_per_patient = o.per_patient;
    config.width = o.size;
    config.height = o.size;
    config.seed = g.seed;
    config.min_distractors = o.min_distractors;
    config.max_distractors = o.max_distractors;
    try {
        config.validate();
    } catch (const InvalidArgument &e) {
        throw UsageError(e.what());
    }
    const Corpus corpus = build_corpus(config);
    std::error_code ec;
    fs::create_directories(fs::path(o.out) / "images", ec);
    if (ec) {
        throw IoError(o.out, ec.message());
    }
    for (std::size_t i = 0; i < corpus.samples.size(); ++i) {
        write_pgm(render_sample(config, i, corpus.specs[i]), fs::path(o.out) / corpus.samples[i].image_path);
    }
    save_dataset(corpus.samples, fs::path(o.out) / "dataset.jsonl");

    out << "samples: " << corpus.samples.size() << "\n";
    out << "patients: " << o.patients << "\n";
    out << "classes:\n";
    const auto histogram = class_histogram(corpus.specs);
    for (std::size_t k = 0; k < kAllFindings.size(); ++k) {
        out << "  " << finding_label(kAllFindings[k]) << ": " << histogram[k] << "\n";
    }
    out << "dataset: " << (fs::path(o.out) / "dataset.jsonl").string() << "\n";
    return kExitOk;
}

int train(const GlobalOptions &g, const TrainOptions &o, std::ostream &out) {
    RunConfig config;
    if (!g.config_path.empty()) {
        try {
            apply_config_file(g.config_path, config);
        } catch (const ParseError &e) {
            throw UsageError(e.what());
        }
    }
    if (g.seed_given) {
        config.train.seed = g.seed;
    }
    if (o.steps) {
        config.train.total_steps = *o.steps;
        config.train.warmup_steps = std::min(config.train.warmup_steps, *o.steps);
    }
    if (o.lr) {
        config.train.learning_rate = *o.lr;
    }
    if (o.warmup) {
        config.train.warmup_steps = *o.warmup;
    }
    if (o.eval_every) {
        config.train.eval_every = *o.eval_every;
    }
    if (o.threads) {
        config.train.threads = *o.threads;
    }
    try {
        config.train.validate();
    } catch (const InvalidArgument &e) {
        throw UsageError(e.what());
    }

    const fs::path data_path = o.data;
    const std::vector<GroundingSample> samples = load_dataset(data_path);
    if (samples.empty()) {
        throw InvalidArgument("dataset is empty");
    }
    for (const auto &s : samples) {
        if (s.width != samples.front().width || s.height != samples.front().height) {
            throw InvalidArgument("all images must share one size; sample '" + s.id + "' differs");
        }
    }
    config.model.vision.image_width = samples.front().width;
    config.model.vision.image_height = samples.front().height;
    config.model.link();
    try {
        config.model.validate();
    } catch (const InvalidArgument &e) {
        throw UsageError(e.what());
    }

    const DatasetSplit split = split_by_patient(samples, SplitRatios{}, config.train.seed);
    std::vector<std::string> corpus;
    for (const auto &s : split.train) {
        corpus.push_back(s.report);
        corpus.push_back(s.phrase);
    }
    MedRGModel model(config.model, Vocabulary::build(corpus, true), config.train.seed);

    const fs::path out_dir = o.out;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        throw IoError(out_dir.string(), ec.message());
    }
    write_text(out_dir / "split.json", split_to_json(split, config.train.seed).dump(2) + "\n");
    write_text(out_dir / "config.txt", format_config(config));

    const std::vector<PreparedSample> train_set = prepare_samples(model, split.train, data_path);
    const std::vector<PreparedSample> val_set = prepare_samples(model, split.validation, data_path);
    out << "split: train " << split.train.size() << ", validation " << split.validation.size() << ", test "
        << split.test.size() << " samples\n";

    FitOptions options;
    options.best_checkpoint = out_dir / "best.ckpt";
    options.log_path = out_dir / "train_log.jsonl";
    const int report_every = std::max(1, config.train.eval_every);
    if (!o.quiet) {
        options.on_step = [&out, report_every, total = config.train.total_steps](const StepLosses &l) {
            if (l.step % report_every == 0 || l.step == total) {
                char line[160];
                std::snprintf(line, sizeof line, "step %4ld  L_all %.4f  L_p %.4f  L_l1 %.4f  L_giou %.4f  lr %.3g\n",
                              l.step, l.total, l.phrase, l.l1, l.giou, l.lr);
                out << line << std::flush;
            }
        };
    }
    const auto start = std::chrono::steady_clock::now();
    const FitResult result = fit(model, train_set, val_set, config.train, options);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    save_checkpoint(model, out_dir / "final.ckpt");

    char summary[256];
    std::snprintf(summary, sizeof summary,
                  "steps: %ld\nbest validation mIoU: %.4f (step %ld)\ncheckpoint: %s\nwall time: %.1f s\n",
                  result.state.step, result.state.best_val_miou, result.state.best_step,
                  (out_dir / "best.ckpt").string().c_str(), seconds);
    out << summary;
    return kExitOk;
}

int eval(const GlobalOptions &, const EvalOptions &o, std::ostream &out) {
    if (o.predictions.empty() && o.checkpoint.empty()) {
        throw UsageError("eval needs --checkpoint or --predictions");
    }
    const std::vector<GroundingSample> all = load_dataset(o.data);
    const std::string split_file = o.split_file.empty() ? default_split_file(o.checkpoint) : o.split_file;
    const std::vector<GroundingSample> samples = select_split(all, o.split, split_file);

    std::vector<Prediction> predictions;
    if (!o.predictions.empty()) {
        predictions = load_predictions(o.predictions);
    } else {
        const MedRGModel model = load_checkpoint(o.checkpoint);
        predictions = predict(model, prepare_samples(model, samples, o.data));
    }
    const MetricsReport report = evaluate(predictions, samples);
    out << format_table(report);
    if (!o.out.empty()) {
        save_report(report, o.out);
    } else {
        out << to_json(report).dump() << "\n";
    }
    return kExitOk;
}

int predict_cmd(const GlobalOptions &, const PredictOptions &o, std::ostream &out) {
    const std::vector<GroundingSample> all = load_dataset(o.data);
    const std::string split_file = o.split_file.empty() ? default_split_file(o.checkpoint) : o.split_file;
    const std::vector<GroundingSample> samples = select_split(all, o.split, split_file);
    const MedRGModel model = load_checkpoint(o.checkpoint);
    const std::vector<Prediction> predictions = predict(model, prepare_samples(model, samples, o.data));
    save_predictions(predictions, o.out);
    std::size_t with_box = 0;
    for (const auto &p : predictions) {
        with_box += p.box_valid() ? 1 : 0;
    }
    out << "predictions: " << predictions.size() << " (" << with_box << " with a box)\n";
    return kExitOk;
}

int overlay(const GlobalOptions &, const OverlayOptions &o, std::ostream &out, std::ostream &err) {
    const std::vector<GroundingSample> samples = load_dataset(o.data);
    const std::vector<Prediction> predictions = load_predictions(o.predictions);
    const OverlayResult result = write_overlays(samples, o.data, predictions, o.out);
    for (const auto &id : result.skipped) {
        err << "warning: no prediction for sample '" << id << "', skipped\n";
    }
    out << "overlays: " << result.written << " written, " << result.skipped.size() << " skipped\n";
    if (result.written == 0) {
        err << "error: no sample had a prediction\n";
        return kExitFailure;
    }
    return kExitOk;
}

} // namespace

int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Report grounding: synthetic data, training, evaluation and overlays", "medrg"};
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--seed", global.seed, "Random seed")->default_val(0);
    app.add_option("--config", global.config_path, "key = value config file")->check(CLI::ExistingFile);

    GenDataOptions gen;
    auto *gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic image/report corpus");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--patients", gen.patients, "Number of patients")->capture_default_str();
    gen_cmd->add_option("--per-patient", gen.per_patient, "Samples per patient")->capture_default_str();
    gen_cmd->add_option("--size", gen.size, "Square image side in pixels")->capture_default_str();
    gen_cmd->add_option("--min-distractors", gen.min_distractors)->capture_default_str();
    gen_cmd->add_option("--max-distractors", gen.max_distractors)->capture_default_str();

    TrainOptions tr;
    auto *train_cmd = app.add_subcommand("train", "Train on a 7:1:2 patient split of a dataset");
    train_cmd->add_option("--data", tr.data, "dataset.jsonl")->required()->check(CLI::ExistingFile);
    train_cmd->add_option("--out", tr.out, "Output directory for checkpoints and log")->required();
    train_cmd->add_option("--steps", tr.steps, "Optimizer steps (overrides total_steps)")
        ->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--lr", tr.lr, "Peak learning rate")->check(CLI::PositiveNumber);
    train_cmd->add_option("--warmup", tr.warmup, "Warmup steps")->check(CLI::NonNegativeNumber);
    train_cmd->add_option("--eval-every", tr.eval_every, "Validation interval")->check(CLI::PositiveNumber);
    train_cmd->add_option("--threads", tr.threads, "Worker threads")->check(CLI::PositiveNumber);
    train_cmd->add_flag("--quiet", tr.quiet, "Only print the summary");

    EvalOptions ev;
    auto *eval_cmd = app.add_subcommand("eval", "Score a checkpoint or a predictions file");
    eval_cmd->add_option("--data", ev.data, "dataset.jsonl")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--checkpoint", ev.checkpoint)->check(CLI::ExistingFile);
    eval_cmd->add_option("--predictions", ev.predictions)->check(CLI::ExistingFile);
    eval_cmd->add_option("--split", ev.split)->check(CLI::IsMember(kSplitNames))->capture_default_str();
    eval_cmd->add_option("--split-file", ev.split_file, "split.json written by train")->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", ev.out, "Write the metrics JSON here");

    PredictOptions pr;
    auto *predict_sub = app.add_subcommand("predict", "Write predictions for a dataset");
    predict_sub->add_option("--checkpoint", pr.checkpoint)->required()->check(CLI::ExistingFile);
    predict_sub->add_option("--data", pr.data, "dataset.jsonl")->required()->check(CLI::ExistingFile);
    predict_sub->add_option("--split", pr.split)->check(CLI::IsMember(kSplitNames))->capture_default_str();
    predict_sub->add_option("--split-file", pr.split_file)->check(CLI::ExistingFile);
    predict_sub->add_option("--out", pr.out, "predictions.jsonl")->required();

    OverlayOptions ov;
    auto *overlay_cmd = app.add_subcommand("overlay", "Draw ground-truth and predicted boxes");
    overlay_cmd->add_option("--data", ov.data, "dataset.jsonl")->required()->check(CLI::ExistingFile);
    overlay_cmd->add_option("--predictions", ov.predictions)->required()->check(CLI::ExistingFile);
    overlay_cmd->add_option("--out", ov.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp &e) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    global.seed_given = app.count("--seed") > 0;

    try {
        if (gen_cmd->parsed()) {
            return gen_data(global, gen, out);
        }
        if (train_cmd->parsed()) {
            return train(global, tr, out);
        }
        if (eval_cmd->parsed()) {
            return eval(global, ev, out);
        }
        if (predict_sub->parsed()) {
            return predict_cmd(global, pr, out);
        }
        return overlay(global, ov, out, err);
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
}

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    std::vector<const char *> argv{"medrg"};
    for (const auto &a : args) {
        argv.push_back(a.c_str());
    }
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

} // namespace medrg::cli
