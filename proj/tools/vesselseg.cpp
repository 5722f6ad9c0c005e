// vesselseg command-line front end.
//
//   vesselseg [--config FILE] [--set key=value]... [--jobs N] [--seed S] [--out DIR] <command> ...
//
// Exit status: 0 ok, 2 config/layout error, 3 numeric failure, 4 I/O or format error.
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vesselseg/app.hpp"

namespace {

int exit_code(const vesselseg::Error& e) {
    switch (e.category()) {
    case vesselseg::ErrorCategory::usage: return 2;
    case vesselseg::ErrorCategory::numeric: return 3;
    case vesselseg::ErrorCategory::io: return 4;
    }
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Retinal vessel segmentation: Morlet features + GMM Bayes classifier"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<int> jobs;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    app.add_option("--config", config_path, "Config file (key = value with [section] headers)")->check(CLI::ExistingFile);
    app.add_option("--set", overrides, "Override a config key, e.g. --set morlet.scales=2,3,4")->take_all();
    app.add_option("--jobs", jobs, "Images processed concurrently");
    app.add_option("--seed", seed, "Global seed (run.seed)");
    app.add_option("--out", out_dir, "Output directory for run-<timestamp>/ folders");

    auto* train = app.add_subcommand("train", "Fit the Bayes/GMM model on a training split");
    std::optional<std::string> train_root, train_model;
    train->add_option("--train-root", train_root, "DRIVE-layout training directory");
    train->add_option("--model", train_model, "Where to write model.json (default: inside the run directory)");

    auto* segment = app.add_subcommand("segment", "Segment one image");
    std::string seg_model, seg_image;
    std::optional<std::string> seg_fov;
    segment->add_option("--model", seg_model, "Trained model.json")->required();
    segment->add_option("--image", seg_image, "Input fundus image")->required();
    segment->add_option("--fov", seg_fov, "FOV mask (full frame if omitted)");

    auto* evaluate = app.add_subcommand("evaluate", "Segment and score a test split");
    std::string eval_model;
    std::optional<std::string> eval_root;
    evaluate->add_option("--model", eval_model, "Trained model.json")->required();
    evaluate->add_option("--test-root", eval_root, "DRIVE-layout test directory");

    auto* roc = app.add_subcommand("roc", "Re-derive the pooled ROC from saved posterior maps");
    std::string roc_pred;
    std::optional<std::string> roc_root;
    roc->add_option("--predictions", roc_pred, "Directory holding <id>_posterior.png files")->required();
    roc->add_option("--test-root", roc_root, "DRIVE-layout test directory");

    auto* synth = app.add_subcommand("synth", "Write a synthetic phantom dataset in DRIVE layout");
    std::string synth_dir;
    std::optional<int> synth_count, synth_first;
    synth->add_option("dir", synth_dir, "Output dataset directory")->required();
    synth->add_option("--count", synth_count, "Number of phantoms");
    synth->add_option("--first-id", synth_first, "Id of the first phantom");

    auto* show = app.add_subcommand("config", "Print the effective configuration");

    CLI11_PARSE(app, argc, argv);

    try {
        using namespace vesselseg;
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        for (const auto& o : overrides) apply_override(cfg, o);
        if (jobs) cfg.jobs = *jobs;
        if (seed) cfg.seed = *seed;
        if (out_dir) cfg.out_dir = *out_dir;
        if (train_root) cfg.train_root = *train_root;
        if (train_model) cfg.model_path = *train_model;
        if (eval_root) cfg.test_root = *eval_root;
        if (roc_root) cfg.test_root = *roc_root;
        if (synth_count) cfg.synth.count = *synth_count;
        if (synth_first) cfg.synth.first_id = *synth_first;
        validate(cfg);

        if (*show) {
            std::cout << to_config_text(cfg);
        } else if (*train) {
            const auto r = cmd_train(cfg);
            std::cout << "model: " << r.model_path.string() << "\nrun: " << r.run_dir.string() << "\n";
        } else if (*segment) {
            const auto r = cmd_segment(cfg, seg_model, seg_image,
                                       seg_fov ? std::optional<fs::path>(*seg_fov) : std::nullopt);
            std::cout << "run: " << r.run_dir.string() << "\n";
        } else if (*evaluate) {
            if (cfg.test_root.empty()) throw ConfigError("paths.test_root (or --test-root) is required");
            const auto r = cmd_evaluate(cfg, eval_model, cfg.test_root);
            std::cout << evaluation_summary(r.report, r.roc) << "run: " << r.run_dir.string() << "\n";
        } else if (*roc) {
            if (cfg.test_root.empty()) throw ConfigError("paths.test_root (or --test-root) is required");
            const auto r = cmd_roc(cfg, roc_pred, cfg.test_root);
            std::cout << "AUC: " << format_double(r.roc.auc) << "\nrun: " << r.run_dir.string() << "\n";
        } else if (*synth) {
            const auto files = cmd_synth(cfg, synth_dir);
            std::cout << "wrote " << files.size() << " files under " << synth_dir << "\n";
        }
    } catch (const vesselseg::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
