#include <CLI11.hpp>

#include <iostream>

#include "gateprune/config.hpp"
#include "gateprune/harness.hpp"

using namespace gateprune;

int main(int argc, char** argv) {
    CLI::App app{"channel pruning with exponential gates and a bounded sparsity norm"};
    app.require_subcommand(1);

    // train
    std::string preset, config_path, out_dir = "runs/run", data_dir;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int epochs = -2, limit_train = -1, limit_test = -1;
    double threshold = -2.0;
    bool verbose = false;

    CLI::App* train = app.add_subcommand("train", "train a gated network and write a checkpoint");
    train->add_option("--preset", preset, "hyperparameter preset: l2, l1, bounded_l1, bounded_l1_3e3");
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--set", sets, "extra key=value overrides")->take_all();
    train->add_option("--seed", seed, "RNG seed")->each([&](const std::string&) { seed_given = true; });
    train->add_option("--epochs", epochs, "override epoch count");
    train->add_option("--out", out_dir, "output directory");
    train->add_option("--data", data_dir, "dataset root (default $GATEPRUNE_DATA_DIR)");
    train->add_option("--limit-train", limit_train, "use only the first N training samples");
    train->add_option("--limit-test", limit_test, "use only the first N test samples");
    train->add_flag("--verbose", verbose, "per-epoch progress on stderr");

    // eval
    std::string ckpt;
    CLI::App* eval_cmd = app.add_subcommand("eval", "report test error of a checkpoint");
    eval_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
    eval_cmd->add_option("--data", data_dir, "dataset root");
    eval_cmd->add_option("--limit-test", limit_test, "use only the first N test samples");

    // prune
    CLI::App* prune_cmd = app.add_subcommand("prune", "threshold gates, compact and merge");
    prune_cmd->add_option("--ckpt", ckpt, "trained checkpoint")->required();
    prune_cmd->add_option("--threshold", threshold, "gate threshold (default 0 exp / 1e-4 linear)");
    prune_cmd->add_option("--out", out_dir, "output directory")->required();
    prune_cmd->add_option("--data", data_dir, "dataset root (enables pruned-error measurement)");
    prune_cmd->add_option("--limit-test", limit_test, "use only the first N test samples");

    // finetune
    int ft_epochs = 3;
    double ft_lr = 0.01;
    CLI::App* ft_cmd = app.add_subcommand("finetune", "penalty-free recovery training (max 3 epochs)");
    ft_cmd->add_option("--ckpt", ckpt, "pruned checkpoint")->required();
    ft_cmd->add_option("--epochs", ft_epochs, "epochs, at most 3");
    ft_cmd->add_option("--lr", ft_lr, "fine-tune learning rate");
    ft_cmd->add_option("--out", out_dir, "output directory")->required();
    ft_cmd->add_option("--data", data_dir, "dataset root");
    ft_cmd->add_option("--seed", seed, "RNG seed");
    ft_cmd->add_option("--limit-train", limit_train, "use only the first N training samples");
    ft_cmd->add_option("--limit-test", limit_test, "use only the first N test samples");

    // sweep
    std::vector<double> thresholds;
    std::string sweep_out = "sweep.csv";
    int sweep_ft = 0;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "prune at several thresholds, emit CSV");
    sweep_cmd->add_option("--ckpt", ckpt, "trained checkpoint")->required();
    sweep_cmd->add_option("--thresholds", thresholds, "threshold list")->delimiter(',');
    sweep_cmd->add_option("--finetune-epochs", sweep_ft, "fine-tune epochs per row (<= 3)");
    sweep_cmd->add_option("--out", sweep_out, "output CSV path");
    sweep_cmd->add_option("--data", data_dir, "dataset root");
    sweep_cmd->add_option("--limit-train", limit_train, "use only the first N training samples");
    sweep_cmd->add_option("--limit-test", limit_test, "use only the first N test samples");

    // report
    std::string runs_dir, report_out = "report";
    CLI::App* report_cmd = app.add_subcommand("report", "consolidate run summaries into md + csv");
    report_cmd->add_option("--runs", runs_dir, "directory of run directories")->required();
    report_cmd->add_option("--out", report_out, "output base path (writes .md and .csv)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            RunConfig cfg;
            if (!preset.empty()) cfg = preset_config(preset);
            if (!config_path.empty()) apply_config_file(cfg, config_path);
            for (const std::string& kv : sets) {
                std::size_t eq = kv.find('=');
                if (eq == std::string::npos) {
                    std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
                    return 2;
                }
                apply_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
            }
            if (seed_given) cfg.seed = seed;
            if (epochs != -2) cfg.epochs = epochs;
            if (threshold != -2.0) cfg.threshold = threshold;
            if (limit_train != -1) cfg.limit_train = limit_train;
            if (limit_test != -1) cfg.limit_test = limit_test;
            if (!data_dir.empty()) cfg.data_dir = data_dir;
            cfg.out_dir = out_dir;
            cfg.verbose = cfg.verbose || verbose;
            return cmd_train(cfg);
        }
        if (eval_cmd->parsed()) return cmd_eval(ckpt, data_dir, limit_test == -1 ? 0 : limit_test);
        if (prune_cmd->parsed())
            return cmd_prune(ckpt, threshold == -2.0 ? -1.0 : threshold, out_dir, data_dir,
                             limit_test == -1 ? 0 : limit_test);
        if (ft_cmd->parsed())
            return cmd_finetune(ckpt, ft_epochs, ft_lr, out_dir, data_dir, seed,
                                limit_train == -1 ? 0 : limit_train, limit_test == -1 ? 0 : limit_test);
        if (sweep_cmd->parsed())
            return cmd_sweep(ckpt, thresholds, sweep_ft, sweep_out, data_dir,
                             limit_train == -1 ? 0 : limit_train, limit_test == -1 ? 0 : limit_test);
        if (report_cmd->parsed()) return cmd_report(runs_dir, report_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
