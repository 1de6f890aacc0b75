#include "gateprune/harness.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "gateprune/checkpoint.hpp"
#include "gateprune/mnist.hpp"
#include "gateprune/network.hpp"
#include "gateprune/prune.hpp"
#include "gateprune/trainer.hpp"

namespace gateprune {

namespace {

using nlohmann::json;

std::pair<Dataset, Dataset> load_data(const std::string& data_dir, int limit_train, int limit_test) {
    std::filesystem::path dir = data_dir;
    if (dir.empty()) {
        RunConfig probe;
        dir = probe.resolved_data_dir();
    }
    auto [train, test] = load_mnist(dir);
    return {dataset_head(train, limit_train), dataset_head(test, limit_test)};
}

NetworkGraph build_model(const RunConfig& cfg) {
    if (cfg.model == "lenet5_caffe") {
        std::optional<GateKind> kind;
        if (cfg.gate_kind == "exponential") kind = GateKind::Exponential;
        else if (cfg.gate_kind == "linear") kind = GateKind::Linear;
        return build_lenet5_caffe(kind, cfg.seed);
    }
    if (cfg.model == "bn_testnet") {
        if (cfg.gate_kind == "none") throw ConfigError("bn_testnet requires a gate kind");
        return build_bn_testnet(cfg.gate_kind == "linear" ? GateKind::Linear : GateKind::Exponential,
                                cfg.seed);
    }
    throw ConfigError("unknown model '" + cfg.model + "' (try lenet5_caffe or bn_testnet)");
}

void update_run_summary(const std::filesystem::path& run_dir, const json& patch) {
    std::filesystem::path p = run_dir / "run_summary.json";
    json j = json::object();
    if (std::filesystem::exists(p)) {
        std::ifstream f(p);
        try {
            f >> j;
        } catch (const json::exception&) {
            j = json::object();
        }
    }
    for (auto it = patch.begin(); it != patch.end(); ++it) j[it.key()] = it.value();
    std::ofstream f(p, std::ios::trunc);
    f << j.dump(2) << "\n";
}

std::string reg_kind_string(const RegularizerSpec& reg) {
    switch (reg.kind) {
        case RegKind::L2: return "l2";
        case RegKind::L1: return "l1";
        default: return "bounded_l1";
    }
}

}  // namespace

int cmd_train(const RunConfig& cfg) {
    try {
        auto [train_data, test_data] = load_data(cfg.data_dir, cfg.limit_train, cfg.limit_test);
        NetworkGraph net = build_model(cfg);

        TrainOptions topt;
        topt.epochs = cfg.resolved_epochs();
        topt.batch_size = cfg.batch_size;
        topt.lr = cfg.lr;
        topt.momentum = cfg.momentum;
        topt.lr_milestones = cfg.lr_milestones;
        topt.lr_gamma = cfg.lr_gamma;
        topt.reg = cfg.reg;
        topt.seed = cfg.seed;
        topt.verbose = cfg.verbose;
        topt.metric_threshold = cfg.threshold;

        std::filesystem::create_directories(cfg.out_dir);
        std::vector<EpochMetrics> metrics = train(net, train_data, test_data, topt);
        write_metrics_csv(std::filesystem::path(cfg.out_dir) / "metrics.csv", metrics);

        CheckpointManifest manifest;
        manifest.model = net.model;
        manifest.epoch = topt.epochs;
        manifest.seed = cfg.seed;
        manifest.reg = cfg.reg;
        if (!metrics.empty()) {
            manifest.metrics["test_error"] = metrics.back().test_error;
            manifest.metrics["train_loss"] = metrics.back().train_loss;
            manifest.metrics["prune_rate"] = metrics.back().prune_rate;
        }
        save_checkpoint(net, manifest, std::filesystem::path(cfg.out_dir) / "final.ckpt");

        json summary;
        summary["method"] = reg_kind_string(cfg.reg);
        summary["lambda1"] = cfg.reg.lambda1;
        summary["lambda2"] = cfg.reg.lambda2;
        summary["seed"] = cfg.seed;
        summary["train_epochs"] = topt.epochs;
        if (!metrics.empty()) summary["train_error"] = metrics.back().test_error;
        update_run_summary(cfg.out_dir, summary);

        if (!metrics.empty())
            std::cout << "trained " << net.model << " for " << topt.epochs << " epochs: test error "
                      << metrics.back().test_error << "%\n";
        return 0;
    } catch (const TrainDivergedError& e) {
        std::cerr << "error: training diverged: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_eval(const std::filesystem::path& ckpt, const std::string& data_dir, int limit_test) {
    try {
        LoadedCheckpoint lc = load_checkpoint(ckpt);
        auto [train_data, test_data] = load_data(data_dir, 1, limit_test);
        (void)train_data;
        double err = evaluate_error(lc.net, test_data) * 100.0;
        std::cout << "test error " << err << "% over " << test_data.size() << " samples\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_prune(const std::filesystem::path& ckpt, double threshold,
              const std::filesystem::path& out_dir, const std::string& data_dir, int limit_test) {
    try {
        LoadedCheckpoint lc = load_checkpoint(ckpt);
        if (lc.net.groups.empty()) {
            std::cerr << "error: checkpoint has no prunable groups (trained without gates?)\n";
            return 2;
        }
        double t = threshold >= 0.0
                       ? threshold
                       : default_threshold(lc.net.gate_of(lc.net.groups.front()).kind);

        PruneOutcome outcome = prune_network(lc.net, t);
        std::filesystem::create_directories(out_dir);

        CheckpointManifest manifest = lc.manifest;
        manifest.metrics["pruning_rate"] = outcome.report.pruning_rate();
        save_checkpoint(outcome.net, manifest, out_dir / "pruned.ckpt");
        {
            std::ofstream f(out_dir / "prune_report.json", std::ios::trunc);
            f << prune_report_json(outcome.report) << "\n";
        }

        json summary;
        summary["method"] = reg_kind_string(lc.manifest.reg);
        summary["lambda1"] = lc.manifest.reg.lambda1;
        summary["lambda2"] = lc.manifest.reg.lambda2;
        summary["signature"] = outcome.report.signature;
        summary["threshold"] = t;
        summary["params_before"] = outcome.report.params_before;
        summary["params_after"] = outcome.report.params_after;
        summary["pruning_rate"] = outcome.report.pruning_rate();

        if (!data_dir.empty() || std::getenv("GATEPRUNE_DATA_DIR")) {
            auto [train_data, test_data] = load_data(data_dir, 1, limit_test);
            (void)train_data;
            double err = evaluate_error(outcome.net, test_data) * 100.0;
            summary["pruned_error"] = err;
            std::cout << "pruned error " << err << "%\n";
        }
        update_run_summary(out_dir, summary);

        std::cout << "architecture " << outcome.report.signature << "\n"
                  << "params " << outcome.report.params_before << " -> " << outcome.report.params_after
                  << " (pruning rate " << outcome.report.pruning_rate() << ")\n"
                  << "flops " << outcome.report.flops_before << " -> " << outcome.report.flops_after
                  << " (" << outcome.report.flop_convention << ")\n";
        return 0;
    } catch (const DeadLayerError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_finetune(const std::filesystem::path& ckpt, int epochs, double lr,
                 const std::filesystem::path& out_dir, const std::string& data_dir,
                 std::uint64_t seed, int limit_train, int limit_test) {
    try {
        if (epochs > 3) {
            std::cerr << "error: fine-tuning is capped at 3 epochs, got " << epochs << "\n";
            return 2;
        }
        LoadedCheckpoint lc = load_checkpoint(ckpt);
        auto [train_data, test_data] = load_data(data_dir, limit_train, limit_test);

        FinetuneOptions fopt;
        fopt.epochs = epochs;
        fopt.lr = lr;
        fopt.seed = seed;
        NetworkGraph tuned = finetune(lc.net, train_data, test_data, fopt);
        double err = evaluate_error(tuned, test_data) * 100.0;

        std::filesystem::create_directories(out_dir);
        CheckpointManifest manifest = lc.manifest;
        manifest.metrics["finetuned_error"] = err;
        save_checkpoint(tuned, manifest, out_dir / "finetuned.ckpt");
        update_run_summary(out_dir, json{{"finetuned_error", err}, {"finetune_epochs", epochs}});

        std::cout << "finetuned error " << err << "% after <= " << epochs << " epochs\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_sweep(const std::filesystem::path& ckpt, const std::vector<double>& thresholds,
              int finetune_epochs, const std::filesystem::path& out_csv,
              const std::string& data_dir, int limit_train, int limit_test) {
    try {
        LoadedCheckpoint lc = load_checkpoint(ckpt);
        auto [train_data, test_data] = load_data(data_dir, limit_train, limit_test);

        FinetuneOptions fopt;
        fopt.epochs = finetune_epochs;
        std::vector<SweepRow> rows = threshold_sweep(lc.net, train_data, test_data, thresholds, fopt);

        if (out_csv.has_parent_path()) std::filesystem::create_directories(out_csv.parent_path());
        std::ofstream f(out_csv, std::ios::trunc);
        if (!f) throw std::runtime_error("cannot write " + out_csv.string());
        f << sweep_csv(rows);
        std::cout << sweep_csv(rows);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

int cmd_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_base) {
    try {
        struct Row {
            std::string run, method;
            double lambda1 = 0.0;
            std::string signature;
            double pruning_rate = 0.0;
            std::string error;  // best available error, percent
        };
        std::vector<Row> rows;
        std::vector<std::string> missing;

        std::vector<std::filesystem::path> dirs;
        for (const auto& entry : std::filesystem::directory_iterator(runs_dir))
            if (entry.is_directory()) dirs.push_back(entry.path());
        std::sort(dirs.begin(), dirs.end());

        for (const auto& dir : dirs) {
            std::filesystem::path p = dir / "run_summary.json";
            if (!std::filesystem::exists(p)) {
                missing.push_back(dir.filename().string());
                continue;
            }
            std::ifstream f(p);
            json j;
            f >> j;
            Row r;
            r.run = dir.filename().string();
            r.method = j.value("method", "?");
            r.lambda1 = j.value("lambda1", 0.0);
            r.signature = j.value("signature", "");
            r.pruning_rate = j.value("pruning_rate", 0.0);
            double err = j.value("finetuned_error", j.value("pruned_error", j.value("train_error", -1.0)));
            if (err >= 0.0) {
                std::ostringstream os;
                os << err;
                r.error = os.str();
            }
            rows.push_back(std::move(r));
        }

        std::ostringstream md, csv;
        md << "| run | method | lambda1 | pruned architecture | pruning rate | error % |\n";
        md << "|---|---|---|---|---|---|\n";
        csv << "run,method,lambda1,signature,pruning_rate,error_percent\n";
        for (const Row& r : rows) {
            md << "| " << r.run << " | " << r.method << " | " << r.lambda1 << " | " << r.signature
               << " | " << r.pruning_rate << " | " << r.error << " |\n";
            csv << r.run << ',' << r.method << ',' << r.lambda1 << ',' << r.signature << ','
                << r.pruning_rate << ',' << r.error << '\n';
        }

        std::filesystem::path md_path = out_base;
        md_path += ".md";
        std::filesystem::path csv_path = out_base;
        csv_path += ".csv";
        if (out_base.has_parent_path()) std::filesystem::create_directories(out_base.parent_path());
        std::ofstream(md_path, std::ios::trunc) << md.str();
        std::ofstream(csv_path, std::ios::trunc) << csv.str();
        std::cout << md.str();
        for (const std::string& m : missing) std::cerr << "missing run summary: " << m << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace gateprune
