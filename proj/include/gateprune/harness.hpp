#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gateprune/config.hpp"

namespace gateprune {

// Command bodies behind the CLI. Each returns a process exit code and
// communicates failures on stderr; commands compose through files only.

int cmd_train(const RunConfig& cfg);

int cmd_eval(const std::filesystem::path& ckpt, const std::string& data_dir, int limit_test);

// select -> compact -> merge; writes pruned.ckpt and prune_report.json under
// out_dir and prints the architecture signature. With a dataset available the
// pruned test error is recorded in the run summary as well.
int cmd_prune(const std::filesystem::path& ckpt, double threshold,
              const std::filesystem::path& out_dir, const std::string& data_dir, int limit_test);

int cmd_finetune(const std::filesystem::path& ckpt, int epochs, double lr,
                 const std::filesystem::path& out_dir, const std::string& data_dir,
                 std::uint64_t seed, int limit_train, int limit_test);

int cmd_sweep(const std::filesystem::path& ckpt, const std::vector<double>& thresholds,
              int finetune_epochs, const std::filesystem::path& out_csv,
              const std::string& data_dir, int limit_train, int limit_test);

// Consolidates run_summary.json files under runs_dir into <out_base>.md and
// <out_base>.csv; runs without a summary are listed on stderr, not fatal.
int cmd_report(const std::filesystem::path& runs_dir, const std::filesystem::path& out_base);

}  // namespace gateprune
