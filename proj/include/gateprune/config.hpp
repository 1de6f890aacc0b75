#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gateprune/regularization.hpp"

namespace gateprune {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// One training/pruning run, resolved from preset and/or config file with CLI
// overrides on top. Flat dotted keys, e.g. `regularizer.kind=bounded_l1`.
struct RunConfig {
    std::string model = "lenet5_caffe";
    std::string gate_kind = "exponential";  // exponential | linear | none
    RegularizerSpec reg;
    int epochs = -1;  // -1: 200 for l2, 60 otherwise
    int batch_size = 128;
    double lr = 0.1;
    double momentum = 0.9;
    std::vector<int> lr_milestones;
    double lr_gamma = 0.1;
    std::uint64_t seed = 1;
    double threshold = -1.0;  // -1: 0 for exponential gates, 1e-4 for linear
    int finetune_epochs = 3;
    double finetune_lr = 0.01;
    std::string out_dir = "runs/run";
    std::string data_dir;  // falls back to $GATEPRUNE_DATA_DIR
    int limit_train = 0;   // 0 = full dataset
    int limit_test = 0;
    bool verbose = false;

    int resolved_epochs() const { return epochs >= 0 ? epochs : (reg.kind == RegKind::L2 ? 200 : 60); }
    double resolved_threshold() const;
    std::filesystem::path resolved_data_dir() const;
    std::string reg_kind_name() const;
};

// Named hyperparameter bundles: l2 (lambda2=5e-4, 200 epochs), l1
// (lambda1=1e-3, 60 epochs), bounded_l1 (lambda1=4e-3, 60 epochs) and
// bounded_l1_3e3 (lambda1=3e-3, 60 epochs); all exponential-gated LeNet runs
// with batch 128, SGD lr 0.1, momentum 0.9.
RunConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

RunConfig parse_config_file(const std::filesystem::path& path);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

}  // namespace gateprune
