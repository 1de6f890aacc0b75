#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gateprune/mnist.hpp"
#include "gateprune/network.hpp"
#include "gateprune/regularization.hpp"

namespace gateprune {

// Loss became non-finite; message carries the state needed to diagnose.
class TrainDivergedError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct TrainOptions {
    int epochs = 60;
    int batch_size = 128;
    double lr = 0.1;
    double momentum = 0.9;
    std::vector<int> lr_milestones;  // lr *= lr_gamma at each listed epoch
    double lr_gamma = 0.1;
    RegularizerSpec reg;
    std::uint64_t seed = 1;
    bool shuffle = true;
    int start_epoch = 0;             // schedules resume from here
    double metric_threshold = -1.0;  // -1: default for the net's gate kind
    bool verbose = false;
};

struct EpochMetrics {
    int epoch = 0;
    double train_loss = 0.0;  // task + penalty, averaged over batches
    double task_loss = 0.0;
    double penalty = 0.0;
    double test_error = 0.0;  // percent
    double sigma = 0.0;
    double prune_rate = 0.0;  // at the default threshold
};

// One SGD training run. Returns one metrics row per epoch.
std::vector<EpochMetrics> train(NetworkGraph& net, const Dataset& train_data,
                                const Dataset& test_data, const TrainOptions& opts);

// Fraction of misclassified samples in [0,1], eval mode, no graph recording.
double evaluate_error(NetworkGraph& net, const Dataset& data, int batch_size = 500);

std::string metrics_csv(std::span<const EpochMetrics> rows);
void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> rows);
std::vector<EpochMetrics> read_metrics_csv(const std::filesystem::path& path);

}  // namespace gateprune
