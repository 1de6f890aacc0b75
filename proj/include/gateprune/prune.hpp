#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gateprune/network.hpp"

namespace gateprune {

struct Dataset;
struct TrainOptions;

class DeadLayerError : public std::runtime_error {
  public:
    explicit DeadLayerError(const std::string& group)
        : std::runtime_error("dead layer: pruning removes every channel of group '" + group + "'"),
          group_(group) {}
    const std::string& group() const { return group_; }

  private:
    std::string group_;
};

struct Selection {
    std::vector<std::vector<int>> kept;     // per group, ascending channel indices
    std::vector<std::vector<int>> removed;  // complement, per group
};

// 0 for exponential gates, 1e-4 for linear ones.
double default_threshold(GateKind kind);

// Keep channel k iff gate_value(k) > threshold (strict, so threshold 0 prunes
// exactly-zero gates). Throws DeadLayerError when a group loses every channel.
Selection select_channels(const NetworkGraph& net, double threshold);

// Same thresholding without the dead-layer check; used for metrics and sweeps.
Selection threshold_selection(const NetworkGraph& net, double threshold);

// Resolved per-layer slicing decisions for a selection. Gates on flattened
// units keep only slots whose upstream channel also survives, so the plan's
// group_kept lists are the effective ones recorded in reports.
struct CompactionPlan {
    struct LayerPlan {
        std::vector<int> in_keep;   // conv/linear input channels or units
        std::vector<int> out_keep;  // conv/linear output channels, bn/gate channels
        int out_h = 0, out_w = 0;   // spatial extents after this layer
    };
    std::vector<LayerPlan> layers;
    std::vector<std::vector<int>> group_kept;
    std::vector<std::string> dead_groups;
};

CompactionPlan plan_compaction(const NetworkGraph& net, const Selection& sel);

struct CompactResult {
    NetworkGraph net;
    std::vector<std::vector<int>> kept;  // effective kept indices per group
};

// Physically removes pruned slices from producer and consumer tensors (and BN
// parameters/statistics); gate layers stay, with sliced parameters.
CompactResult compact(const NetworkGraph& net, const Selection& sel);

// Folds gate factors into adjacent tensors and deletes the gate layers.
// Without BN the factor scales the producer's output slices (or the consumer
// columns for gates on flattened units). When a BN follows the gate, the
// factor moves into that BN's running statistics and gamma so that eval
// output is unchanged. Linear gates just vanish; their scale is BN's gamma.
NetworkGraph merge_gates(const NetworkGraph& net);

// Sum of weight, BN (gamma+beta) and gate parameter element counts.
long long count_params(const NetworkGraph& net);

// Per-sample forward FLOPs, counting a multiply-add as 2:
//   conv: 2*kh*kw*Cin*Cout*Hout*Wout, linear: 2*In*Out.
long long count_flops(const NetworkGraph& net);

// Deployable (gates-merged) parameter/FLOP counts for a selection, computed
// from shapes alone. Tolerates dead groups.
struct PrunedCounts {
    long long params = 0;
    long long flops = 0;
};
PrunedCounts pruned_counts(const NetworkGraph& net, const Selection& sel);

// 1 - params(pruned, merged) / params(unpruned, merged) at the threshold.
double pruning_rate_at(const NetworkGraph& net, double threshold);

std::string architecture_signature(const std::vector<std::vector<int>>& kept);

struct PruneReport {
    std::vector<std::string> group_names;
    std::vector<std::vector<int>> kept;
    std::vector<std::vector<int>> removed;
    std::string signature;
    long long params_before = 0;
    long long params_after = 0;
    long long flops_before = 0;
    long long flops_after = 0;
    double threshold = 0.0;
    std::string gate_kind;
    std::string flop_convention = "multiply-add counted as 2 FLOPs";

    double pruning_rate() const {
        return params_before == 0 ? 0.0
                                  : 1.0 - static_cast<double>(params_after) / static_cast<double>(params_before);
    }
};

// select -> compact -> merge, with before/after accounting on merged nets.
struct PruneOutcome {
    NetworkGraph net;  // compacted, gates merged
    PruneReport report;
};
PruneOutcome prune_network(const NetworkGraph& net, double threshold);

std::string prune_report_json(const PruneReport& report);
PruneReport prune_report_from_json(const std::string& text);

// Fine-tuning and threshold sweeps (training-dependent pieces).
struct FinetuneOptions {
    int epochs = 3;          // capped at 3
    double lr = 0.01;
    double momentum = 0.9;
    int batch_size = 128;
    std::uint64_t seed = 1;
};

// Penalty-free training for at most three epochs; returns the weights of the
// epoch with the lowest test error. 0 epochs returns the model unchanged.
NetworkGraph finetune(const NetworkGraph& net, const Dataset& train_data, const Dataset& test_data,
                      const FinetuneOptions& opts);

struct SweepRow {
    double threshold = 0.0;
    bool dead = false;
    std::string dead_group;
    double pruning_rate = 0.0;
    long long params_after = 0;
    long long flops_after = 0;
    double accuracy_before_ft = 0.0;
    double accuracy_after_ft = 0.0;
};

std::vector<SweepRow> threshold_sweep(const NetworkGraph& net, const Dataset& train_data,
                                      const Dataset& test_data, std::span<const double> thresholds,
                                      const FinetuneOptions& ft);

// CSV with header threshold,pruning_rate,params_after,flops_after,
// accuracy_before_ft,accuracy_after_ft; dead thresholds become
// "removes all channels" rows.
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace gateprune
