#pragma once

#include <optional>
#include <span>
#include <vector>

#include "gateprune/tensor.hpp"

namespace gateprune {

struct NetworkGraph;

enum class RegKind { L2, L1, BoundedL1 };

// Epoch-wise reduction of sigma. exp_decay: initial * rate^epoch.
// step_then_exp: initial - delta*epoch down to `floor`, then floor * rate^k.
struct SigmaSchedule {
    enum class Mode { ExpDecay, StepThenExp };
    Mode mode = Mode::ExpDecay;
    double initial = 2.0;
    double decay_rate = 0.99;
    double step_delta = 0.02;
    double floor = 0.2;
};

double sigma_at(const SigmaSchedule& schedule, int epoch);

struct LambdaStep {
    int epoch;      // from this epoch on ...
    double lambda;  // ... lambda1 takes this value
};

// Which penalty acts on the gate parameters, and how strongly. The penalty
// never touches the network weights W; L2 on gates is realized through the
// optimizer's weight decay, so penalty()/penalty_grad() report zero for it.
struct RegularizerSpec {
    RegKind kind = RegKind::L2;
    double lambda1 = 0.0;
    double lambda2 = 0.0;  // weight decay on all parameters, gates included
    double sigma = 1.0;
    std::optional<SigmaSchedule> sigma_schedule;
    std::vector<LambdaStep> lambda_schedule;  // sorted by epoch

    double lambda1_at(int epoch) const;
    // Scheduled sigma for the epoch. For L1 the penalty divides by sigma only
    // when a schedule is active (equivalent to scaling lambda to lambda/sigma);
    // without one it uses sigma = 1 regardless of the constant field.
    double sigma_for(int epoch) const;
};

// lambda * sum of per-parameter penalty terms over all gate parameter tensors.
double penalty(std::span<const Tensor> gate_params, const RegularizerSpec& spec, int epoch);

// Adds the closed-form penalty gradient to each gate parameter's grad buffer:
//   L1:        lambda * sign(theta) / sigma_eff
//   BoundedL1: lambda * sign(theta) * exp(-|theta|/sigma) / sigma
//   L2:        nothing (weight decay path)
void apply_penalty_grad(std::span<Tensor> gate_params, const RegularizerSpec& spec, int epoch);

// Penalty gradient for a single parameter value (test and analysis hook).
double penalty_grad_term(float theta, const RegularizerSpec& spec, int epoch);

struct LossTerms {
    Tensor task;     // mean cross-entropy, differentiable
    double penalty;  // regularizer value at this epoch
    double total() const { return static_cast<double>(task.item()) + penalty; }
};

// Empirical loss plus penalty for one batch. backward(terms.task) populates
// gradients of W and g jointly; apply_penalty_grad adds the closed-form
// regularizer gradients on top.
LossTerms total_loss(NetworkGraph& net, const Tensor& images, const std::vector<int>& labels,
                     const RegularizerSpec& spec, int epoch);

}  // namespace gateprune
