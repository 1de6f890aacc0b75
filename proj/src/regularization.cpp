#include "gateprune/regularization.hpp"

#include <cmath>
#include <stdexcept>

#include "gateprune/network.hpp"
#include "gateprune/norms.hpp"
#include "gateprune/ops.hpp"

namespace gateprune {

double sigma_at(const SigmaSchedule& schedule, int epoch) {
    if (epoch < 0) throw std::invalid_argument("sigma_at: epoch must be >= 0");
    if (schedule.initial <= 0.0) throw std::invalid_argument("sigma_at: initial sigma must be > 0");
    if (schedule.mode == SigmaSchedule::Mode::ExpDecay)
        return schedule.initial * std::pow(schedule.decay_rate, epoch);

    // Linear steps down to the floor, exponential decay past it.
    double span = schedule.initial - schedule.floor;
    int floor_epoch = static_cast<int>(std::ceil(span / schedule.step_delta));
    if (epoch < floor_epoch) return schedule.initial - schedule.step_delta * epoch;
    return schedule.floor * std::pow(schedule.decay_rate, epoch - floor_epoch);
}

double RegularizerSpec::lambda1_at(int epoch) const {
    double v = lambda1;
    for (const LambdaStep& s : lambda_schedule)
        if (epoch >= s.epoch) v = s.lambda;
    return v;
}

double RegularizerSpec::sigma_for(int epoch) const {
    if (sigma_schedule) return sigma_at(*sigma_schedule, epoch);
    return kind == RegKind::L1 ? 1.0 : sigma;
}

double penalty(std::span<const Tensor> gate_params, const RegularizerSpec& spec, int epoch) {
    if (spec.kind == RegKind::L2) return 0.0;  // realized through weight decay
    double lambda = spec.lambda1_at(epoch);
    double sig = spec.sigma_for(epoch);
    if (!(sig > 0.0)) throw std::invalid_argument("penalty: sigma must be > 0");

    double total = 0.0;
    if (spec.kind == RegKind::L1) {
        for (const Tensor& t : gate_params)
            for (float v : t.data()) total += std::fabs(v) / sig;
    } else {
        norms::BoundedNormParams np{1.0f, static_cast<float>(sig)};
        for (const Tensor& t : gate_params) total += norms::bounded_norm(t.data(), np);
    }
    return lambda * total;
}

double penalty_grad_term(float theta, const RegularizerSpec& spec, int epoch) {
    if (spec.kind == RegKind::L2) return 0.0;
    double lambda = spec.lambda1_at(epoch);
    double sig = spec.sigma_for(epoch);
    double sign = theta > 0.0f ? 1.0 : (theta < 0.0f ? -1.0 : 0.0);
    if (spec.kind == RegKind::L1) return lambda * sign / sig;
    return lambda * sign * std::exp(-std::fabs(theta) / sig) / sig;
}

void apply_penalty_grad(std::span<Tensor> gate_params, const RegularizerSpec& spec, int epoch) {
    if (spec.kind == RegKind::L2) return;
    for (Tensor& t : gate_params) {
        std::span<float> g = t.grad();
        std::span<const float> v = t.data();
        for (std::size_t i = 0; i < v.size(); ++i)
            g[i] += static_cast<float>(penalty_grad_term(v[i], spec, epoch));
    }
}

LossTerms total_loss(NetworkGraph& net, const Tensor& images, const std::vector<int>& labels,
                     const RegularizerSpec& spec, int epoch) {
    Tensor logits = net.forward(images);
    Tensor task = softmax_cross_entropy(logits, labels);
    std::vector<Tensor> gates = net.gate_params();
    return {task, penalty(gates, spec, epoch)};
}

}  // namespace gateprune
