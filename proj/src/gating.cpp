#include "gateprune/gating.hpp"

namespace gateprune {

Tensor gate_forward(const Tensor& x, const GateLayer& gate) {
    if (gate.kind == GateKind::Linear) return x;

    if (x.ndim() != 2 && x.ndim() != 4)
        throw ShapeError("gate_forward: input must be [N,C] or [N,C,H,W], got " + shape_str(x.shape()));
    const int C = x.dim(1);
    if (gate.params.ndim() != 1 || gate.params.dim(0) != C)
        throw ShapeError("gate_forward: channel mismatch on axis 1: input has " +
                         std::to_string(C) + " channels, gate has " +
                         std::to_string(gate.params.dim(0)));

    const int N = x.dim(0);
    const std::size_t plane = x.numel() / (static_cast<std::size_t>(N) * C);
    const float* g = gate.params.data().data();

    std::vector<float> factor(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) factor[c] = exp_gate_factor(g[c]);

    Tensor out = Tensor::zeros(x.shape());
    const float* p = x.data().data();
    float* q = out.data().data();
    for (int n = 0; n < N; ++n) {
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
            float f = factor[c];
            for (std::size_t i = 0; i < plane; ++i) q[base + i] = p[base + i] * f;
        }
    }

    auto in_impl = x.impl();
    auto g_impl = gate.params.impl();
    auto out_impl = out.impl().get();
    record_node(out, "gate", {x, gate.params}, [in_impl, g_impl, out_impl, factor, N, C, plane]() {
        const float* gout = out_impl->grad.data();
        const float* p = in_impl->data.data();
        const float* g = g_impl->data.data();
        for (int c = 0; c < C; ++c) {
            double acc = 0.0;
            bool need_g = g_impl->requires_grad;
            bool need_x = in_impl->requires_grad;
            float f = factor[c];
            for (int n = 0; n < N; ++n) {
                const std::size_t base = (static_cast<std::size_t>(n) * C + c) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    if (need_g) acc += static_cast<double>(gout[base + i]) * p[base + i];
                    if (need_x) in_impl->grad[base + i] += gout[base + i] * f;
                }
            }
            if (need_g) g_impl->grad[c] += static_cast<float>(acc) * exp_gate_factor_grad(g[c]);
        }
    });
    return out;
}

float gate_value(const GateLayer& gate, int k) {
    if (k < 0 || k >= gate.channels())
        throw ShapeError("gate_value: channel " + std::to_string(k) + " out of range [0," +
                         std::to_string(gate.channels()) + ")");
    float v = gate.params.at(static_cast<std::size_t>(k));
    return gate.kind == GateKind::Exponential ? exp_gate_factor(v) : std::fabs(v);
}

}  // namespace gateprune
