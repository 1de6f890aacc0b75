#pragma once

#include <cmath>

#include "gateprune/tensor.hpp"

namespace gateprune {

enum class GateKind { Exponential, Linear };

// Per-channel multiplicative gate. Exponential gates own their parameters g
// and scale channel k by 1 - exp(-g_k^2). Linear gates carry no parameters of
// their own: `params` aliases the scale gamma of the associated BatchNorm, so
// regularization and pruning read and write a single source of truth.
struct GateLayer {
    GateKind kind = GateKind::Exponential;
    Tensor params;

    int channels() const { return params.dim(0); }
};

// The factor is evaluated as written, in float32. Once g^2 drops below half
// an ulp of 1, expf(-g^2) rounds to 1 and the factor is exactly 0 — this is
// what lets regularized gates null channels out entirely.
inline float exp_gate_factor(float g) { return 1.0f - std::exp(-g * g); }

// d/dg of the exponential factor.
inline float exp_gate_factor_grad(float g) { return 2.0f * g * std::exp(-g * g); }

// Scales each channel of x ([N,C] or [N,C,H,W]) by its gate factor.
// Linear gates scale inside the BN layer, so this is the identity for them;
// it exists so pruning can treat both kinds uniformly.
Tensor gate_forward(const Tensor& x, const GateLayer& gate);

// The scalar compared against a pruning threshold: the factor 1-exp(-g_k^2)
// for exponential gates, |gamma_k| for linear ones.
float gate_value(const GateLayer& gate, int k);

}  // namespace gateprune
