#pragma once

#include <span>

namespace gateprune {
namespace norms {

struct BoundedNormParams {
    float p = 1.0f;      // exponent, p >= 1
    float sigma = 1.0f;  // interpolation scale, sigma > 0
};

// (sum |x_i|^p)^(1/p). Empty input gives 0; p < 1 throws.
float p_norm(std::span<const float> x, float p);

// Count of exactly nonzero entries (discrete metric).
int zero_norm(std::span<const float> x);

// sum_i 1 - exp(-|x_i|^p / sigma^p). Bounded to [0, n); converges to
// zero_norm as sigma -> 0+ and to |x/sigma|_p^p for |x_i| << sigma.
float bounded_norm(std::span<const float> x, const BoundedNormParams& params);

// Componentwise d/dx_i of the bounded norm:
//   sign(x_i) * p*|x_i|^(p-1)/sigma^p * exp(-|x_i|^p/sigma^p)
// with the subgradient convention sign(0) = 0.
void bounded_norm_grad(std::span<const float> x, const BoundedNormParams& params,
                       std::span<float> out);

// Single-element helpers used by the regularizer.
float bounded_term(float x, const BoundedNormParams& params);
float bounded_term_grad(float x, const BoundedNormParams& params);

}  // namespace norms
}  // namespace gateprune
