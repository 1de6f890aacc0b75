#include "gateprune/norms.hpp"

#include <cmath>
#include <stdexcept>

namespace gateprune {
namespace norms {

namespace {

void validate(const BoundedNormParams& params) {
    if (!(params.sigma > 0.0f))
        throw std::invalid_argument("bounded norm requires sigma > 0");
    if (!(params.p >= 1.0f))
        throw std::invalid_argument("bounded norm requires p >= 1");
}

float pow_abs(float x, float p) {
    float a = std::fabs(x);
    if (p == 1.0f) return a;
    if (p == 2.0f) return a * a;
    return std::pow(a, p);
}

}  // namespace

float p_norm(std::span<const float> x, float p) {
    if (!(p >= 1.0f)) throw std::invalid_argument("p_norm requires p >= 1");
    if (x.empty()) return 0.0f;
    double s = 0.0;
    for (float v : x) s += pow_abs(v, p);
    if (p == 1.0f) return static_cast<float>(s);
    if (p == 2.0f) return static_cast<float>(std::sqrt(s));
    return static_cast<float>(std::pow(s, 1.0 / p));
}

int zero_norm(std::span<const float> x) {
    int count = 0;
    for (float v : x) count += v != 0.0f;
    return count;
}

float bounded_term(float x, const BoundedNormParams& params) {
    validate(params);
    // -expm1 keeps precision for |x| << sigma, where 1 - exp(-t) ~ t.
    float t = pow_abs(x / params.sigma, params.p);
    return -std::expm1(-t);
}

float bounded_term_grad(float x, const BoundedNormParams& params) {
    validate(params);
    if (x == 0.0f) return 0.0f;  // sign(0) = 0 convention
    float sign = x > 0.0f ? 1.0f : -1.0f;
    float a = std::fabs(x);
    float sp = pow_abs(params.sigma, params.p);
    float t = pow_abs(a, params.p) / sp;
    float coeff = params.p == 1.0f ? 1.0f / params.sigma
                                   : params.p * pow_abs(a, params.p - 1.0f) / sp;
    return sign * coeff * std::exp(-t);
}

float bounded_norm(std::span<const float> x, const BoundedNormParams& params) {
    validate(params);
    double s = 0.0;
    for (float v : x) s += bounded_term(v, params);
    return static_cast<float>(s);
}

void bounded_norm_grad(std::span<const float> x, const BoundedNormParams& params,
                       std::span<float> out) {
    validate(params);
    if (out.size() != x.size())
        throw std::invalid_argument("bounded_norm_grad: output span size mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = bounded_term_grad(x[i], params);
}

}  // namespace norms
}  // namespace gateprune
