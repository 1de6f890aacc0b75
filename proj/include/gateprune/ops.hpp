#pragma once

#include <random>
#include <vector>

#include "gateprune/tensor.hpp"

namespace gateprune {

enum class Mode { Train, Eval };

// Cross-correlation, no bias. input [N,Cin,H,W], weight [Cout,Cin,kh,kw].
// Output spatial extents must divide evenly: H' = (H+2p-kh)/stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, int stride = 1, int padding = 0);

// input [N,F] times weight [O,F] transposed -> [N,O], no bias.
Tensor linear(const Tensor& input, const Tensor& weight);

struct BatchNormState {
    std::vector<float> running_mean;
    std::vector<float> running_var;
};

// Per-channel batch normalization over [N,C,H,W]. Train mode normalizes with
// batch statistics and updates the running estimates by EMA; eval mode uses
// the running estimates verbatim.
Tensor batch_norm(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                  BatchNormState& state, Mode mode, float momentum = 0.1f, float eps = 1e-5f);

Tensor relu(const Tensor& x);
Tensor max_pool2d(const Tensor& x, int kernel, int stride);
Tensor global_avg_pool(const Tensor& x);  // [N,C,H,W] -> [N,C]
Tensor flatten(const Tensor& x);          // [N,...] -> [N,prod]

// Inverted dropout: active only in train mode, scales kept units by 1/(1-rate).
Tensor dropout(const Tensor& x, float rate, Mode mode, std::mt19937& rng);

// Mean cross-entropy over the batch from raw logits [N,K].
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& x);  // -> scalar [1]

// SGD with classical momentum. Weight decay is added to the raw gradient
// before the momentum update (decoupled from any sparsity penalty):
//   v <- momentum * v + (g + weight_decay * p);  p <- p - lr * v
class SgdOptimizer {
  public:
    SgdOptimizer(std::vector<Tensor> params, float lr, float momentum, float weight_decay);

    void step();
    void zero_grad();

    void set_lr(float lr) { lr_ = lr; }
    float lr() const { return lr_; }
    float momentum() const { return momentum_; }
    float weight_decay() const { return weight_decay_; }

  private:
    std::vector<Tensor> params_;
    std::vector<std::vector<float>> velocity_;
    float lr_;
    float momentum_;
    float weight_decay_;
};

}  // namespace gateprune
