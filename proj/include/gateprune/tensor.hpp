#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gateprune {

// Thrown on dimension/shape violations; message names the offending axis.
class ShapeError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Node;

struct TensorImpl {
    std::vector<int> shape;
    std::vector<float> data;
    std::vector<float> grad;  // empty until a backward pass touches this tensor
    bool requires_grad = false;
    std::shared_ptr<Node> node;  // op that produced this tensor; null for leaves
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Dense float32 tensor handle with shared storage. Copying a Tensor aliases
// the same buffer; clone() makes a deep copy.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, float value, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<float> values,
                            bool requires_grad = false);
    static Tensor scalar(float value);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int dim(int i) const { return impl_->shape.at(static_cast<std::size_t>(i)); }
    int ndim() const { return static_cast<int>(impl_->shape.size()); }
    std::size_t numel() const { return impl_->data.size(); }

    std::span<float> data() { return impl_->data; }
    std::span<const float> data() const { return impl_->data; }
    float& at(std::size_t i) { return impl_->data[i]; }
    float at(std::size_t i) const { return impl_->data[i]; }
    float item() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }

    // Gradient buffer; allocated zero-filled on first access.
    std::span<float> grad();
    std::span<const float> grad() const;
    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    void zero_grad();

    Tensor clone() const;   // deep copy of data, no graph history
    Tensor detach() const;  // shares data, drops graph history and grad tracking

    std::shared_ptr<TensorImpl> impl() const { return impl_; }
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

  private:
    std::shared_ptr<TensorImpl> impl_;
};

// One recorded operation. `apply` reads out->grad and accumulates into the
// grads of `inputs`; backward() runs nodes in reverse topological order, so a
// tensor consumed by several ops receives the sum of all contributions.
struct Node {
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    TensorImpl* out = nullptr;
    std::function<void()> apply;
};

bool grad_enabled();

// RAII guard disabling graph recording (used for eval-mode forwards).
struct NoGradGuard {
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// Attaches a node to `out` if grad mode is on and any input is tracked.
// Returns true when the node was recorded (i.e. backward will reach it).
bool record_node(Tensor& out, const char* op, std::vector<Tensor> inputs,
                 std::function<void()> apply);

void ensure_grad(TensorImpl& t);

// Reverse-mode sweep from a scalar loss: seeds d(loss)/d(loss)=1, then walks
// producing nodes in reverse topological order accumulating input grads.
void backward(const Tensor& loss);

}  // namespace gateprune
