#include "gateprune/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace gateprune {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw ShapeError("non-positive extent " + std::to_string(d) + " in shape " + shape_str(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, float value, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    std::size_t n = shape_numel(shape);
    impl->shape = std::move(shape);
    impl->data.assign(n, value);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<float> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw ShapeError("data length " + std::to_string(values.size()) + " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value) { return from_data({1}, {value}); }

float Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape()));
    return impl_->data[0];
}

std::span<float> Tensor::grad() {
    ensure_grad(*impl_);
    return impl_->grad;
}

std::span<const float> Tensor::grad() const {
    ensure_grad(*impl_);
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;
    impl->requires_grad = impl_->requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->data = impl_->data;  // copy-on-detach keeps aliasing rules simple
    impl->requires_grad = false;
    return Tensor(std::move(impl));
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

void ensure_grad(TensorImpl& t) {
    if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0f);
}

bool record_node(Tensor& out, const char* op, std::vector<Tensor> inputs,
                 std::function<void()> apply) {
    if (!g_grad_enabled) return false;
    bool tracked = false;
    for (const Tensor& t : inputs) tracked = tracked || t.requires_grad();
    if (!tracked) return false;

    auto node = std::make_shared<Node>();
    node->op = op;
    node->inputs.reserve(inputs.size());
    for (Tensor& t : inputs) node->inputs.push_back(t.impl());
    node->out = out.impl().get();
    node->apply = std::move(apply);
    out.impl()->requires_grad = true;
    out.impl()->node = std::move(node);
    return true;
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) throw ShapeError("backward() requires a scalar loss, got " + shape_str(loss.shape()));

    // Topological order by DFS over producer links.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    struct Frame {
        Node* node;
        std::size_t next_input = 0;
    };
    std::vector<Frame> frames;
    if (loss.impl()->node) frames.push_back({loss.impl()->node.get()});
    while (!frames.empty()) {
        Frame& f = frames.back();
        if (f.next_input == 0) {
            if (visited.count(f.node)) {
                frames.pop_back();
                continue;
            }
            visited.insert(f.node);
        }
        bool descended = false;
        while (f.next_input < f.node->inputs.size()) {
            Node* child = f.node->inputs[f.next_input++]->node.get();
            if (child && !visited.count(child)) {
                frames.push_back({child});
                descended = true;
                break;
            }
        }
        if (!descended && f.next_input >= f.node->inputs.size()) {
            order.push_back(f.node);
            frames.pop_back();
        }
    }

    // Every tracked participant ends the sweep with a populated grad buffer.
    for (Node* n : order)
        for (auto& in : n->inputs)
            if (in->requires_grad) ensure_grad(*in);

    ensure_grad(*loss.impl());
    loss.impl()->grad[0] += 1.0f;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        ensure_grad(*(*it)->out);
        (*it)->apply();
    }
}

}  // namespace gateprune
