#include "gateprune/network.hpp"

#include <cmath>
#include <unordered_map>

namespace gateprune {

namespace {

Tensor kaiming_uniform(std::vector<int> shape, int fan_in, std::mt19937& rng) {
    float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
    std::uniform_real_distribution<float> uni(-bound, bound);
    Tensor t = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    for (auto& v : t.data()) v = uni(rng);
    return t;
}

}  // namespace

Tensor NetworkGraph::forward(const Tensor& input) {
    std::vector<int> expect = input_shape;
    expect.insert(expect.begin(), input.dim(0));
    if (input.shape() != expect)
        throw ShapeError("forward: input " + shape_str(input.shape()) + " does not match model input " +
                         shape_str(expect));
    Tensor cur = input;
    for (Layer& layer : layers) {
        cur = std::visit(
            [&](auto& spec) -> Tensor {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, ConvLayer>) {
                    return conv2d(cur, spec.weight, spec.stride, spec.padding);
                } else if constexpr (std::is_same_v<T, LinearLayer>) {
                    return linear(cur, spec.weight);
                } else if constexpr (std::is_same_v<T, BatchNormLayer>) {
                    return batch_norm(cur, spec.gamma, spec.beta, spec.state, mode, spec.momentum,
                                      spec.eps);
                } else if constexpr (std::is_same_v<T, GateLayer>) {
                    return gate_forward(cur, spec);
                } else if constexpr (std::is_same_v<T, ReluLayer>) {
                    return relu(cur);
                } else if constexpr (std::is_same_v<T, MaxPoolLayer>) {
                    return max_pool2d(cur, spec.kernel, spec.stride);
                } else if constexpr (std::is_same_v<T, GlobalAvgPoolLayer>) {
                    return global_avg_pool(cur);
                } else if constexpr (std::is_same_v<T, FlattenLayer>) {
                    return flatten(cur);
                } else {
                    static_assert(std::is_same_v<T, DropoutLayer>);
                    return dropout(cur, spec.rate, mode, rng);
                }
            },
            layer.spec);
    }
    return cur;
}

std::vector<Tensor> NetworkGraph::parameters() {
    std::vector<Tensor> params;
    for (Layer& layer : layers) {
        if (auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            params.push_back(conv->weight);
        } else if (auto* lin = std::get_if<LinearLayer>(&layer.spec)) {
            params.push_back(lin->weight);
        } else if (auto* bn = std::get_if<BatchNormLayer>(&layer.spec)) {
            params.push_back(bn->gamma);
            params.push_back(bn->beta);
        } else if (auto* gate = std::get_if<GateLayer>(&layer.spec)) {
            if (gate->kind == GateKind::Exponential) params.push_back(gate->params);
        }
    }
    return params;
}

std::vector<Tensor> NetworkGraph::gate_params() {
    std::vector<Tensor> out;
    out.reserve(groups.size());
    for (const PrunableGroup& g : groups) out.push_back(gate_of(g).params);
    return out;
}

std::vector<int> NetworkGraph::group_channel_counts() const {
    std::vector<int> counts;
    counts.reserve(groups.size());
    for (const PrunableGroup& g : groups) counts.push_back(gate_of(g).channels());
    return counts;
}

const GateLayer& NetworkGraph::gate_of(const PrunableGroup& g) const {
    return std::get<GateLayer>(layers.at(static_cast<std::size_t>(g.gate_layer)).spec);
}

GateLayer& NetworkGraph::gate_of(const PrunableGroup& g) {
    return std::get<GateLayer>(layers.at(static_cast<std::size_t>(g.gate_layer)).spec);
}

NetworkGraph NetworkGraph::clone() const {
    NetworkGraph out;
    out.model = model;
    out.input_shape = input_shape;
    out.groups = groups;
    out.mode = mode;
    out.rng = rng;
    out.layers.reserve(layers.size());

    // Clone BN layers first so linear gates can re-alias the cloned gamma.
    std::unordered_map<const TensorImpl*, Tensor> gamma_map;
    for (const Layer& layer : layers) {
        if (const auto* bn = std::get_if<BatchNormLayer>(&layer.spec)) {
            BatchNormLayer copy;
            copy.gamma = bn->gamma.clone();
            copy.beta = bn->beta.clone();
            copy.state = bn->state;
            copy.momentum = bn->momentum;
            copy.eps = bn->eps;
            gamma_map.emplace(bn->gamma.impl().get(), copy.gamma);
            out.layers.push_back({layer.name, std::move(copy)});
        } else {
            out.layers.push_back({layer.name, LayerSpec{ReluLayer{}}});  // placeholder
        }
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const Layer& layer = layers[i];
        if (std::holds_alternative<BatchNormLayer>(layer.spec)) continue;
        if (const auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            out.layers[i].spec = ConvLayer{conv->weight.clone(), conv->stride, conv->padding};
        } else if (const auto* lin = std::get_if<LinearLayer>(&layer.spec)) {
            out.layers[i].spec = LinearLayer{lin->weight.clone()};
        } else if (const auto* gate = std::get_if<GateLayer>(&layer.spec)) {
            GateLayer copy;
            copy.kind = gate->kind;
            if (gate->kind == GateKind::Linear) {
                auto it = gamma_map.find(gate->params.impl().get());
                if (it == gamma_map.end())
                    throw std::logic_error("clone: linear gate does not alias any BN gamma");
                copy.params = it->second;
            } else {
                copy.params = gate->params.clone();
            }
            out.layers[i].spec = std::move(copy);
        } else {
            out.layers[i].spec = layer.spec;
        }
    }
    return out;
}

NetworkGraph build_lenet5_caffe(std::optional<GateKind> gate_kind, std::uint64_t seed,
                                const LeNetWidths& widths) {
    if (gate_kind && *gate_kind == GateKind::Linear)
        throw std::invalid_argument("lenet5_caffe has no BatchNorm, so linear gates do not apply");

    NetworkGraph net;
    net.model = "lenet5_caffe";
    net.input_shape = {1, 28, 28};
    net.rng.seed(static_cast<std::mt19937::result_type>(seed));
    std::mt19937 init_rng(static_cast<std::mt19937::result_type>(seed));

    const int c1 = widths.conv1, c2 = widths.conv2, f1 = widths.fc1;
    const int flat = c2 * 4 * 4;  // 28 -> conv5 -> 24 -> pool -> 12 -> conv5 -> 8 -> pool -> 4

    auto add_gate = [&](const std::string& name, int channels, int producer) {
        if (!gate_kind) return;
        GateLayer gate;
        gate.kind = GateKind::Exponential;
        gate.params = Tensor::full({channels}, 1.0f, /*requires_grad=*/true);
        net.groups.push_back({name, static_cast<int>(net.layers.size()), producer});
        net.layers.push_back({name + "_gate", std::move(gate)});
    };

    net.layers.push_back({"conv1", ConvLayer{kaiming_uniform({c1, 1, 5, 5}, 1 * 5 * 5, init_rng)}});
    add_gate("conv1", c1, 0);
    net.layers.push_back({"relu1", ReluLayer{}});
    net.layers.push_back({"pool1", MaxPoolLayer{2, 2}});
    int conv2_idx = static_cast<int>(net.layers.size());
    net.layers.push_back({"conv2", ConvLayer{kaiming_uniform({c2, c1, 5, 5}, c1 * 5 * 5, init_rng)}});
    add_gate("conv2", c2, conv2_idx);
    net.layers.push_back({"relu2", ReluLayer{}});
    net.layers.push_back({"pool2", MaxPoolLayer{2, 2}});
    net.layers.push_back({"flatten", FlattenLayer{}});
    add_gate("flatten", flat, -1);
    int fc1_idx = static_cast<int>(net.layers.size());
    net.layers.push_back({"fc1", LinearLayer{kaiming_uniform({f1, flat}, flat, init_rng)}});
    add_gate("fc1", f1, fc1_idx);
    net.layers.push_back({"relu3", ReluLayer{}});
    net.layers.push_back({"fc2", LinearLayer{kaiming_uniform({10, f1}, f1, init_rng)}});
    return net;
}

NetworkGraph build_bn_testnet(GateKind gate_kind, std::uint64_t seed) {
    NetworkGraph net;
    net.model = "bn_testnet";
    net.input_shape = {1, 16, 16};
    net.rng.seed(static_cast<std::mt19937::result_type>(seed));
    std::mt19937 init_rng(static_cast<std::mt19937::result_type>(seed));

    const int channels[3] = {8, 16, 16};
    int in_c = 1;
    for (int b = 0; b < 3; ++b) {
        int out_c = channels[b];
        std::string tag = "conv" + std::to_string(b + 1);
        int conv_idx = static_cast<int>(net.layers.size());
        net.layers.push_back(
            {tag, ConvLayer{kaiming_uniform({out_c, in_c, 3, 3}, in_c * 3 * 3, init_rng), 1, 1}});

        BatchNormLayer bn;
        float gamma_init = gate_kind == GateKind::Linear ? 0.5f : 1.0f;
        bn.gamma = Tensor::full({out_c}, gamma_init, /*requires_grad=*/true);
        bn.beta = Tensor::zeros({out_c}, /*requires_grad=*/true);
        bn.state.running_mean.assign(static_cast<std::size_t>(out_c), 0.0f);
        bn.state.running_var.assign(static_cast<std::size_t>(out_c), 1.0f);

        GateLayer gate;
        gate.kind = gate_kind;
        gate.params = gate_kind == GateKind::Linear
                          ? bn.gamma
                          : Tensor::full({out_c}, 1.0f, /*requires_grad=*/true);

        net.groups.push_back({tag, static_cast<int>(net.layers.size()), conv_idx});
        net.layers.push_back({tag + "_gate", std::move(gate)});
        net.layers.push_back({"bn" + std::to_string(b + 1), std::move(bn)});
        net.layers.push_back({"relu" + std::to_string(b + 1), ReluLayer{}});
        in_c = out_c;
    }
    net.layers.push_back({"gap", GlobalAvgPoolLayer{}});
    net.layers.push_back({"head", LinearLayer{kaiming_uniform({10, in_c}, in_c, init_rng)}});
    return net;
}

}  // namespace gateprune
