#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "gateprune/gating.hpp"
#include "gateprune/ops.hpp"
#include "gateprune/tensor.hpp"

namespace gateprune {

struct ConvLayer {
    Tensor weight;  // [Cout,Cin,kh,kw]
    int stride = 1;
    int padding = 0;
};

struct LinearLayer {
    Tensor weight;  // [O,F]
};

struct BatchNormLayer {
    Tensor gamma;
    Tensor beta;
    BatchNormState state;
    float momentum = 0.1f;
    float eps = 1e-5f;
};

struct ReluLayer {};
struct MaxPoolLayer {
    int kernel = 2;
    int stride = 2;
};
struct GlobalAvgPoolLayer {};
struct FlattenLayer {};
struct DropoutLayer {
    float rate = 0.5f;
};

using LayerSpec = std::variant<ConvLayer, LinearLayer, BatchNormLayer, GateLayer, ReluLayer,
                               MaxPoolLayer, GlobalAvgPoolLayer, FlattenLayer, DropoutLayer>;

struct Layer {
    std::string name;
    LayerSpec spec;
};

// One gate and the channels it controls. `producer_layer` is the conv/linear
// whose output channels the gate scales; -1 when the gate sits on flattened
// units with no weight slice of its own upstream. Consumer slices follow from
// layer order during compaction.
struct PrunableGroup {
    std::string name;
    int gate_layer = -1;
    int producer_layer = -1;
};

struct NetworkGraph {
    std::string model;
    std::vector<int> input_shape;  // per sample, e.g. {1,28,28}
    std::vector<Layer> layers;
    std::vector<PrunableGroup> groups;
    Mode mode = Mode::Train;
    std::mt19937 rng{0};  // dropout only; reseeded from config on load

    Tensor forward(const Tensor& input);
    void set_mode(Mode m) { mode = m; }

    // All trainable parameters in layer order. Linear gates alias BN gamma and
    // are not listed twice.
    std::vector<Tensor> parameters();
    // The regularized parameter tensor of each group, in group order.
    std::vector<Tensor> gate_params();
    std::vector<int> group_channel_counts() const;

    const GateLayer& gate_of(const PrunableGroup& g) const;
    GateLayer& gate_of(const PrunableGroup& g);

    NetworkGraph clone() const;
};

struct LeNetWidths {
    int conv1 = 20;
    int conv2 = 50;
    int fc1 = 500;
};

// conv(5x5) -> gate -> relu -> pool2 -> conv(5x5) -> gate -> relu -> pool2 ->
// flatten -> gate -> fc -> gate -> relu -> fc(10). No biases, no BN. Four
// prunable groups sized (conv1, conv2, conv2*16, fc1). gate_kind nullopt
// builds the plain ungated network.
NetworkGraph build_lenet5_caffe(std::optional<GateKind> gate_kind, std::uint64_t seed,
                                const LeNetWidths& widths = {});

// Three conv(3x3,pad 1) -> gate -> BN -> relu blocks with 8,16,16 channels,
// then global average pool and a linear head; 16x16 single-channel input.
// With linear gates the gate parameters alias the BN scale.
NetworkGraph build_bn_testnet(GateKind gate_kind, std::uint64_t seed);

}  // namespace gateprune
