#include "gateprune/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace gateprune {

namespace {

constexpr unsigned char kFormatVersion = 1;

using nlohmann::json;

json reg_to_json(const RegularizerSpec& reg) {
    json j;
    j["kind"] = reg.kind == RegKind::L2 ? "l2" : (reg.kind == RegKind::L1 ? "l1" : "bounded_l1");
    j["lambda1"] = reg.lambda1;
    j["lambda2"] = reg.lambda2;
    j["sigma"] = reg.sigma;
    if (reg.sigma_schedule) {
        const SigmaSchedule& s = *reg.sigma_schedule;
        j["sigma_schedule"] = {
            {"mode", s.mode == SigmaSchedule::Mode::ExpDecay ? "exp_decay" : "step_then_exp"},
            {"initial", s.initial},
            {"decay_rate", s.decay_rate},
            {"step_delta", s.step_delta},
            {"floor", s.floor},
        };
    } else {
        j["sigma_schedule"] = nullptr;
    }
    json steps = json::array();
    for (const LambdaStep& s : reg.lambda_schedule) steps.push_back({s.epoch, s.lambda});
    j["lambda_steps"] = steps;
    return j;
}

RegularizerSpec reg_from_json(const json& j) {
    RegularizerSpec reg;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "l2")
        reg.kind = RegKind::L2;
    else if (kind == "l1")
        reg.kind = RegKind::L1;
    else if (kind == "bounded_l1")
        reg.kind = RegKind::BoundedL1;
    else
        throw CheckpointError("unknown regularizer kind '" + kind + "'");
    reg.lambda1 = j.at("lambda1").get<double>();
    reg.lambda2 = j.at("lambda2").get<double>();
    reg.sigma = j.at("sigma").get<double>();
    if (!j.at("sigma_schedule").is_null()) {
        const json& s = j.at("sigma_schedule");
        SigmaSchedule sched;
        sched.mode = s.at("mode").get<std::string>() == "exp_decay" ? SigmaSchedule::Mode::ExpDecay
                                                                    : SigmaSchedule::Mode::StepThenExp;
        sched.initial = s.at("initial").get<double>();
        sched.decay_rate = s.at("decay_rate").get<double>();
        sched.step_delta = s.at("step_delta").get<double>();
        sched.floor = s.at("floor").get<double>();
        reg.sigma_schedule = sched;
    }
    for (const auto& s : j.at("lambda_steps"))
        reg.lambda_schedule.push_back({s.at(0).get<int>(), s.at(1).get<double>()});
    return reg;
}

struct TensorEntry {
    std::string name;
    const float* data;
    std::size_t count;
    std::vector<int> shape;
};

void append_u64_le(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

}  // namespace

void save_checkpoint(const NetworkGraph& net, const CheckpointManifest& manifest,
                     const std::filesystem::path& path) {
    json arch;
    arch["input_shape"] = net.input_shape;
    json layers = json::array();
    std::vector<TensorEntry> tensors;

    auto add_tensor = [&tensors](const std::string& name, const Tensor& t) {
        tensors.push_back({name, t.data().data(), t.numel(), t.shape()});
    };

    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& layer = net.layers[i];
        json jl;
        jl["name"] = layer.name;
        if (const auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            jl["kind"] = "conv";
            jl["stride"] = conv->stride;
            jl["padding"] = conv->padding;
            add_tensor(layer.name + ".weight", conv->weight);
        } else if (const auto* lin = std::get_if<LinearLayer>(&layer.spec)) {
            jl["kind"] = "linear";
            add_tensor(layer.name + ".weight", lin->weight);
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer.spec)) {
            jl["kind"] = "batch_norm";
            jl["momentum"] = bn->momentum;
            jl["eps"] = bn->eps;
            add_tensor(layer.name + ".gamma", bn->gamma);
            add_tensor(layer.name + ".beta", bn->beta);
            tensors.push_back({layer.name + ".running_mean", bn->state.running_mean.data(),
                               bn->state.running_mean.size(),
                               {static_cast<int>(bn->state.running_mean.size())}});
            tensors.push_back({layer.name + ".running_var", bn->state.running_var.data(),
                               bn->state.running_var.size(),
                               {static_cast<int>(bn->state.running_var.size())}});
        } else if (const auto* gate = std::get_if<GateLayer>(&layer.spec)) {
            jl["kind"] = "gate";
            jl["channels"] = gate->channels();
            if (gate->kind == GateKind::Exponential) {
                jl["gate_kind"] = "exponential";
                add_tensor(layer.name + ".params", gate->params);
            } else {
                jl["gate_kind"] = "linear";
                // find the BN whose gamma this gate aliases
                int alias = -1;
                for (std::size_t j = 0; j < net.layers.size(); ++j)
                    if (const auto* bn = std::get_if<BatchNormLayer>(&net.layers[j].spec))
                        if (bn->gamma.impl().get() == gate->params.impl().get()) alias = static_cast<int>(j);
                if (alias < 0) throw CheckpointError("linear gate '" + layer.name + "' aliases no BN gamma");
                jl["alias_bn_layer"] = alias;
            }
        } else if (std::holds_alternative<ReluLayer>(layer.spec)) {
            jl["kind"] = "relu";
        } else if (const auto* pool = std::get_if<MaxPoolLayer>(&layer.spec)) {
            jl["kind"] = "max_pool";
            jl["kernel"] = pool->kernel;
            jl["stride"] = pool->stride;
        } else if (std::holds_alternative<GlobalAvgPoolLayer>(layer.spec)) {
            jl["kind"] = "global_avg_pool";
        } else if (std::holds_alternative<FlattenLayer>(layer.spec)) {
            jl["kind"] = "flatten";
        } else if (const auto* drop = std::get_if<DropoutLayer>(&layer.spec)) {
            jl["kind"] = "dropout";
            jl["rate"] = drop->rate;
        }
        layers.push_back(std::move(jl));
    }
    arch["layers"] = std::move(layers);

    json groups = json::array();
    for (const PrunableGroup& g : net.groups)
        groups.push_back({{"name", g.name}, {"gate_layer", g.gate_layer}, {"producer_layer", g.producer_layer}});
    arch["groups"] = std::move(groups);

    std::string blob;
    for (const TensorEntry& t : tensors) {
        std::size_t off = blob.size();
        blob.resize(off + t.count * sizeof(float));
        std::memcpy(blob.data() + off, t.data, t.count * sizeof(float));
    }
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(blob.data()), static_cast<uInt>(blob.size()));

    json j;
    j["format_version"] = kFormatVersion;
    j["model"] = manifest.model.empty() ? net.model : manifest.model;
    j["epoch"] = manifest.epoch;
    j["seed"] = manifest.seed;
    j["regularizer"] = reg_to_json(manifest.reg);
    j["metrics"] = manifest.metrics;
    j["architecture"] = std::move(arch);
    json table = json::array();
    for (const TensorEntry& t : tensors) table.push_back({{"name", t.name}, {"shape", t.shape}});
    j["tensors"] = std::move(table);
    j["blob_bytes"] = blob.size();
    j["blob_crc32"] = static_cast<std::uint32_t>(crc);

    std::string text = j.dump();
    std::string out;
    out.push_back(static_cast<char>(kFormatVersion));
    append_u64_le(out, text.size());
    out += text;
    out += blob;

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw CheckpointError("cannot write " + tmp.string());
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw CheckpointError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 9) throw CheckpointError("file too short: " + path.string());
    if (bytes[0] != kFormatVersion)
        throw CheckpointError("format version mismatch: got " + std::to_string(bytes[0]) + ", want " +
                              std::to_string(kFormatVersion));
    std::uint64_t mlen = read_u64_le(bytes.data() + 1);
    if (9 + mlen > bytes.size()) throw CheckpointError("manifest length exceeds file size");
    json j;
    try {
        j = json::parse(bytes.begin() + 9, bytes.begin() + 9 + static_cast<std::ptrdiff_t>(mlen));
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("manifest parse failure: ") + e.what());
    }

    const unsigned char* blob = bytes.data() + 9 + mlen;
    std::size_t blob_size = bytes.size() - 9 - mlen;
    if (blob_size != j.at("blob_bytes").get<std::size_t>())
        throw CheckpointError("blob length mismatch: got " + std::to_string(blob_size) + " bytes, want " +
                              std::to_string(j.at("blob_bytes").get<std::size_t>()));
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(blob), static_cast<uInt>(blob_size));
    if (static_cast<std::uint32_t>(crc) != j.at("blob_crc32").get<std::uint32_t>())
        throw CheckpointError("blob checksum mismatch");

    LoadedCheckpoint out;
    out.manifest.model = j.at("model").get<std::string>();
    out.manifest.epoch = j.at("epoch").get<int>();
    out.manifest.seed = j.at("seed").get<std::uint64_t>();
    out.manifest.reg = reg_from_json(j.at("regularizer"));
    if (j.contains("metrics"))
        out.manifest.metrics = j.at("metrics").get<std::map<std::string, double>>();

    NetworkGraph& net = out.net;
    net.model = out.manifest.model;
    const json& arch = j.at("architecture");
    net.input_shape = arch.at("input_shape").get<std::vector<int>>();
    net.rng.seed(static_cast<std::mt19937::result_type>(out.manifest.seed));

    // Tensor table drives blob offsets.
    struct Pending {
        std::vector<int> shape;
        const unsigned char* bytes;
    };
    std::map<std::string, Pending> table;
    std::size_t off = 0;
    for (const auto& t : j.at("tensors")) {
        std::vector<int> shape = t.at("shape").get<std::vector<int>>();
        std::size_t count = shape_numel(shape);
        if (off + count * sizeof(float) > blob_size)
            throw CheckpointError("tensor '" + t.at("name").get<std::string>() + "' overruns blob");
        table[t.at("name").get<std::string>()] = {std::move(shape), blob + off};
        off += count * sizeof(float);
    }
    auto take = [&table](const std::string& name, bool requires_grad) {
        auto it = table.find(name);
        if (it == table.end()) throw CheckpointError("missing tensor '" + name + "'");
        std::size_t count = shape_numel(it->second.shape);
        std::vector<float> values(count);
        std::memcpy(values.data(), it->second.bytes, count * sizeof(float));
        return Tensor::from_data(it->second.shape, std::move(values), requires_grad);
    };
    auto take_floats = [&table](const std::string& name) {
        auto it = table.find(name);
        if (it == table.end()) throw CheckpointError("missing tensor '" + name + "'");
        std::size_t count = shape_numel(it->second.shape);
        std::vector<float> values(count);
        std::memcpy(values.data(), it->second.bytes, count * sizeof(float));
        return values;
    };

    std::vector<int> linear_gate_alias;  // parallel arrays: layer idx, bn idx
    std::vector<int> linear_gate_idx;
    for (const auto& jl : arch.at("layers")) {
        std::string kind = jl.at("kind").get<std::string>();
        std::string name = jl.at("name").get<std::string>();
        if (kind == "conv") {
            net.layers.push_back({name, ConvLayer{take(name + ".weight", true), jl.at("stride").get<int>(),
                                                  jl.at("padding").get<int>()}});
        } else if (kind == "linear") {
            net.layers.push_back({name, LinearLayer{take(name + ".weight", true)}});
        } else if (kind == "batch_norm") {
            BatchNormLayer bn;
            bn.gamma = take(name + ".gamma", true);
            bn.beta = take(name + ".beta", true);
            bn.state.running_mean = take_floats(name + ".running_mean");
            bn.state.running_var = take_floats(name + ".running_var");
            bn.momentum = jl.at("momentum").get<float>();
            bn.eps = jl.at("eps").get<float>();
            net.layers.push_back({name, std::move(bn)});
        } else if (kind == "gate") {
            GateLayer gate;
            if (jl.at("gate_kind").get<std::string>() == "exponential") {
                gate.kind = GateKind::Exponential;
                gate.params = take(name + ".params", true);
            } else {
                gate.kind = GateKind::Linear;
                linear_gate_idx.push_back(static_cast<int>(net.layers.size()));
                linear_gate_alias.push_back(jl.at("alias_bn_layer").get<int>());
                gate.params = Tensor::zeros({jl.at("channels").get<int>()});  // re-aliased below
            }
            net.layers.push_back({name, std::move(gate)});
        } else if (kind == "relu") {
            net.layers.push_back({name, ReluLayer{}});
        } else if (kind == "max_pool") {
            net.layers.push_back({name, MaxPoolLayer{jl.at("kernel").get<int>(), jl.at("stride").get<int>()}});
        } else if (kind == "global_avg_pool") {
            net.layers.push_back({name, GlobalAvgPoolLayer{}});
        } else if (kind == "flatten") {
            net.layers.push_back({name, FlattenLayer{}});
        } else if (kind == "dropout") {
            net.layers.push_back({name, DropoutLayer{jl.at("rate").get<float>()}});
        } else {
            throw CheckpointError("unknown layer kind '" + kind + "'");
        }
    }
    for (std::size_t i = 0; i < linear_gate_idx.size(); ++i) {
        auto& gate = std::get<GateLayer>(net.layers[static_cast<std::size_t>(linear_gate_idx[i])].spec);
        auto* bn = std::get_if<BatchNormLayer>(&net.layers.at(static_cast<std::size_t>(linear_gate_alias[i])).spec);
        if (!bn) throw CheckpointError("linear gate alias target is not a batch_norm layer");
        gate.params = bn->gamma;
    }

    for (const auto& jg : arch.at("groups"))
        net.groups.push_back({jg.at("name").get<std::string>(), jg.at("gate_layer").get<int>(),
                              jg.at("producer_layer").get<int>()});
    net.set_mode(Mode::Eval);
    return out;
}

}  // namespace gateprune
