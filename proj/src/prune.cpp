#include "gateprune/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "gateprune/trainer.hpp"

namespace gateprune {

namespace {

std::vector<int> iota_vec(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

std::vector<int> complement(const std::vector<int>& kept, int n) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n) - kept.size());
    std::size_t j = 0;
    for (int i = 0; i < n; ++i) {
        if (j < kept.size() && kept[j] == i) {
            ++j;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

void validate_selection(const NetworkGraph& net, const Selection& sel) {
    if (sel.kept.size() != net.groups.size())
        throw ShapeError("selection covers " + std::to_string(sel.kept.size()) + " groups, network has " +
                         std::to_string(net.groups.size()));
    for (std::size_t gi = 0; gi < net.groups.size(); ++gi) {
        int channels = net.gate_of(net.groups[gi]).channels();
        const auto& kept = sel.kept[gi];
        if (!std::is_sorted(kept.begin(), kept.end()))
            throw ShapeError("selection for group '" + net.groups[gi].name + "' is not sorted");
        for (int k : kept)
            if (k < 0 || k >= channels)
                throw ShapeError("selection index " + std::to_string(k) + " out of range for group '" +
                                 net.groups[gi].name + "' with " + std::to_string(channels) + " channels");
    }
}

Tensor slice_conv_weight(const Tensor& w, const std::vector<int>& out_keep,
                         const std::vector<int>& in_keep) {
    const int kh = w.dim(2), kw = w.dim(3);
    const std::size_t k = static_cast<std::size_t>(kh) * kw;
    Tensor out = Tensor::zeros({static_cast<int>(out_keep.size()), static_cast<int>(in_keep.size()), kh, kw},
                               /*requires_grad=*/true);
    const float* src = w.data().data();
    float* dst = out.data().data();
    const std::size_t src_ci = static_cast<std::size_t>(w.dim(1));
    for (std::size_t a = 0; a < out_keep.size(); ++a)
        for (std::size_t b = 0; b < in_keep.size(); ++b)
            std::copy_n(src + ((out_keep[a] * src_ci) + in_keep[b]) * k, k,
                        dst + ((a * in_keep.size()) + b) * k);
    return out;
}

Tensor slice_linear_weight(const Tensor& w, const std::vector<int>& out_keep,
                           const std::vector<int>& in_keep) {
    Tensor out = Tensor::zeros({static_cast<int>(out_keep.size()), static_cast<int>(in_keep.size())},
                               /*requires_grad=*/true);
    const float* src = w.data().data();
    float* dst = out.data().data();
    const std::size_t f = static_cast<std::size_t>(w.dim(1));
    for (std::size_t a = 0; a < out_keep.size(); ++a)
        for (std::size_t b = 0; b < in_keep.size(); ++b)
            dst[a * in_keep.size() + b] = src[out_keep[a] * f + in_keep[b]];
    return out;
}

Tensor slice_param_vector(const Tensor& v, const std::vector<int>& keep) {
    Tensor out = Tensor::zeros({static_cast<int>(keep.size())}, /*requires_grad=*/true);
    for (std::size_t i = 0; i < keep.size(); ++i) out.at(i) = v.at(static_cast<std::size_t>(keep[i]));
    return out;
}

std::vector<float> slice_floats(const std::vector<float>& v, const std::vector<int>& keep) {
    std::vector<float> out(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) out[i] = v[static_cast<std::size_t>(keep[i])];
    return out;
}

}  // namespace

double default_threshold(GateKind kind) { return kind == GateKind::Exponential ? 0.0 : 1e-4; }

Selection threshold_selection(const NetworkGraph& net, double threshold) {
    if (threshold < 0.0) throw ShapeError("threshold must be >= 0");
    Selection sel;
    sel.kept.resize(net.groups.size());
    sel.removed.resize(net.groups.size());
    for (std::size_t gi = 0; gi < net.groups.size(); ++gi) {
        const GateLayer& gate = net.gate_of(net.groups[gi]);
        for (int k = 0; k < gate.channels(); ++k) {
            if (static_cast<double>(gate_value(gate, k)) > threshold)
                sel.kept[gi].push_back(k);
            else
                sel.removed[gi].push_back(k);
        }
    }
    return sel;
}

Selection select_channels(const NetworkGraph& net, double threshold) {
    Selection sel = threshold_selection(net, threshold);
    for (std::size_t gi = 0; gi < net.groups.size(); ++gi)
        if (sel.kept[gi].empty()) throw DeadLayerError(net.groups[gi].name);
    return sel;
}

CompactionPlan plan_compaction(const NetworkGraph& net, const Selection& sel) {
    validate_selection(net, sel);

    std::vector<int> gate_group(net.layers.size(), -1);
    std::vector<int> producer_group(net.layers.size(), -1);
    for (std::size_t gi = 0; gi < net.groups.size(); ++gi) {
        gate_group[static_cast<std::size_t>(net.groups[gi].gate_layer)] = static_cast<int>(gi);
        if (net.groups[gi].producer_layer >= 0)
            producer_group[static_cast<std::size_t>(net.groups[gi].producer_layer)] = static_cast<int>(gi);
    }

    CompactionPlan plan;
    plan.layers.resize(net.layers.size());
    plan.group_kept.resize(net.groups.size());

    std::vector<int> mask = iota_vec(net.input_shape.at(0));
    int h = net.input_shape.at(1), w = net.input_shape.at(2);

    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& lp = plan.layers[i];
        const Layer& layer = net.layers[i];
        if (const auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            lp.in_keep = mask;
            int gi = producer_group[i];
            lp.out_keep = gi >= 0 ? sel.kept[static_cast<std::size_t>(gi)] : iota_vec(conv->weight.dim(0));
            h = (h + 2 * conv->padding - conv->weight.dim(2)) / conv->stride + 1;
            w = (w + 2 * conv->padding - conv->weight.dim(3)) / conv->stride + 1;
            mask = lp.out_keep;
        } else if (const auto* lin = std::get_if<LinearLayer>(&layer.spec)) {
            lp.in_keep = mask;
            int gi = producer_group[i];
            lp.out_keep = gi >= 0 ? sel.kept[static_cast<std::size_t>(gi)] : iota_vec(lin->weight.dim(0));
            mask = lp.out_keep;
        } else if (std::holds_alternative<BatchNormLayer>(layer.spec)) {
            lp.out_keep = mask;
        } else if (std::holds_alternative<GateLayer>(layer.spec)) {
            int gi = gate_group[i];
            if (gi < 0) throw std::logic_error("gate layer '" + layer.name + "' belongs to no group");
            const PrunableGroup& group = net.groups[static_cast<std::size_t>(gi)];
            if (group.producer_layer >= 0) {
                if (mask != sel.kept[static_cast<std::size_t>(gi)])
                    throw std::logic_error("group '" + group.name + "': producer selection out of sync");
                lp.out_keep = mask;
            } else {
                // Units whose upstream channel is gone cannot be kept.
                const auto& own = sel.kept[static_cast<std::size_t>(gi)];
                lp.out_keep.clear();
                std::set_intersection(own.begin(), own.end(), mask.begin(), mask.end(),
                                      std::back_inserter(lp.out_keep));
                mask = lp.out_keep;
            }
            plan.group_kept[static_cast<std::size_t>(gi)] = lp.out_keep;
            if (lp.out_keep.empty()) plan.dead_groups.push_back(group.name);
        } else if (const auto* pool = std::get_if<MaxPoolLayer>(&layer.spec)) {
            h = (h - pool->kernel) / pool->stride + 1;
            w = (w - pool->kernel) / pool->stride + 1;
        } else if (std::holds_alternative<GlobalAvgPoolLayer>(layer.spec)) {
            h = 1;
            w = 1;
        } else if (std::holds_alternative<FlattenLayer>(layer.spec)) {
            const int plane = h * w;
            std::vector<int> units;
            units.reserve(mask.size() * static_cast<std::size_t>(plane));
            for (int c : mask)
                for (int j = 0; j < plane; ++j) units.push_back(c * plane + j);
            mask = std::move(units);
        }
        lp.out_h = h;
        lp.out_w = w;
    }
    return plan;
}

CompactResult compact(const NetworkGraph& net, const Selection& sel) {
    CompactionPlan plan = plan_compaction(net, sel);
    if (!plan.dead_groups.empty()) throw DeadLayerError(plan.dead_groups.front());

    NetworkGraph out;
    out.model = net.model;
    out.input_shape = net.input_shape;
    out.groups = net.groups;
    out.mode = net.mode;
    out.rng = net.rng;
    out.layers.reserve(net.layers.size());

    std::unordered_map<const TensorImpl*, Tensor> gamma_map;  // original gamma -> sliced gamma
    std::vector<std::size_t> linear_gate_layers;

    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& layer = net.layers[i];
        const auto& lp = plan.layers[i];
        if (const auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            out.layers.push_back({layer.name, ConvLayer{slice_conv_weight(conv->weight, lp.out_keep, lp.in_keep),
                                                        conv->stride, conv->padding}});
        } else if (const auto* lin = std::get_if<LinearLayer>(&layer.spec)) {
            out.layers.push_back(
                {layer.name, LinearLayer{slice_linear_weight(lin->weight, lp.out_keep, lp.in_keep)}});
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer.spec)) {
            BatchNormLayer nb;
            nb.gamma = slice_param_vector(bn->gamma, lp.out_keep);
            nb.beta = slice_param_vector(bn->beta, lp.out_keep);
            nb.state.running_mean = slice_floats(bn->state.running_mean, lp.out_keep);
            nb.state.running_var = slice_floats(bn->state.running_var, lp.out_keep);
            nb.momentum = bn->momentum;
            nb.eps = bn->eps;
            gamma_map.emplace(bn->gamma.impl().get(), nb.gamma);
            out.layers.push_back({layer.name, std::move(nb)});
        } else if (const auto* gate = std::get_if<GateLayer>(&layer.spec)) {
            GateLayer ng;
            ng.kind = gate->kind;
            if (gate->kind == GateKind::Exponential) {
                ng.params = slice_param_vector(gate->params, lp.out_keep);
            } else {
                linear_gate_layers.push_back(out.layers.size());
                ng.params = gate->params;  // re-aliased below once BN is sliced
            }
            out.layers.push_back({layer.name, std::move(ng)});
        } else {
            out.layers.push_back(layer);
        }
    }

    for (std::size_t li : linear_gate_layers) {
        auto& gate = std::get<GateLayer>(out.layers[li].spec);
        auto it = gamma_map.find(gate.params.impl().get());
        if (it == gamma_map.end())
            throw std::logic_error("compact: linear gate does not alias any BN gamma");
        gate.params = it->second;
    }

    return {std::move(out), plan.group_kept};
}

NetworkGraph merge_gates(const NetworkGraph& net) {
    NetworkGraph out;
    out.model = net.model;
    out.input_shape = net.input_shape;
    out.mode = net.mode;
    out.rng = net.rng;

    std::vector<int> gate_group(net.layers.size(), -1);
    for (std::size_t gi = 0; gi < net.groups.size(); ++gi)
        gate_group[static_cast<std::size_t>(net.groups[gi].gate_layer)] = static_cast<int>(gi);

    // Copy non-gate layers first; fold factors into the copies.
    std::vector<int> new_index(net.layers.size(), -1);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& layer = net.layers[i];
        if (std::holds_alternative<GateLayer>(layer.spec)) continue;
        new_index[i] = static_cast<int>(out.layers.size());
        if (const auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            out.layers.push_back({layer.name, ConvLayer{conv->weight.clone(), conv->stride, conv->padding}});
        } else if (const auto* lin = std::get_if<LinearLayer>(&layer.spec)) {
            out.layers.push_back({layer.name, LinearLayer{lin->weight.clone()}});
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer.spec)) {
            BatchNormLayer nb;
            nb.gamma = bn->gamma.clone();
            nb.beta = bn->beta.clone();
            nb.state = bn->state;
            nb.momentum = bn->momentum;
            nb.eps = bn->eps;
            out.layers.push_back({layer.name, std::move(nb)});
        } else {
            out.layers.push_back(layer);
        }
    }

    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto* gate = std::get_if<GateLayer>(&net.layers[i].spec);
        if (!gate) continue;
        if (gate->kind == GateKind::Linear) continue;  // scale already lives in BN gamma

        int gi = gate_group[i];
        if (gi < 0) throw std::logic_error("gate layer '" + net.layers[i].name + "' belongs to no group");
        const PrunableGroup& group = net.groups[static_cast<std::size_t>(gi)];
        std::vector<float> factor(static_cast<std::size_t>(gate->channels()));
        for (int k = 0; k < gate->channels(); ++k) factor[static_cast<std::size_t>(k)] = exp_gate_factor(gate->params.at(static_cast<std::size_t>(k)));

        // A BN between the gate and the next conv/linear absorbs the factor;
        // otherwise it folds into the producer rows (or, for gates on
        // flattened units, into the consumer columns).
        int bn_layer = -1;
        int next_linear = -1;
        for (std::size_t j = i + 1; j < net.layers.size(); ++j) {
            if (std::holds_alternative<BatchNormLayer>(net.layers[j].spec)) {
                bn_layer = new_index[j];
                break;
            }
            if (std::holds_alternative<LinearLayer>(net.layers[j].spec)) {
                next_linear = new_index[j];
                break;
            }
            if (std::holds_alternative<ConvLayer>(net.layers[j].spec)) break;
        }

        if (bn_layer >= 0) {
            auto& bn = std::get<BatchNormLayer>(out.layers[static_cast<std::size_t>(bn_layer)].spec);
            for (std::size_t c = 0; c < factor.size(); ++c) {
                float f = factor[c];
                if (f <= 0.0f)
                    throw std::logic_error("merge_gates: zero factor on unpruned BN channel of group '" +
                                           group.name + "'");
                float rv = bn.state.running_var[c];
                bn.gamma.at(c) *= std::sqrt((rv + f * f * bn.eps) / (rv + bn.eps));
                bn.state.running_mean[c] /= f;
                bn.state.running_var[c] = rv / (f * f);
            }
        } else if (group.producer_layer >= 0) {
            Layer& prod = out.layers[static_cast<std::size_t>(new_index[static_cast<std::size_t>(group.producer_layer)])];
            if (auto* conv = std::get_if<ConvLayer>(&prod.spec)) {
                const std::size_t row = conv->weight.numel() / static_cast<std::size_t>(conv->weight.dim(0));
                float* p = conv->weight.data().data();
                for (std::size_t c = 0; c < factor.size(); ++c)
                    for (std::size_t r = 0; r < row; ++r) p[c * row + r] *= factor[c];
            } else if (auto* lin = std::get_if<LinearLayer>(&prod.spec)) {
                const std::size_t row = static_cast<std::size_t>(lin->weight.dim(1));
                float* p = lin->weight.data().data();
                for (std::size_t c = 0; c < factor.size(); ++c)
                    for (std::size_t r = 0; r < row; ++r) p[c * row + r] *= factor[c];
            } else {
                throw std::logic_error("merge_gates: producer of group '" + group.name +
                                       "' is not a conv or linear layer");
            }
        } else if (next_linear >= 0) {
            auto& lin = std::get<LinearLayer>(out.layers[static_cast<std::size_t>(next_linear)].spec);
            if (lin.weight.dim(1) != gate->channels())
                throw ShapeError("merge_gates: consumer of group '" + group.name + "' expects " +
                                 std::to_string(lin.weight.dim(1)) + " inputs, gate has " +
                                 std::to_string(gate->channels()));
            float* p = lin.weight.data().data();
            const std::size_t f = static_cast<std::size_t>(lin.weight.dim(1));
            for (int o = 0; o < lin.weight.dim(0); ++o)
                for (std::size_t c = 0; c < factor.size(); ++c) p[o * f + c] *= factor[c];
        } else {
            throw std::logic_error("merge_gates: no fold target for group '" + group.name + "'");
        }
    }

    return out;
}

long long count_params(const NetworkGraph& net) {
    long long n = 0;
    for (const Layer& layer : net.layers) {
        if (const auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            n += static_cast<long long>(conv->weight.numel());
        } else if (const auto* lin = std::get_if<LinearLayer>(&layer.spec)) {
            n += static_cast<long long>(lin->weight.numel());
        } else if (const auto* bn = std::get_if<BatchNormLayer>(&layer.spec)) {
            n += static_cast<long long>(bn->gamma.numel() + bn->beta.numel());
        } else if (const auto* gate = std::get_if<GateLayer>(&layer.spec)) {
            if (gate->kind == GateKind::Exponential) n += static_cast<long long>(gate->params.numel());
        }
    }
    return n;
}

long long count_flops(const NetworkGraph& net) {
    long long flops = 0;
    int h = net.input_shape.at(1), w = net.input_shape.at(2);
    for (const Layer& layer : net.layers) {
        if (const auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            int kh = conv->weight.dim(2), kw = conv->weight.dim(3);
            h = (h + 2 * conv->padding - kh) / conv->stride + 1;
            w = (w + 2 * conv->padding - kw) / conv->stride + 1;
            flops += 2LL * kh * kw * conv->weight.dim(1) * conv->weight.dim(0) * h * w;
        } else if (const auto* lin = std::get_if<LinearLayer>(&layer.spec)) {
            flops += 2LL * lin->weight.dim(0) * lin->weight.dim(1);
        } else if (const auto* pool = std::get_if<MaxPoolLayer>(&layer.spec)) {
            h = (h - pool->kernel) / pool->stride + 1;
            w = (w - pool->kernel) / pool->stride + 1;
        } else if (std::holds_alternative<GlobalAvgPoolLayer>(layer.spec)) {
            h = 1;
            w = 1;
        }
    }
    return flops;
}

PrunedCounts pruned_counts(const NetworkGraph& net, const Selection& sel) {
    CompactionPlan plan = plan_compaction(net, sel);
    PrunedCounts out;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const Layer& layer = net.layers[i];
        const auto& lp = plan.layers[i];
        if (const auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            long long ci = static_cast<long long>(lp.in_keep.size());
            long long co = static_cast<long long>(lp.out_keep.size());
            long long kh = conv->weight.dim(2), kw = conv->weight.dim(3);
            out.params += kh * kw * ci * co;
            out.flops += 2LL * kh * kw * ci * co * lp.out_h * lp.out_w;
        } else if (std::holds_alternative<LinearLayer>(layer.spec)) {
            long long ci = static_cast<long long>(lp.in_keep.size());
            long long co = static_cast<long long>(lp.out_keep.size());
            out.params += ci * co;
            out.flops += 2LL * ci * co;
        } else if (std::holds_alternative<BatchNormLayer>(layer.spec)) {
            out.params += 2LL * static_cast<long long>(lp.out_keep.size());
        }
        // gates fold away in the deployed network
    }
    return out;
}

double pruning_rate_at(const NetworkGraph& net, double threshold) {
    if (net.groups.empty()) return 0.0;
    Selection all;
    all.kept.resize(net.groups.size());
    for (std::size_t gi = 0; gi < net.groups.size(); ++gi)
        all.kept[gi] = iota_vec(net.gate_of(net.groups[gi]).channels());
    PrunedCounts before = pruned_counts(net, all);
    PrunedCounts after = pruned_counts(net, threshold_selection(net, threshold));
    if (before.params == 0) return 0.0;
    return 1.0 - static_cast<double>(after.params) / static_cast<double>(before.params);
}

std::string architecture_signature(const std::vector<std::vector<int>>& kept) {
    std::ostringstream os;
    for (std::size_t i = 0; i < kept.size(); ++i) {
        if (i) os << '-';
        os << kept[i].size();
    }
    return os.str();
}

PruneOutcome prune_network(const NetworkGraph& net, double threshold) {
    Selection sel = select_channels(net, threshold);
    CompactResult cr = compact(net, sel);  // throws DeadLayerError if a group empties out
    NetworkGraph merged = merge_gates(cr.net);

    NetworkGraph base = merge_gates(net);
    PruneReport report;
    for (const auto& g : net.groups) report.group_names.push_back(g.name);
    report.kept = cr.kept;
    for (std::size_t gi = 0; gi < cr.kept.size(); ++gi)
        report.removed.push_back(complement(cr.kept[gi], net.gate_of(net.groups[gi]).channels()));
    report.signature = architecture_signature(cr.kept);
    report.params_before = count_params(base);
    report.params_after = count_params(merged);
    report.flops_before = count_flops(base);
    report.flops_after = count_flops(merged);
    report.threshold = threshold;
    report.gate_kind = net.groups.empty() ? "none"
                       : (net.gate_of(net.groups.front()).kind == GateKind::Exponential ? "exponential"
                                                                                        : "linear");
    return {std::move(merged), std::move(report)};
}

std::string prune_report_json(const PruneReport& report) {
    nlohmann::json j;
    j["group_names"] = report.group_names;
    j["kept"] = report.kept;
    j["removed"] = report.removed;
    j["signature"] = report.signature;
    j["params_before"] = report.params_before;
    j["params_after"] = report.params_after;
    j["flops_before"] = report.flops_before;
    j["flops_after"] = report.flops_after;
    j["threshold"] = report.threshold;
    j["gate_kind"] = report.gate_kind;
    j["flop_convention"] = report.flop_convention;
    j["pruning_rate"] = report.pruning_rate();
    return j.dump(2);
}

PruneReport prune_report_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    PruneReport r;
    r.group_names = j.at("group_names").get<std::vector<std::string>>();
    r.kept = j.at("kept").get<std::vector<std::vector<int>>>();
    r.removed = j.at("removed").get<std::vector<std::vector<int>>>();
    r.signature = j.at("signature").get<std::string>();
    r.params_before = j.at("params_before").get<long long>();
    r.params_after = j.at("params_after").get<long long>();
    r.flops_before = j.at("flops_before").get<long long>();
    r.flops_after = j.at("flops_after").get<long long>();
    r.threshold = j.at("threshold").get<double>();
    r.gate_kind = j.at("gate_kind").get<std::string>();
    r.flop_convention = j.at("flop_convention").get<std::string>();
    return r;
}

NetworkGraph finetune(const NetworkGraph& net, const Dataset& train_data, const Dataset& test_data,
                      const FinetuneOptions& opts) {
    NetworkGraph work = net.clone();
    if (opts.epochs <= 0) return work;
    const int epochs = std::min(opts.epochs, 3);

    NetworkGraph best = work.clone();
    double best_error = evaluate_error(work, test_data);
    for (int e = 0; e < epochs; ++e) {
        TrainOptions topt;
        topt.epochs = 1;
        topt.start_epoch = e;
        topt.batch_size = opts.batch_size;
        topt.lr = opts.lr;
        topt.momentum = opts.momentum;
        topt.reg = RegularizerSpec{};  // no sparsity penalty, no weight decay
        topt.seed = opts.seed + static_cast<std::uint64_t>(e);
        auto metrics = train(work, train_data, test_data, topt);
        if (!metrics.empty() && metrics.back().test_error / 100.0 < best_error) {
            best_error = metrics.back().test_error / 100.0;
            best = work.clone();
        }
    }
    return best;
}

std::vector<SweepRow> threshold_sweep(const NetworkGraph& net, const Dataset& train_data,
                                      const Dataset& test_data, std::span<const double> thresholds,
                                      const FinetuneOptions& ft) {
    Selection all;
    all.kept.resize(net.groups.size());
    for (std::size_t gi = 0; gi < net.groups.size(); ++gi)
        all.kept[gi] = iota_vec(net.gate_of(net.groups[gi]).channels());
    const long long params_before = pruned_counts(net, all).params;

    std::vector<SweepRow> rows;
    for (double t : thresholds) {
        SweepRow row;
        row.threshold = t;
        Selection sel = threshold_selection(net, t);
        CompactionPlan plan = plan_compaction(net, sel);
        if (!plan.dead_groups.empty()) {
            row.dead = true;
            row.dead_group = plan.dead_groups.front();
            rows.push_back(std::move(row));
            continue;
        }
        CompactResult cr = compact(net, sel);
        NetworkGraph merged = merge_gates(cr.net);
        row.params_after = count_params(merged);
        row.flops_after = count_flops(merged);
        row.pruning_rate =
            params_before == 0 ? 0.0 : 1.0 - static_cast<double>(row.params_after) / static_cast<double>(params_before);
        row.accuracy_before_ft = 1.0 - evaluate_error(merged, test_data);
        if (ft.epochs > 0) {
            NetworkGraph tuned = finetune(merged, train_data, test_data, ft);
            row.accuracy_after_ft = 1.0 - evaluate_error(tuned, test_data);
        } else {
            row.accuracy_after_ft = row.accuracy_before_ft;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
    std::ostringstream os;
    os << "threshold,pruning_rate,params_after,flops_after,accuracy_before_ft,accuracy_after_ft\n";
    for (const SweepRow& r : rows) {
        if (r.dead) {
            os << r.threshold << ",removes all channels (" << r.dead_group << "),,,,\n";
            continue;
        }
        os << r.threshold << ',' << r.pruning_rate << ',' << r.params_after << ',' << r.flops_after << ','
           << r.accuracy_before_ft << ',' << r.accuracy_after_ft << '\n';
    }
    return os.str();
}

}  // namespace gateprune
