#include "gateprune/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "gateprune/ops.hpp"
#include "gateprune/prune.hpp"

namespace gateprune {

namespace {

double lr_for_epoch(const TrainOptions& opts, int epoch) {
    double lr = opts.lr;
    for (int m : opts.lr_milestones)
        if (epoch >= m) lr *= opts.lr_gamma;
    return lr;
}

}  // namespace

double evaluate_error(NetworkGraph& net, const Dataset& data, int batch_size) {
    NoGradGuard guard;
    Mode prev = net.mode;
    net.set_mode(Mode::Eval);
    int wrong = 0;
    const int n = data.size();
    std::vector<int> idx(static_cast<std::size_t>(batch_size));
    for (int b = 0; b < n; b += batch_size) {
        int count = std::min(batch_size, n - b);
        idx.resize(static_cast<std::size_t>(count));
        std::iota(idx.begin(), idx.end(), b);
        Tensor logits = net.forward(gather_images(data, idx));
        const int k = logits.dim(1);
        for (int i = 0; i < count; ++i) {
            const float* row = logits.data().data() + static_cast<std::size_t>(i) * k;
            int arg = 0;
            for (int j = 1; j < k; ++j)
                if (row[j] > row[arg]) arg = j;
            wrong += arg != data.labels[static_cast<std::size_t>(b + i)];
        }
    }
    net.set_mode(prev);
    return static_cast<double>(wrong) / static_cast<double>(n);
}

std::vector<EpochMetrics> train(NetworkGraph& net, const Dataset& train_data,
                                const Dataset& test_data, const TrainOptions& opts) {
    std::vector<Tensor> params = net.parameters();
    std::vector<Tensor> gates = net.gate_params();
    SgdOptimizer opt(params, static_cast<float>(opts.lr), static_cast<float>(opts.momentum),
                     static_cast<float>(opts.reg.lambda2));

    double metric_threshold = opts.metric_threshold;
    if (metric_threshold < 0.0) {
        metric_threshold = net.groups.empty()
                               ? 0.0
                               : default_threshold(net.gate_of(net.groups.front()).kind);
    }

    // Shuffle stream decoupled from the init stream but still a pure function
    // of the seed, so identical configs replay identical batch orders.
    std::mt19937 shuffle_rng(static_cast<std::mt19937::result_type>(opts.seed * 0x9e3779b9ULL + 17));

    const int n = train_data.size();
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochMetrics> log;
    for (int e = 0; e < opts.epochs; ++e) {
        const int epoch = opts.start_epoch + e;
        opt.set_lr(static_cast<float>(lr_for_epoch(opts, epoch)));
        if (opts.shuffle) std::shuffle(order.begin(), order.end(), shuffle_rng);

        net.set_mode(Mode::Train);
        double task_sum = 0.0, penalty_sum = 0.0;
        int batches = 0;
        for (int b = 0; b < n; b += opts.batch_size) {
            int count = std::min(opts.batch_size, n - b);
            std::span<const int> idx(order.data() + b, static_cast<std::size_t>(count));
            Tensor images = gather_images(train_data, idx);
            std::vector<int> labels = gather_labels(train_data, idx);

            opt.zero_grad();
            for (Tensor& g : gates) g.zero_grad();
            LossTerms terms = total_loss(net, images, labels, opts.reg, epoch);
            double task = terms.task.item();
            if (!std::isfinite(task) || !std::isfinite(terms.penalty)) {
                std::ostringstream os;
                os << "non-finite loss at epoch " << epoch << " batch " << batches << ": task=" << task
                   << " penalty=" << terms.penalty << " (lr=" << lr_for_epoch(opts, epoch)
                   << ", lambda1=" << opts.reg.lambda1_at(epoch) << ", sigma=" << opts.reg.sigma_for(epoch)
                   << ")";
                throw TrainDivergedError(os.str());
            }
            backward(terms.task);
            apply_penalty_grad(gates, opts.reg, epoch);
            opt.step();

            task_sum += task;
            penalty_sum += terms.penalty;
            ++batches;
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.task_loss = task_sum / batches;
        m.penalty = penalty_sum / batches;
        m.train_loss = m.task_loss + m.penalty;
        m.test_error = evaluate_error(net, test_data) * 100.0;
        m.sigma = opts.reg.sigma_for(epoch);
        m.prune_rate = pruning_rate_at(net, metric_threshold);
        log.push_back(m);
        if (opts.verbose) {
            std::cerr << "epoch " << epoch << ": loss " << m.train_loss << " (task " << m.task_loss
                      << " + penalty " << m.penalty << "), test error " << m.test_error
                      << "%, sigma " << m.sigma << ", prune rate " << m.prune_rate << "\n";
        }
    }
    return log;
}

std::string metrics_csv(std::span<const EpochMetrics> rows) {
    std::ostringstream os;
    os.precision(10);
    os << "epoch,train_loss,task_loss,penalty,test_error,sigma,prune_rate\n";
    for (const EpochMetrics& m : rows)
        os << m.epoch << ',' << m.train_loss << ',' << m.task_loss << ',' << m.penalty << ','
           << m.test_error << ',' << m.sigma << ',' << m.prune_rate << '\n';
    return os.str();
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << metrics_csv(rows);
}

std::vector<EpochMetrics> read_metrics_csv(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    std::getline(f, line);  // header
    std::vector<EpochMetrics> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        EpochMetrics m;
        char comma;
        std::istringstream is(line);
        is >> m.epoch >> comma >> m.train_loss >> comma >> m.task_loss >> comma >> m.penalty >> comma >>
            m.test_error >> comma >> m.sigma >> comma >> m.prune_rate;
        rows.push_back(m);
    }
    return rows;
}

}  // namespace gateprune
