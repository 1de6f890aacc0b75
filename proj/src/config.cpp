#include "gateprune/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gateprune/gating.hpp"
#include "gateprune/prune.hpp"

namespace gateprune {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string item;
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": '" + v + "'");
    }
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        int i = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": '" + v + "'");
    }
}

}  // namespace

double RunConfig::resolved_threshold() const {
    if (threshold >= 0.0) return threshold;
    return default_threshold(gate_kind == "linear" ? GateKind::Linear : GateKind::Exponential);
}

std::filesystem::path RunConfig::resolved_data_dir() const {
    if (!data_dir.empty()) return data_dir;
    if (const char* env = std::getenv("GATEPRUNE_DATA_DIR")) return env;
    throw ConfigError("no dataset directory: set data.dir or $GATEPRUNE_DATA_DIR");
}

std::string RunConfig::reg_kind_name() const {
    switch (reg.kind) {
        case RegKind::L2: return "l2";
        case RegKind::L1: return "l1";
        default: return "bounded_l1";
    }
}

RunConfig preset_config(const std::string& name) {
    RunConfig cfg;
    cfg.model = "lenet5_caffe";
    cfg.gate_kind = "exponential";
    if (name == "l2") {
        cfg.reg.kind = RegKind::L2;
        cfg.reg.lambda1 = 0.0;
        cfg.reg.lambda2 = 5e-4;
        cfg.epochs = 200;
    } else if (name == "l1") {
        cfg.reg.kind = RegKind::L1;
        cfg.reg.lambda1 = 1e-3;
        cfg.reg.lambda2 = 0.0;
        cfg.epochs = 60;
    } else if (name == "bounded_l1") {
        cfg.reg.kind = RegKind::BoundedL1;
        cfg.reg.lambda1 = 4e-3;
        cfg.reg.lambda2 = 0.0;
        cfg.reg.sigma = 1.0;
        cfg.epochs = 60;
    } else if (name == "bounded_l1_3e3") {
        cfg.reg.kind = RegKind::BoundedL1;
        cfg.reg.lambda1 = 3e-3;
        cfg.reg.lambda2 = 0.0;
        cfg.reg.sigma = 1.0;
        cfg.epochs = 60;
    } else {
        throw ConfigError("unknown preset '" + name + "' (try: l2, l1, bounded_l1, bounded_l1_3e3)");
    }
    return cfg;
}

std::vector<std::string> preset_names() { return {"l2", "l1", "bounded_l1", "bounded_l1_3e3"}; }

void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "model") {
        cfg.model = value;
    } else if (key == "gate_kind") {
        if (value != "exponential" && value != "linear" && value != "none")
            throw ConfigError("gate_kind must be exponential, linear or none, got '" + value + "'");
        cfg.gate_kind = value;
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "train.epochs" || key == "epochs") {
        cfg.epochs = to_int(key, value);
    } else if (key == "train.batch_size") {
        cfg.batch_size = to_int(key, value);
    } else if (key == "train.lr") {
        cfg.lr = to_double(key, value);
    } else if (key == "train.momentum") {
        cfg.momentum = to_double(key, value);
    } else if (key == "train.lr_milestones") {
        cfg.lr_milestones.clear();
        if (!value.empty())
            for (const std::string& s : split(value, ','))
                if (!s.empty()) cfg.lr_milestones.push_back(to_int(key, s));
    } else if (key == "train.lr_gamma") {
        cfg.lr_gamma = to_double(key, value);
    } else if (key == "regularizer.kind") {
        if (value == "l2")
            cfg.reg.kind = RegKind::L2;
        else if (value == "l1")
            cfg.reg.kind = RegKind::L1;
        else if (value == "bounded_l1")
            cfg.reg.kind = RegKind::BoundedL1;
        else
            throw ConfigError("regularizer.kind must be l2, l1 or bounded_l1, got '" + value + "'");
    } else if (key == "regularizer.lambda1") {
        cfg.reg.lambda1 = to_double(key, value);
    } else if (key == "regularizer.lambda2") {
        cfg.reg.lambda2 = to_double(key, value);
    } else if (key == "regularizer.sigma") {
        cfg.reg.sigma = to_double(key, value);
    } else if (key == "regularizer.sigma_schedule") {
        if (value == "none") {
            cfg.reg.sigma_schedule.reset();
        } else if (value == "exp_decay" || value == "step_then_exp") {
            SigmaSchedule s = cfg.reg.sigma_schedule.value_or(SigmaSchedule{});
            s.mode = value == "exp_decay" ? SigmaSchedule::Mode::ExpDecay
                                          : SigmaSchedule::Mode::StepThenExp;
            cfg.reg.sigma_schedule = s;
        } else {
            throw ConfigError("regularizer.sigma_schedule must be none, exp_decay or step_then_exp");
        }
    } else if (key == "regularizer.sigma_initial" || key == "regularizer.sigma_decay_rate" ||
               key == "regularizer.sigma_step_delta" || key == "regularizer.sigma_floor") {
        SigmaSchedule s = cfg.reg.sigma_schedule.value_or(SigmaSchedule{});
        double d = to_double(key, value);
        if (key == "regularizer.sigma_initial") s.initial = d;
        if (key == "regularizer.sigma_decay_rate") s.decay_rate = d;
        if (key == "regularizer.sigma_step_delta") s.step_delta = d;
        if (key == "regularizer.sigma_floor") s.floor = d;
        cfg.reg.sigma_schedule = s;
    } else if (key == "regularizer.lambda_steps") {
        cfg.reg.lambda_schedule.clear();
        if (!value.empty()) {
            for (const std::string& s : split(value, ';')) {
                if (s.empty()) continue;
                auto parts = split(s, ':');
                if (parts.size() != 2) throw ConfigError("lambda_steps entries must be epoch:value, got '" + s + "'");
                cfg.reg.lambda_schedule.push_back({to_int(key, parts[0]), to_double(key, parts[1])});
            }
        }
    } else if (key == "prune.threshold") {
        cfg.threshold = to_double(key, value);
    } else if (key == "finetune.epochs") {
        cfg.finetune_epochs = to_int(key, value);
    } else if (key == "finetune.lr") {
        cfg.finetune_lr = to_double(key, value);
    } else if (key == "data.dir") {
        cfg.data_dir = value;
    } else if (key == "data.limit_train") {
        cfg.limit_train = to_int(key, value);
    } else if (key == "data.limit_test") {
        cfg.limit_test = to_int(key, value);
    } else if (key == "out.dir") {
        cfg.out_dir = value;
    } else if (key == "verbose") {
        cfg.verbose = value == "1" || value == "true";
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

void apply_config_file(RunConfig& cfg, const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key=value");
        apply_config_kv(cfg, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
    }
}

RunConfig parse_config_file(const std::filesystem::path& path) {
    RunConfig cfg;
    apply_config_file(cfg, path);
    return cfg;
}

}  // namespace gateprune
