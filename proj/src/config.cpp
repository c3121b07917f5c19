#include "msfum/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace msfum {

const std::map<std::string, std::string>& RunConfig::known_keys() {
    static const std::map<std::string, std::string> keys = {
        {"net.scale", "super-resolution factor, one of 4/8/16"},
        {"net.base_channels", "width of the first pyramid level"},
        {"net.n_state", "SSM state size"},
        {"net.channel_cap", "maximum channel width"},
        {"net.ablation.guidance", "enable the color guidance branch (true/false)"},
        {"net.ablation.rdcb", "enable RDCB blocks (true/false)"},
        {"net.ablation.mamba", "enable Mamba blocks (true/false)"},
        {"train.lr0", "initial learning rate"},
        {"train.decay_factor", "lr decay multiplier"},
        {"train.decay_every", "epochs between lr decays"},
        {"train.batch", "batch size"},
        {"train.epochs", "training epochs"},
        {"train.patch", "HR patch size"},
        {"train.seed", "run seed"},
        {"train.loss", "l1 or l2"},
        {"data.degrade", "bicubic or nearest"},
        {"data.unit_scale", "stored-value to depth-unit factor"},
        {"run.threads", "worker thread cap"},
    };
    return keys;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    RunConfig cfg;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config '" + path + "' line " + std::to_string(lineno) +
                                     ": expected key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (known_keys().count(key) == 0) {
        throw std::runtime_error("unknown config key '" + key + "'");
    }
    values_[key] = value;
}

std::string RunConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

int64_t RunConfig::get_int(const std::string& key, int64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return std::stoll(it->second);
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return std::stod(it->second);
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::runtime_error("config key '" + key + "': expected a boolean, got '" + v + "'");
}

NetworkConfig RunConfig::network_config() const {
    NetworkConfig cfg;
    cfg.scale = get_int("net.scale", cfg.scale);
    cfg.base_channels = get_int("net.base_channels", cfg.base_channels);
    cfg.n_state = get_int("net.n_state", cfg.n_state);
    cfg.channel_cap = get_int("net.channel_cap", cfg.channel_cap);
    cfg.ablation.use_guidance = get_bool("net.ablation.guidance", cfg.ablation.use_guidance);
    cfg.ablation.use_rdcb = get_bool("net.ablation.rdcb", cfg.ablation.use_rdcb);
    cfg.ablation.use_mamba = get_bool("net.ablation.mamba", cfg.ablation.use_mamba);
    cfg.validate();
    return cfg;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig cfg;
    cfg.lr0 = get_double("train.lr0", cfg.lr0);
    cfg.decay_factor = get_double("train.decay_factor", cfg.decay_factor);
    cfg.decay_every = get_int("train.decay_every", cfg.decay_every);
    cfg.batch = get_int("train.batch", cfg.batch);
    cfg.epochs = get_int("train.epochs", cfg.epochs);
    cfg.patch = get_int("train.patch", cfg.patch);
    cfg.seed = static_cast<uint64_t>(get_int("train.seed", 0));
    const std::string loss = get_string("train.loss", "l1");
    if (loss == "l1") {
        cfg.use_l2 = false;
    } else if (loss == "l2") {
        cfg.use_l2 = true;
    } else {
        throw std::runtime_error("train.loss must be l1 or l2, got '" + loss + "'");
    }
    cfg.validate();
    return cfg;
}

DegradeMethod RunConfig::degrade_method() const {
    const std::string m = get_string("data.degrade", "bicubic");
    if (m == "bicubic") return DegradeMethod::bicubic;
    if (m == "nearest") return DegradeMethod::nearest;
    throw std::runtime_error("data.degrade must be bicubic or nearest, got '" + m + "'");
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << "=" << v << "\n";
    return os.str();
}

}  // namespace msfum
