#pragma once

#include <map>
#include <string>

#include "msfum/network.hpp"
#include "msfum/train.hpp"

namespace msfum {

// Flat key=value configuration with dotted paths. File values are applied
// first, command-line overrides second; unknown keys are rejected either
// way. The effective config is echoed into every run directory.
class RunConfig {
public:
    static const std::map<std::string, std::string>& known_keys();  // key -> doc

    static RunConfig from_file(const std::string& path);

    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    std::string get_string(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    NetworkConfig network_config() const;
    TrainConfig train_config() const;
    DegradeMethod degrade_method() const;

    std::string to_text() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace msfum
