#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "msfum/image_ops.hpp"
#include "msfum/network.hpp"

namespace msfum {

// Line-oriented dataset listing: one "<rgb>\t<depth>\t<split>" entry per
// line, optional "# name ..." / "# unit_scale ..." directives. Relative
// paths resolve against the manifest's directory.
struct ManifestEntry {
    std::string rgb_path;
    std::string depth_path;
    std::string split;
};

struct Manifest {
    std::string name = "dataset";
    double unit_scale = 1.0;
    std::vector<ManifestEntry> entries;

    static Manifest load(const std::string& path, bool check_paths = true);
    void save(const std::string& path) const;
};

// 16-bit (maxval 65535) or 8-bit binary PGM. Stored zeros mark missing
// depth. PNG inputs are not decoded here; convert externally (see README).
DepthMap load_depth(const std::string& path, double unit_scale);

enum class DepthFormat { pgm16, pgm8 };

struct SaveReport {
    int64_t clamped = 0;  // samples outside the representable range
};

SaveReport save_depth(const DepthMap& d, const std::string& path,
                      DepthFormat format = DepthFormat::pgm16);

// 8-bit binary PPM; values scaled to [0,1].
GuidanceImage load_rgb(const std::string& path);
void save_rgb(const GuidanceImage& img, const std::string& path);

// Versioned little-endian checkpoint: "MSFU" magic, config snapshot, then
// (name, dims, raw f32 scalars) per parameter. Round-trips are bitwise.
void checkpoint_save(const Network<float>& net, const std::string& path);
Network<float> checkpoint_load(const std::string& path);

// Container-level access: the entry list may be empty.
struct RawTensorEntry {
    std::string name;
    std::vector<int64_t> shape;
    std::vector<float> data;
};

struct RawCheckpoint {
    NetworkConfig cfg;
    std::vector<RawTensorEntry> entries;
};

void checkpoint_save_raw(const NetworkConfig& cfg, const std::vector<RawTensorEntry>& entries,
                         const std::string& path);
RawCheckpoint checkpoint_load_raw(const std::string& path);

}  // namespace msfum
