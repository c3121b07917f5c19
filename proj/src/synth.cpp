#include "msfum/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

namespace msfum {

namespace {

constexpr double kTwoPi = 6.283185307179586;

struct Region {
    bool ellipse = false;
    int64_t cy = 0, cx = 0, ry = 0, rx = 0;  // rect half-extents or ellipse radii
    double depth = 0.0;
    double color[3] = {0, 0, 0};

    bool contains(int64_t y, int64_t x) const {
        if (ellipse) {
            const double dy = static_cast<double>(y - cy) / static_cast<double>(ry);
            const double dx = static_cast<double>(x - cx) / static_cast<double>(rx);
            return dy * dy + dx * dx <= 1.0;
        }
        return std::abs(y - cy) <= ry && std::abs(x - cx) <= rx;
    }
};

}  // namespace

Sample make_synth_sample(int64_t size, Rng& rng, const std::string& id) {
    Sample s;
    s.id = id;
    s.hr.h = size;
    s.hr.w = size;
    s.hr.unit_scale = 1.0;
    s.hr.values.resize(static_cast<size_t>(size * size));
    s.rgb.h = size;
    s.rgb.w = size;
    s.rgb.values.resize(static_cast<size_t>(size * size * 3));

    const double bg_depth = std::floor(rng.uniform(500.0, 4000.0));
    double bg_color[3];
    for (auto& c : bg_color) c = rng.uniform(0.1, 0.9);

    const int64_t n_shapes = rng.uniform_int(3, 7);
    std::vector<Region> regions(static_cast<size_t>(n_shapes));
    for (auto& r : regions) {
        r.ellipse = rng.uniform() < 0.5;
        r.cy = rng.uniform_int(0, size - 1);
        r.cx = rng.uniform_int(0, size - 1);
        r.ry = rng.uniform_int(size / 10 + 1, size / 3);
        r.rx = rng.uniform_int(size / 10 + 1, size / 3);
        r.depth = std::floor(rng.uniform(200.0, 6000.0));
        for (auto& c : r.color) c = rng.uniform(0.05, 0.95);
    }

    // Texture gratings cross region boundaries; their phase carries no depth
    // information.
    double tex_freq[3], tex_angle[3], tex_phase[3], tex_amp[3];
    for (int k = 0; k < 3; ++k) {
        tex_freq[k] = rng.uniform(1.0, 4.0);
        tex_angle[k] = rng.uniform(0.0, kTwoPi);
        tex_phase[k] = rng.uniform(0.0, kTwoPi);
        tex_amp[k] = rng.uniform(0.02, 0.10);
    }

    for (int64_t y = 0; y < size; ++y) {
        for (int64_t x = 0; x < size; ++x) {
            double depth = bg_depth;
            const double* color = bg_color;
            // later shapes paint over earlier ones
            for (const auto& r : regions) {
                if (r.contains(y, x)) {
                    depth = r.depth;
                    color = r.color;
                }
            }
            s.hr.values[static_cast<size_t>(y * size + x)] = depth;
            for (int k = 0; k < 3; ++k) {
                const double dir = std::cos(tex_angle[k]) * static_cast<double>(x) +
                                   std::sin(tex_angle[k]) * static_cast<double>(y);
                const double tex =
                    tex_amp[k] * std::sin(kTwoPi * tex_freq[k] * dir / static_cast<double>(size) +
                                          tex_phase[k]);
                double v = std::clamp(color[k] + tex, 0.0, 1.0);
                // quantize like an 8-bit source so the written corpus matches
                v = std::round(v * 255.0) / 255.0;
                s.rgb.values[static_cast<size_t>((y * size + x) * 3 + k)] = v;
            }
        }
    }
    return s;
}

Dataset make_synth_dataset(const SynthConfig& cfg) {
    Rng rng(cfg.seed);
    Dataset d;
    d.unit_scale = 1.0;
    const int64_t n_train = static_cast<int64_t>(
        std::llround(cfg.train_fraction * static_cast<double>(cfg.count)));
    for (int64_t i = 0; i < cfg.count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "synth_%04lld", static_cast<long long>(i));
        Sample s = make_synth_sample(cfg.size, rng, name);
        if (i < n_train) {
            d.train.push_back(std::move(s));
        } else {
            d.val.push_back(std::move(s));
        }
    }
    return d;
}

Manifest write_synth_corpus(const SynthConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    Rng rng(cfg.seed);
    Manifest m;
    m.name = "synth";
    m.unit_scale = 1.0;
    const int64_t n_train = static_cast<int64_t>(
        std::llround(cfg.train_fraction * static_cast<double>(cfg.count)));
    for (int64_t i = 0; i < cfg.count; ++i) {
        char base[32];
        std::snprintf(base, sizeof(base), "%04lld", static_cast<long long>(i));
        Sample s = make_synth_sample(cfg.size, rng, base);
        const std::string depth_name = std::string("depth_") + base + ".pgm";
        const std::string rgb_name = std::string("rgb_") + base + ".ppm";
        save_depth(s.hr, (fs::path(dir) / depth_name).string());
        save_rgb(s.rgb, (fs::path(dir) / rgb_name).string());
        m.entries.push_back({rgb_name, depth_name, i < n_train ? "train" : "val"});
    }
    const std::string manifest_path = (fs::path(dir) / "manifest.tsv").string();
    m.save(manifest_path);
    return Manifest::load(manifest_path);
}

}  // namespace msfum
