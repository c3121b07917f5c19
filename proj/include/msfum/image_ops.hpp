#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "msfum/tensor.hpp"

namespace msfum {

// 2-D depth raster. Values are stored-value * unit_scale; a stored zero
// means "no measurement" and is tracked in the valid mask.
struct DepthMap {
    int64_t h = 0;
    int64_t w = 0;
    std::vector<double> values;   // row-major, h*w
    double unit_scale = 1.0;
    std::vector<uint8_t> valid;   // empty = all valid, else h*w flags

    bool has_mask() const { return !valid.empty(); }
    bool is_valid(int64_t i) const { return valid.empty() || valid[static_cast<size_t>(i)] != 0; }
    double at(int64_t y, int64_t x) const { return values[static_cast<size_t>(y * w + x)]; }
};

// 3-channel guidance image in [0,1], interleaved RGB.
struct GuidanceImage {
    int64_t h = 0;
    int64_t w = 0;
    std::vector<double> values;  // h*w*3

    double at(int64_t y, int64_t x, int64_t ch) const {
        return values[static_cast<size_t>((y * w + x) * 3 + ch)];
    }
};

enum class DegradeMethod { bicubic, nearest };

// Separable cubic convolution, Catmull-Rom (a = -0.5), edge-clamped taps,
// half-pixel-center mapping src = (dst + 0.5) * (in/out) - 0.5. When an
// output grid point lands exactly on an input sample the sample is copied
// through, so equal-size resizes are bitwise identities.
std::vector<double> bicubic_resize(const std::vector<double>& in, int64_t h, int64_t w,
                                   int64_t out_h, int64_t out_w);

DepthMap bicubic_resize(const DepthMap& d, int64_t out_h, int64_t out_w);

// HR -> LR degradation by factor s in {4,8,16}; dims must divide by s.
DepthMap degrade(const DepthMap& hr, int64_t s, DegradeMethod method = DegradeMethod::bicubic);

// Aligned crops of both modalities at the same HR pixel coordinates.
std::pair<DepthMap, GuidanceImage> crop_patch(const DepthMap& hr_depth, const GuidanceImage& rgb,
                                              int64_t size, int64_t origin_y, int64_t origin_x);

struct NormMeta {
    double min = 0.0;
    double max = 1.0;
    double span() const { return max - min; }
};

// Affine map of valid pixels to [0,1]; meta inverts it. Degenerate
// (constant) maps are rejected.
std::pair<DepthMap, NormMeta> min_max_normalize(const DepthMap& d);

DepthMap denormalize(const DepthMap& d, const NormMeta& meta);

// Tensor bridges (batch of one).
template <typename T>
Tensor<T> depth_to_tensor(const DepthMap& d);

template <typename T>
Tensor<T> rgb_to_tensor(const GuidanceImage& img);

template <typename T>
DepthMap tensor_to_depth(const Tensor<T>& t, double unit_scale);

}  // namespace msfum
