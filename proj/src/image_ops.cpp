#include "msfum/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace msfum {

namespace {

// Catmull-Rom kernel, a = -0.5.
double cubic_kernel(double t) {
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return a * (((t - 5.0) * t + 8.0) * t - 4.0);
    return 0.0;
}

struct CubicTap {
    int64_t idx[4];
    double w[4];
    bool exact;  // grid-aligned: copy idx[1] through
};

std::vector<CubicTap> cubic_taps(int64_t in_size, int64_t out_size) {
    std::vector<CubicTap> taps(static_cast<size_t>(out_size));
    const double ratio = static_cast<double>(in_size) / static_cast<double>(out_size);
    for (int64_t o = 0; o < out_size; ++o) {
        const double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
        const double fl = std::floor(src);
        const int64_t i0 = static_cast<int64_t>(fl);
        const double f = src - fl;
        CubicTap tap;
        tap.exact = (f == 0.0) && i0 >= 0 && i0 < in_size;
        double sum = 0.0;
        const double wraw[4] = {cubic_kernel(1.0 + f), cubic_kernel(f), cubic_kernel(1.0 - f),
                                cubic_kernel(2.0 - f)};
        for (int k = 0; k < 4; ++k) {
            tap.idx[k] = std::clamp<int64_t>(i0 - 1 + k, 0, in_size - 1);
            sum += wraw[k];
        }
        for (int k = 0; k < 4; ++k) tap.w[k] = wraw[k] / sum;
        taps[static_cast<size_t>(o)] = tap;
    }
    return taps;
}

}  // namespace

std::vector<double> bicubic_resize(const std::vector<double>& in, int64_t h, int64_t w,
                                   int64_t out_h, int64_t out_w) {
    check(h >= 1 && w >= 1, "bicubic_resize: input dims must be >= 1");
    check(out_h >= 1 && out_w >= 1, "bicubic_resize: output dims must be >= 1");
    check(static_cast<int64_t>(in.size()) == h * w, "bicubic_resize: data size mismatch");

    const auto tx = cubic_taps(w, out_w);
    // horizontal pass: h x out_w
    std::vector<double> mid(static_cast<size_t>(h * out_w));
    for (int64_t y = 0; y < h; ++y) {
        const double* row = in.data() + y * w;
        double* orow = mid.data() + y * out_w;
        for (int64_t x = 0; x < out_w; ++x) {
            const CubicTap& t = tx[static_cast<size_t>(x)];
            if (t.exact) {
                orow[x] = row[t.idx[1]];
            } else {
                orow[x] = t.w[0] * row[t.idx[0]] + t.w[1] * row[t.idx[1]] +
                          t.w[2] * row[t.idx[2]] + t.w[3] * row[t.idx[3]];
            }
        }
    }
    // vertical pass: out_h x out_w
    const auto ty = cubic_taps(h, out_h);
    std::vector<double> out(static_cast<size_t>(out_h * out_w));
    for (int64_t y = 0; y < out_h; ++y) {
        const CubicTap& t = ty[static_cast<size_t>(y)];
        double* orow = out.data() + y * out_w;
        if (t.exact) {
            const double* src = mid.data() + t.idx[1] * out_w;
            std::copy(src, src + out_w, orow);
            continue;
        }
        const double* r0 = mid.data() + t.idx[0] * out_w;
        const double* r1 = mid.data() + t.idx[1] * out_w;
        const double* r2 = mid.data() + t.idx[2] * out_w;
        const double* r3 = mid.data() + t.idx[3] * out_w;
        for (int64_t x = 0; x < out_w; ++x) {
            orow[x] = t.w[0] * r0[x] + t.w[1] * r1[x] + t.w[2] * r2[x] + t.w[3] * r3[x];
        }
    }
    return out;
}

DepthMap bicubic_resize(const DepthMap& d, int64_t out_h, int64_t out_w) {
    DepthMap out;
    out.h = out_h;
    out.w = out_w;
    out.unit_scale = d.unit_scale;
    out.values = bicubic_resize(d.values, d.h, d.w, out_h, out_w);
    return out;
}

DepthMap degrade(const DepthMap& hr, int64_t s, DegradeMethod method) {
    check(s == 4 || s == 8 || s == 16, "degrade: scale must be one of {4,8,16}, got " +
                                           std::to_string(s));
    check(hr.h % s == 0 && hr.w % s == 0,
          "degrade: dims " + std::to_string(hr.h) + "x" + std::to_string(hr.w) +
              " not divisible by s=" + std::to_string(s) + " (crop first)");
    const int64_t lh = hr.h / s, lw = hr.w / s;
    if (method == DegradeMethod::bicubic) {
        return bicubic_resize(hr, lh, lw);
    }
    DepthMap out;
    out.h = lh;
    out.w = lw;
    out.unit_scale = hr.unit_scale;
    out.values.resize(static_cast<size_t>(lh * lw));
    for (int64_t y = 0; y < lh; ++y) {
        const int64_t sy = std::min<int64_t>(hr.h - 1, std::llround((y + 0.5) * s - 0.5));
        for (int64_t x = 0; x < lw; ++x) {
            const int64_t sx = std::min<int64_t>(hr.w - 1, std::llround((x + 0.5) * s - 0.5));
            out.values[static_cast<size_t>(y * lw + x)] = hr.at(sy, sx);
        }
    }
    return out;
}

std::pair<DepthMap, GuidanceImage> crop_patch(const DepthMap& hr_depth, const GuidanceImage& rgb,
                                              int64_t size, int64_t origin_y, int64_t origin_x) {
    check(hr_depth.h == rgb.h && hr_depth.w == rgb.w,
          "crop_patch: depth and guidance dims differ");
    check(origin_y >= 0 && origin_x >= 0 && origin_y + size <= hr_depth.h &&
              origin_x + size <= hr_depth.w,
          "crop_patch: origin (" + std::to_string(origin_y) + "," + std::to_string(origin_x) +
              ") + size " + std::to_string(size) + " out of bounds for " +
              std::to_string(hr_depth.h) + "x" + std::to_string(hr_depth.w));
    DepthMap d;
    d.h = size;
    d.w = size;
    d.unit_scale = hr_depth.unit_scale;
    d.values.resize(static_cast<size_t>(size * size));
    if (hr_depth.has_mask()) d.valid.resize(static_cast<size_t>(size * size));
    GuidanceImage g;
    g.h = size;
    g.w = size;
    g.values.resize(static_cast<size_t>(size * size * 3));
    for (int64_t y = 0; y < size; ++y) {
        const int64_t sy = origin_y + y;
        for (int64_t x = 0; x < size; ++x) {
            const int64_t sx = origin_x + x;
            d.values[static_cast<size_t>(y * size + x)] = hr_depth.at(sy, sx);
            if (hr_depth.has_mask()) {
                d.valid[static_cast<size_t>(y * size + x)] =
                    hr_depth.valid[static_cast<size_t>(sy * hr_depth.w + sx)];
            }
            for (int64_t ch = 0; ch < 3; ++ch) {
                g.values[static_cast<size_t>((y * size + x) * 3 + ch)] = rgb.at(sy, sx, ch);
            }
        }
    }
    return {std::move(d), std::move(g)};
}

std::pair<DepthMap, NormMeta> min_max_normalize(const DepthMap& d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int64_t i = 0; i < d.h * d.w; ++i) {
        if (!d.is_valid(i)) continue;
        lo = std::min(lo, d.values[static_cast<size_t>(i)]);
        hi = std::max(hi, d.values[static_cast<size_t>(i)]);
    }
    check(std::isfinite(lo) && std::isfinite(hi), "min_max_normalize: no valid pixels");
    check(hi > lo, "min_max_normalize: degenerate range, min == max == " + std::to_string(lo));
    const double span = hi - lo;
    DepthMap out = d;
    for (int64_t i = 0; i < d.h * d.w; ++i) {
        out.values[static_cast<size_t>(i)] =
            d.is_valid(i) ? (d.values[static_cast<size_t>(i)] - lo) / span : 0.0;
    }
    return {std::move(out), NormMeta{lo, hi}};
}

DepthMap denormalize(const DepthMap& d, const NormMeta& meta) {
    DepthMap out = d;
    const double span = meta.span();
    for (auto& v : out.values) v = meta.min + v * span;
    return out;
}

template <typename T>
Tensor<T> depth_to_tensor(const DepthMap& d) {
    std::vector<T> data(static_cast<size_t>(d.h * d.w));
    for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<T>(d.values[i]);
    return Tensor<T>::from_data({1, 1, d.h, d.w}, std::move(data));
}

template <typename T>
Tensor<T> rgb_to_tensor(const GuidanceImage& img) {
    const int64_t hw = img.h * img.w;
    std::vector<T> data(static_cast<size_t>(hw * 3));
    for (int64_t ch = 0; ch < 3; ++ch) {
        for (int64_t i = 0; i < hw; ++i) {
            data[static_cast<size_t>(ch * hw + i)] = static_cast<T>(img.values[i * 3 + ch]);
        }
    }
    return Tensor<T>::from_data({1, 3, img.h, img.w}, std::move(data));
}

template <typename T>
DepthMap tensor_to_depth(const Tensor<T>& t, double unit_scale) {
    check(t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 1,
          "tensor_to_depth: expected [1,1,H,W], got " + shape_str(t.shape()));
    DepthMap d;
    d.h = t.dim(2);
    d.w = t.dim(3);
    d.unit_scale = unit_scale;
    d.values.resize(static_cast<size_t>(d.h * d.w));
    for (size_t i = 0; i < d.values.size(); ++i) d.values[i] = static_cast<double>(t.data()[i]);
    return d;
}

template Tensor<float> depth_to_tensor<float>(const DepthMap&);
template Tensor<double> depth_to_tensor<double>(const DepthMap&);
template Tensor<float> rgb_to_tensor<float>(const GuidanceImage&);
template Tensor<double> rgb_to_tensor<double>(const GuidanceImage&);
template DepthMap tensor_to_depth<float>(const Tensor<float>&, double);
template DepthMap tensor_to_depth<double>(const Tensor<double>&, double);

}  // namespace msfum
