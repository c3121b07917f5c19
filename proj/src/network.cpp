#include "msfum/network.hpp"

#include <algorithm>
#include <map>

#include "msfum/ops.hpp"

namespace msfum {

int64_t NetworkConfig::levels() const {
    switch (scale) {
        case 4:
            return 2;
        case 8:
            return 3;
        case 16:
            return 4;
        default:
            contract_fail("NetworkConfig: scale must be one of {4,8,16}, got " +
                          std::to_string(scale));
    }
}

int64_t NetworkConfig::width(int64_t level) const {
    return std::min(base_channels << level, channel_cap);
}

void NetworkConfig::validate() const {
    (void)levels();
    check(base_channels >= 1, "NetworkConfig: base_channels must be positive");
    check(channel_cap >= base_channels, "NetworkConfig: channel_cap below base_channels");
    check(n_state >= 1, "NetworkConfig: n_state must be positive");
}

template <typename T>
Network<T>::Network(const NetworkConfig& cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(seed);
    const int64_t lv = cfg_.levels();
    const auto& ab = cfg_.ablation;

    stem_ = Conv2dLayer<T>(params_, "stem", 1, cfg_.width(0), 3, 1, 1, rng);
    enc_.reserve(static_cast<size_t>(lv));
    for (int64_t i = 0; i < lv; ++i) {
        EncLevel<T> level;
        level.block = RdcbMamba<T>(params_, "enc." + std::to_string(i) + ".block", cfg_.width(i),
                                   cfg_.n_state, ab.use_rdcb, ab.use_mamba, rng);
        level.down = Conv2dLayer<T>(params_, "enc." + std::to_string(i) + ".down", cfg_.width(i),
                                    cfg_.width(i + 1), 3, 2, 1, rng);
        enc_.push_back(std::move(level));
    }
    if (ab.use_guidance) {
        gstem_ = Conv2dLayer<T>(params_, "guide.stem", 3, cfg_.width(0), 3, 1, 1, rng);
        guide_.reserve(static_cast<size_t>(lv));
        for (int64_t i = 0; i < lv; ++i) {
            GuideLevel<T> level;
            level.block = RdcbMamba<T>(params_, "guide." + std::to_string(i) + ".block",
                                       cfg_.width(i), cfg_.n_state, ab.use_rdcb, ab.use_mamba,
                                       rng);
            if (i + 1 < lv) {
                level.down = Conv2dLayer<T>(params_, "guide." + std::to_string(i) + ".down",
                                            cfg_.width(i), cfg_.width(i + 1), 3, 2, 1, rng);
            }
            guide_.push_back(std::move(level));
        }
    }
    dec_.resize(static_cast<size_t>(lv));
    for (int64_t i = lv - 1; i >= 0; --i) {
        DecLevel<T> level;
        level.up = Conv2dLayer<T>(params_, "dec." + std::to_string(i) + ".up", cfg_.width(i + 1),
                                  cfg_.width(i), 3, 1, 1, rng);
        const int64_t streams = ab.use_guidance ? 3 : 2;
        level.proj = Conv2dLayer<T>(params_, "dec." + std::to_string(i) + ".proj",
                                    streams * cfg_.width(i), cfg_.width(i), 1, 1, 0, rng);
        level.block = RdcbMamba<T>(params_, "dec." + std::to_string(i) + ".block", cfg_.width(i),
                                   cfg_.n_state, ab.use_rdcb, ab.use_mamba, rng);
        dec_[static_cast<size_t>(i)] = std::move(level);
    }
    // small head init: the untrained network starts at the bicubic baseline
    head_ = Conv2dLayer<T>(params_, "head", cfg_.width(0), 1, 3, 1, 1, rng, 0.01);
}

template <typename T>
Tensor<T> fuse_features(const Tensor<T>& skip, const Tensor<T>& up, const Tensor<T>* guide,
                        const Conv2dLayer<T>& proj, const RdcbMamba<T>& block) {
    check(skip.shape() == up.shape(), "fuse: skip " + shape_str(skip.shape()) +
                                          " vs upsampled " + shape_str(up.shape()));
    std::vector<Tensor<T>> streams{skip, up};
    if (guide) {
        check(guide->shape() == skip.shape(),
              "fuse: guidance " + shape_str(guide->shape()) + " vs skip " +
                  shape_str(skip.shape()));
        streams.push_back(*guide);
    }
    Tensor<T> merged = proj.forward(concat_channels(streams));
    return block.forward(merged);
}

template <typename T>
Tensor<T> Network<T>::forward_residual(const Tensor<T>& d_up, const Tensor<T>& rgb) const {
    check(d_up.rank() == 4 && d_up.dim(1) == 1,
          "forward: depth input must be [N,1,H,W], got " + shape_str(d_up.shape()));
    const int64_t lv = cfg_.levels();

    Tensor<T> x = stem_.forward(d_up);
    std::vector<Tensor<T>> skips;
    skips.reserve(static_cast<size_t>(lv));
    for (int64_t i = 0; i < lv; ++i) {
        Tensor<T> e = enc_[static_cast<size_t>(i)].block.forward(x);
        skips.push_back(e);
        x = enc_[static_cast<size_t>(i)].down.forward(e);
    }

    std::vector<Tensor<T>> gfeats;
    if (cfg_.ablation.use_guidance) {
        check(rgb.defined() && rgb.rank() == 4 && rgb.dim(1) == 3,
              "forward: guidance input must be [N,3,H,W]");
        check(rgb.dim(2) == d_up.dim(2) && rgb.dim(3) == d_up.dim(3),
              "forward: guidance dims " + shape_str(rgb.shape()) +
                  " do not match depth dims " + shape_str(d_up.shape()));
        Tensor<T> g = gstem_->forward(rgb);
        gfeats.reserve(static_cast<size_t>(lv));
        for (int64_t i = 0; i < lv; ++i) {
            Tensor<T> gf = guide_[static_cast<size_t>(i)].block.forward(g);
            gfeats.push_back(gf);
            if (guide_[static_cast<size_t>(i)].down) {
                g = guide_[static_cast<size_t>(i)].down->forward(gf);
            }
        }
    }

    for (int64_t i = lv - 1; i >= 0; --i) {
        const DecLevel<T>& level = dec_[static_cast<size_t>(i)];
        Tensor<T> up = level.up.forward(upsample_bilinear_x2(x));
        const Tensor<T>* guide =
            cfg_.ablation.use_guidance ? &gfeats[static_cast<size_t>(i)] : nullptr;
        x = fuse_features(skips[static_cast<size_t>(i)], up, guide, level.proj, level.block);
    }
    return head_.forward(x);
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& d_up, const Tensor<T>& rgb) const {
    return add(d_up, forward_residual(d_up, rgb));
}

template <typename T>
SuperResolved Network<T>::super_resolve(const DepthMap& lr, const GuidanceImage& rgb) const {
    const int64_t s = cfg_.scale;
    if (cfg_.ablation.use_guidance) {
        check(rgb.h == lr.h * s && rgb.w == lr.w * s,
              "super_resolve: guidance " + std::to_string(rgb.h) + "x" + std::to_string(rgb.w) +
                  " does not match depth " + std::to_string(lr.h) + "x" + std::to_string(lr.w) +
                  " at scale " + std::to_string(s));
    }
    auto [lr_norm, meta] = min_max_normalize(lr);
    (void)lr_norm;

    DepthMap up_native = bicubic_resize(lr, lr.h * s, lr.w * s);
    DepthMap up_norm = up_native;
    for (auto& v : up_norm.values) v = (v - meta.min) / meta.span();

    NoGradGuard ng;
    Tensor<T> d_up = depth_to_tensor<T>(up_norm);
    Tensor<T> rgb_t;
    if (cfg_.ablation.use_guidance) rgb_t = rgb_to_tensor<T>(rgb);
    Tensor<T> residual = forward_residual(d_up, rgb_t);

    SuperResolved out;
    out.bicubic = up_native;
    out.pred = up_native;
    const double span = meta.span();
    for (size_t i = 0; i < out.pred.values.size(); ++i) {
        out.pred.values[i] = up_native.values[i] +
                             span * static_cast<double>(residual.data()[i]);
    }
    return out;
}

int64_t param_count(const NetworkConfig& cfg) {
    Network<float> net(cfg, 0);
    return net.params().total_scalars();
}

std::vector<std::pair<std::string, int64_t>> param_count_by_section(const NetworkConfig& cfg) {
    Network<float> net(cfg, 0);
    std::map<std::string, int64_t> by_section;
    for (const auto& [name, t] : net.params().entries()) {
        const auto dot = name.find('.');
        by_section[name.substr(0, dot)] += t.numel();
    }
    return {by_section.begin(), by_section.end()};
}

template class Network<float>;
template class Network<double>;
template Tensor<float> fuse_features<float>(const Tensor<float>&, const Tensor<float>&,
                                            const Tensor<float>*, const Conv2dLayer<float>&,
                                            const RdcbMamba<float>&);
template Tensor<double> fuse_features<double>(const Tensor<double>&, const Tensor<double>&,
                                              const Tensor<double>*, const Conv2dLayer<double>&,
                                              const RdcbMamba<double>&);

}  // namespace msfum
