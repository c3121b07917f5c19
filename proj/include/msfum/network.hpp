#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msfum/blocks.hpp"
#include "msfum/image_ops.hpp"
#include "msfum/params.hpp"

namespace msfum {

struct AblationFlags {
    bool use_guidance = true;
    bool use_rdcb = true;
    bool use_mamba = true;
};

// Architecture is fully determined by this config: pyramid depth follows
// the scale factor (levels = log2(s)), widths double per level up to the
// cap. Defaults are sized so the x16 model stays near two million
// parameters.
struct NetworkConfig {
    int64_t scale = 4;  // one of {4, 8, 16}
    int64_t base_channels = 16;
    int64_t n_state = 16;
    int64_t channel_cap = 48;
    AblationFlags ablation;

    int64_t levels() const;
    int64_t width(int64_t level) const;
    void validate() const;
};

template <typename T>
struct EncLevel {
    RdcbMamba<T> block;
    Conv2dLayer<T> down;
};

template <typename T>
struct GuideLevel {
    RdcbMamba<T> block;
    std::optional<Conv2dLayer<T>> down;  // absent on the deepest level
};

template <typename T>
struct DecLevel {
    Conv2dLayer<T> up;
    Conv2dLayer<T> proj;  // 1x1 over the concatenated streams
    RdcbMamba<T> block;
};

// Concatenate skip/upsampled(/guidance) streams, project back to C with a
// 1x1 conv, then run the fusion block.
template <typename T>
Tensor<T> fuse_features(const Tensor<T>& skip, const Tensor<T>& up, const Tensor<T>* guide,
                        const Conv2dLayer<T>& proj, const RdcbMamba<T>& block);

struct SuperResolved {
    DepthMap pred;     // native units
    DepthMap bicubic;  // the pre-upsample baseline, native units
};

template <typename T>
class Network {
public:
    Network(const NetworkConfig& cfg, uint64_t seed);

    // d_up: bicubic pre-upsampled depth normalized to [0,1], [N,1,sh,sw].
    // rgb: guidance [N,3,sh,sw]; ignored (and never touched) when the
    // guidance branch is disabled.
    Tensor<T> forward_residual(const Tensor<T>& d_up, const Tensor<T>& rgb) const;

    // d_up + residual
    Tensor<T> forward(const Tensor<T>& d_up, const Tensor<T>& rgb) const;

    // Whole-image application in native depth units. The prediction is
    // bicubic(lr) + span * residual, so zero head weights reproduce the
    // bicubic baseline bitwise.
    SuperResolved super_resolve(const DepthMap& lr, const GuidanceImage& rgb) const;

    ParamStore<T>& params() { return params_; }
    const ParamStore<T>& params() const { return params_; }
    const NetworkConfig& config() const { return cfg_; }

    EncLevel<T>& enc(int64_t i) { return enc_[static_cast<size_t>(i)]; }
    DecLevel<T>& dec(int64_t i) { return dec_[static_cast<size_t>(i)]; }

private:
    NetworkConfig cfg_;
    ParamStore<T> params_;
    Conv2dLayer<T> stem_;
    std::vector<EncLevel<T>> enc_;
    std::optional<Conv2dLayer<T>> gstem_;
    std::vector<GuideLevel<T>> guide_;
    std::vector<DecLevel<T>> dec_;
    Conv2dLayer<T> head_;
};

// Total scalar count plus a per-section breakdown (stem/enc/guide/dec/head).
int64_t param_count(const NetworkConfig& cfg);
std::vector<std::pair<std::string, int64_t>> param_count_by_section(const NetworkConfig& cfg);

using NetworkF = Network<float>;
using NetworkD = Network<double>;

}  // namespace msfum
