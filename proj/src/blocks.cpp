#include "msfum/blocks.hpp"

#include <algorithm>
#include <cmath>

#include "msfum/ops.hpp"

namespace msfum {

namespace {
// Residual branches open near the identity; see Conv2dLayer::init_scale.
constexpr double kResidualInitScale = 0.01;
}  // namespace

template <typename T>
Conv2dLayer<T>::Conv2dLayer(ParamStore<T>& store, const std::string& prefix, int64_t cin,
                            int64_t cout, int64_t k, int64_t stride_, int64_t pad_, Rng& rng,
                            double init_scale)
    : stride(stride_), pad(pad_) {
    const int64_t fan_in = cin * k * k;
    auto wv = fanin_uniform<T>(rng, cout * fan_in, fan_in);
    auto bv = fanin_uniform<T>(rng, cout, fan_in);
    if (init_scale != 1.0) {
        for (auto& v : wv) v = static_cast<T>(v * init_scale);
        for (auto& v : bv) v = static_cast<T>(v * init_scale);
    }
    w = store.add(prefix + ".weight", {cout, cin, k, k}, std::move(wv));
    b = store.add(prefix + ".bias", {cout}, std::move(bv));
}

template <typename T>
Tensor<T> Conv2dLayer<T>::forward(const Tensor<T>& x) const {
    return conv2d(x, w, b, stride, pad);
}

template <typename T>
ChannelAttention<T>::ChannelAttention(ParamStore<T>& store, const std::string& prefix,
                                      int64_t channels, int64_t reduction, Rng& rng) {
    check(channels >= 1 && reduction >= 1, "ChannelAttention: bad config");
    const int64_t hidden = std::max<int64_t>(1, channels / reduction);
    w1 = store.add(prefix + ".fc1.weight", {hidden, channels},
                   fanin_uniform<T>(rng, hidden * channels, channels));
    b1 = store.add(prefix + ".fc1.bias", {hidden}, fanin_uniform<T>(rng, hidden, channels));
    w2 = store.add(prefix + ".fc2.weight", {channels, hidden},
                   fanin_uniform<T>(rng, channels * hidden, hidden));
    b2 = store.add(prefix + ".fc2.bias", {channels}, fanin_uniform<T>(rng, channels, hidden));
}

template <typename T>
Tensor<T> ChannelAttention<T>::forward(const Tensor<T>& x) const {
    Tensor<T> squeezed = global_avg_pool(x);                    // [N,C]
    Tensor<T> hidden = relu(linear(squeezed, w1, b1));          // [N,C/r]
    Tensor<T> gate = sigmoid(linear(hidden, w2, b2));           // [N,C]
    return scale_channels(x, gate);
}

template <typename T>
Rdcb<T>::Rdcb(ParamStore<T>& store, const std::string& prefix, const RdcbConfig& cfg_, Rng& rng)
    : cfg(cfg_) {
    check(cfg.channels >= 1 && cfg.growth >= 1, "Rdcb: bad config");
    dense.reserve(static_cast<size_t>(cfg.num_dense));
    for (int64_t i = 0; i < cfg.num_dense; ++i) {
        const int64_t cin = cfg.channels + i * cfg.growth;
        dense.emplace_back(store, prefix + ".dense." + std::to_string(i), cin, cfg.growth, 3, 1,
                           1, rng);
    }
    const int64_t fuse_in = cfg.channels + cfg.num_dense * cfg.growth;
    fuse = Conv2dLayer<T>(store, prefix + ".fuse", fuse_in, cfg.channels, 1, 1, 0, rng,
                          kResidualInitScale);
    att = ChannelAttention<T>(store, prefix + ".att", cfg.channels, cfg.reduction, rng);
}

template <typename T>
Tensor<T> Rdcb<T>::forward(const Tensor<T>& x) const {
    check(x.rank() == 4 && x.dim(1) == cfg.channels,
          "Rdcb: expected " + std::to_string(cfg.channels) + " channels, got " +
              shape_str(x.shape()));
    Tensor<T> cat = x;
    for (const auto& layer : dense) {
        Tensor<T> grown = relu(layer.forward(cat));
        cat = concat_channels<T>({cat, grown});
    }
    Tensor<T> fused = fuse.forward(cat);
    Tensor<T> attended = att.forward(fused);
    return add(x, attended);
}

template <typename T>
MambaBlock<T>::MambaBlock(ParamStore<T>& store, const std::string& prefix,
                          const MambaBlockConfig& cfg_, Rng& rng)
    : cfg(cfg_) {
    const int64_t c = cfg.model_dim;
    const int64_t inner = cfg.inner();
    const int64_t s = cfg.n_state;
    const int64_t r = cfg.effective_dt_rank();
    const int64_t k = cfg.conv_kernel;
    check(c >= 1 && inner >= 1 && s >= 1 && r >= 1 && k >= 1, "MambaBlock: bad config");

    ln_gamma = store.add(prefix + ".norm.gamma", {c}, std::vector<T>(static_cast<size_t>(c), T(1)));
    ln_beta = store.add(prefix + ".norm.beta", {c}, std::vector<T>(static_cast<size_t>(c), T(0)));
    in1_w = store.add(prefix + ".in1.weight", {inner, c}, fanin_uniform<T>(rng, inner * c, c));
    in1_b = store.add(prefix + ".in1.bias", {inner}, fanin_uniform<T>(rng, inner, c));
    in2_w = store.add(prefix + ".in2.weight", {inner, c}, fanin_uniform<T>(rng, inner * c, c));
    in2_b = store.add(prefix + ".in2.bias", {inner}, fanin_uniform<T>(rng, inner, c));
    conv_w = store.add(prefix + ".conv.weight", {inner, k}, fanin_uniform<T>(rng, inner * k, k));
    conv_b = store.add(prefix + ".conv.bias", {inner}, fanin_uniform<T>(rng, inner, k));

    SsmParams<T> seeded = SsmParams<T>::seeded(inner, s, r, rng);
    ssm.a_log = store.add(prefix + ".ssm.a_log", {inner, s}, seeded.a_log);
    ssm.dt_in_w = store.add(prefix + ".ssm.dt_in.weight", {r, inner}, seeded.dt_in_w);
    ssm.dt_out_w = store.add(prefix + ".ssm.dt_out.weight", {inner, r}, seeded.dt_out_w);
    ssm.dt_out_b = store.add(prefix + ".ssm.dt_out.bias", {inner}, seeded.dt_out_b);
    ssm.b_w = store.add(prefix + ".ssm.b_proj.weight", {s, inner}, seeded.b_w);
    ssm.c_w = store.add(prefix + ".ssm.c_proj.weight", {s, inner}, seeded.c_w);
    ssm.d_skip = store.add(prefix + ".ssm.d_skip", {inner}, seeded.d_skip);

    auto ow = fanin_uniform<T>(rng, c * inner, inner);
    auto ob = fanin_uniform<T>(rng, c, inner);
    for (auto& v : ow) v = static_cast<T>(v * kResidualInitScale);
    for (auto& v : ob) v = static_cast<T>(v * kResidualInitScale);
    out_w = store.add(prefix + ".out.weight", {c, inner}, std::move(ow));
    out_b = store.add(prefix + ".out.bias", {c}, std::move(ob));
}

template <typename T>
Tensor<T> MambaBlock<T>::forward(const Tensor<T>& x) const {
    check(x.rank() == 4 && x.dim(1) == cfg.model_dim,
          "MambaBlock: expected " + std::to_string(cfg.model_dim) + " channels, got " +
              shape_str(x.shape()));
    const int64_t h = x.dim(2), w = x.dim(3);
    Tensor<T> seq = nchw_to_nlc(x);  // [N,L,C]
    Tensor<T> normed = layer_norm(seq, ln_gamma, ln_beta, T(1e-5));
    Tensor<T> a = linear(normed, in1_w, in1_b);
    a = conv1d_depthwise(a, conv_w, conv_b, true);
    a = silu(a);
    a = ssm_apply(a, ssm);
    Tensor<T> gate = silu(linear(normed, in2_w, in2_b));
    Tensor<T> merged = mul(a, gate);
    Tensor<T> projected = linear(merged, out_w, out_b);
    return nlc_to_nchw(add(seq, projected), h, w);
}

template <typename T>
RdcbMamba<T>::RdcbMamba(ParamStore<T>& store, const std::string& prefix, int64_t channels,
                        int64_t n_state, bool use_rdcb_, bool use_mamba_, Rng& rng)
    : use_rdcb(use_rdcb_), use_mamba(use_mamba_) {
    if (use_rdcb) {
        RdcbConfig rc;
        rc.channels = channels;
        rc.growth = std::max<int64_t>(1, channels / 2);
        for (int i = 0; i < 2; ++i) {
            rdcbs.emplace_back(store, prefix + ".rdcb." + std::to_string(i), rc, rng);
        }
    } else {
        for (int i = 0; i < 2; ++i) {
            plain.emplace_back(store, prefix + ".plain." + std::to_string(i), channels, channels,
                               3, 1, 1, rng);
        }
    }
    if (use_mamba) {
        MambaBlockConfig mc;
        mc.model_dim = channels;
        mc.n_state = n_state;
        for (int i = 0; i < 2; ++i) {
            mambas.emplace_back(store, prefix + ".mamba." + std::to_string(i), mc, rng);
        }
    }
}

template <typename T>
Tensor<T> RdcbMamba<T>::forward(const Tensor<T>& x) const {
    Tensor<T> cur = x;
    if (use_rdcb) {
        for (const auto& blockn : rdcbs) cur = blockn.forward(cur);
    } else {
        for (const auto& layer : plain) cur = relu(layer.forward(cur));
    }
    for (const auto& mb : mambas) cur = mb.forward(cur);
    return cur;
}

#define MSFUM_INSTANTIATE_BLOCKS(T)   \
    template struct Conv2dLayer<T>;   \
    template struct ChannelAttention<T>; \
    template struct Rdcb<T>;          \
    template struct MambaBlock<T>;    \
    template struct RdcbMamba<T>;

MSFUM_INSTANTIATE_BLOCKS(float)
MSFUM_INSTANTIATE_BLOCKS(double)

#undef MSFUM_INSTANTIATE_BLOCKS

}  // namespace msfum
