#include "msfum/gradcheck_suite.hpp"

#include "msfum/blocks.hpp"
#include "msfum/network.hpp"
#include "msfum/ops.hpp"
#include "msfum/ssm.hpp"
#include "msfum/train.hpp"

namespace msfum {

namespace {

using TD = Tensor<double>;

constexpr double kStep = 1e-5;
constexpr double kTolPrimitive = 1e-6;
constexpr double kTolBlock = 1e-5;

TD rand_t(std::vector<int64_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    return TD::uniform(std::move(shape), rng, lo, hi);
}

std::vector<TD> store_tensors(const ParamStore<double>& store) {
    std::vector<TD> out;
    for (const auto& [name, t] : store.entries()) out.push_back(t);
    return out;
}

SuiteEntry check_map(const std::string& name, double tol,
                     const std::function<TD(const TD&)>& f, const TD& x) {
    SuiteEntry e;
    e.name = name;
    e.tol = tol;
    e.report = gradcheck(f, x, kStep, tol);
    return e;
}

SuiteEntry check_loss(const std::string& name, double tol, const std::function<TD()>& loss,
                      std::vector<TD> wrt, int64_t coords_per_tensor) {
    SuiteEntry e;
    e.name = name;
    e.tol = tol;
    e.report = gradcheck_loss(loss, wrt, kStep, tol, coords_per_tensor);
    return e;
}

}  // namespace

std::vector<SuiteEntry> run_gradcheck_suite() {
    std::vector<SuiteEntry> out;
    Rng rng(1234);

    // primitives ------------------------------------------------------------
    {
        TD x = rand_t({1, 2, 5, 5}, rng);
        TD w = rand_t({3, 2, 3, 3}, rng);
        TD b = rand_t({3}, rng);
        for (auto t : {x, w, b}) t.set_requires_grad(true);
        TD proj = rand_t({1, 3, 5, 5}, rng, 0.5, 1.5);
        out.push_back(check_loss("conv2d", kTolPrimitive,
                                 [&]() { return sum(mul(conv2d(x, w, b, 1, 1), proj)); },
                                 {x, w, b}, 10));
        TD xs = rand_t({1, 3, 6, 6}, rng);
        TD ws = rand_t({4, 3, 3, 3}, rng);
        TD bs = rand_t({4}, rng);
        for (auto t : {xs, ws, bs}) t.set_requires_grad(true);
        TD projs = rand_t({1, 4, 3, 3}, rng, 0.5, 1.5);
        out.push_back(check_loss("conv2d_stride2", kTolPrimitive,
                                 [&]() { return sum(mul(conv2d(xs, ws, bs, 2, 1), projs)); },
                                 {xs, ws, bs}, 10));
    }
    {
        TD x = rand_t({2, 7, 3}, rng);
        TD w = rand_t({3, 4}, rng);
        TD b = rand_t({3}, rng);
        for (auto t : {x, w, b}) t.set_requires_grad(true);
        TD proj = rand_t({2, 7, 3}, rng, 0.5, 1.5);
        out.push_back(check_loss(
            "conv1d_depthwise", kTolPrimitive,
            [&]() { return sum(mul(conv1d_depthwise(x, w, b, true), proj)); }, {x, w, b}, 10));
    }
    {
        TD x = rand_t({2, 3, 5}, rng);
        TD w = rand_t({4, 5}, rng);
        TD b = rand_t({4}, rng);
        for (auto t : {x, w, b}) t.set_requires_grad(true);
        TD proj = rand_t({2, 3, 4}, rng, 0.5, 1.5);
        out.push_back(check_loss("linear", kTolPrimitive,
                                 [&]() { return sum(mul(linear(x, w, b), proj)); }, {x, w, b},
                                 10));
    }
    {
        // relu checked away from the kink at 0
        TD x = rand_t({40}, rng, 0.2, 1.5);
        TD xn = rand_t({40}, rng, -1.5, -0.2);
        out.push_back(check_map("silu", kTolPrimitive,
                                [](const TD& in) { return silu(in); }, rand_t({40}, rng)));
        out.push_back(check_map("sigmoid", kTolPrimitive,
                                [](const TD& in) { return sigmoid(in); }, rand_t({40}, rng)));
        out.push_back(check_map("softplus", kTolPrimitive,
                                [](const TD& in) { return softplus(in); }, rand_t({40}, rng)));
        out.push_back(check_map("relu_pos", kTolPrimitive,
                                [](const TD& in) { return relu(in); }, x));
        out.push_back(check_map("relu_neg", kTolPrimitive,
                                [](const TD& in) { return relu(in); }, xn));
    }
    {
        TD x = rand_t({2, 6, 5}, rng);
        TD g = rand_t({5}, rng, 0.5, 1.5);
        TD b = rand_t({5}, rng);
        for (auto t : {x, g, b}) t.set_requires_grad(true);
        TD proj = rand_t({2, 6, 5}, rng, 0.5, 1.5);
        out.push_back(check_loss("layer_norm", kTolBlock,
                                 [&]() { return sum(mul(layer_norm(x, g, b, 1e-5), proj)); },
                                 {x, g, b}, 10));
    }
    out.push_back(check_map("global_avg_pool", kTolPrimitive,
                            [](const TD& in) { return global_avg_pool(in); },
                            rand_t({2, 3, 4, 4}, rng)));
    {
        TD other = rand_t({1, 3, 3, 3}, rng);
        out.push_back(check_map(
            "concat_channels", kTolPrimitive,
            [&](const TD& in) { return concat_channels<double>({in, other}); },
            rand_t({1, 2, 3, 3}, rng)));
    }
    {
        TD gate = rand_t({2, 3}, rng, 0.1, 0.9);
        TD x = rand_t({2, 3, 4, 4}, rng);
        for (auto t : {gate, x}) t.set_requires_grad(true);
        TD proj = rand_t({2, 3, 4, 4}, rng, 0.5, 1.5);
        out.push_back(check_loss("scale_channels", kTolPrimitive,
                                 [&]() { return sum(mul(scale_channels(x, gate), proj)); },
                                 {x, gate}, 10));
    }
    out.push_back(check_map("upsample_bilinear_x2", kTolPrimitive,
                            [](const TD& in) { return upsample_bilinear_x2(in); },
                            rand_t({1, 2, 4, 4}, rng)));
    {
        TD target = rand_t({2, 12}, rng);
        out.push_back(check_map("l1_loss", kTolPrimitive,
                                [&](const TD& in) { return l1_loss(in, target); },
                                rand_t({2, 12}, rng)));
    }
    {
        Rng prng(55);
        SsmParams<double> kp = SsmParams<double>::seeded(4, 3, 2, prng);
        SsmParamTensors<double> p = SsmParamTensors<double>::from_params(kp);
        for (auto t : p.all()) t.set_requires_grad(true);
        TD x = rand_t({1, 8, 4}, rng);
        x.set_requires_grad(true);
        auto loss_inputs = p.all();
        loss_inputs.push_back(x);
        TD proj = rand_t({1, 8, 4}, rng, 0.5, 1.5);
        out.push_back(check_loss(
            "ssm_apply", kTolBlock,
            [&]() { return sum(mul(ssm_apply(x, p), proj)); }, loss_inputs, 8));
    }

    // blocks ------------------------------------------------------------
    {
        ParamStore<double> store;
        Rng brng(91);
        ChannelAttention<double> att(store, "att", 8, 4, brng);
        TD x = rand_t({1, 8, 4, 4}, rng);
        x.set_requires_grad(true);
        auto wrt = store_tensors(store);
        wrt.push_back(x);
        TD proj = rand_t({1, 8, 4, 4}, rng, 0.5, 1.5);
        out.push_back(check_loss("channel_attention", kTolBlock,
                                 [&]() { return sum(mul(att.forward(x), proj)); }, wrt, 6));
    }
    {
        ParamStore<double> store;
        Rng brng(92);
        RdcbConfig rc;
        rc.channels = 8;
        rc.growth = 4;
        rc.reduction = 4;
        Rdcb<double> block(store, "rdcb", rc, brng);
        TD x = rand_t({1, 8, 6, 6}, rng);
        x.set_requires_grad(true);
        auto wrt = store_tensors(store);
        wrt.push_back(x);
        TD proj = rand_t({1, 8, 6, 6}, rng, 0.5, 1.5);
        out.push_back(check_loss("rdcb_forward", kTolBlock,
                                 [&]() { return sum(mul(block.forward(x), proj)); }, wrt, 4));
    }
    {
        ParamStore<double> store;
        Rng brng(93);
        MambaBlockConfig mc;
        mc.model_dim = 4;
        mc.n_state = 3;
        MambaBlock<double> block(store, "mamba", mc, brng);
        TD x = rand_t({1, 4, 4, 4}, rng);
        x.set_requires_grad(true);
        auto wrt = store_tensors(store);
        wrt.push_back(x);
        TD proj = rand_t({1, 4, 4, 4}, rng, 0.5, 1.5);
        out.push_back(check_loss("mamba_block_forward", kTolBlock,
                                 [&]() { return sum(mul(block.forward(x), proj)); }, wrt, 4));
    }
    {
        ParamStore<double> store;
        Rng brng(94);
        RdcbMamba<double> block(store, "rm", 6, 3, true, true, brng);
        TD x = rand_t({1, 6, 4, 4}, rng);
        x.set_requires_grad(true);
        auto wrt = store_tensors(store);
        wrt.push_back(x);
        TD proj = rand_t({1, 6, 4, 4}, rng, 0.5, 1.5);
        out.push_back(check_loss("rdcb_mamba_forward", kTolBlock,
                                 [&]() { return sum(mul(block.forward(x), proj)); }, wrt, 3));
    }
    {
        ParamStore<double> store;
        Rng brng(95);
        Conv2dLayer<double> proj_conv(store, "proj", 24, 8, 1, 1, 0, brng);
        RdcbMamba<double> block(store, "rm", 8, 3, true, true, brng);
        TD skip = rand_t({1, 8, 4, 4}, rng);
        TD up = rand_t({1, 8, 4, 4}, rng);
        TD guide = rand_t({1, 8, 4, 4}, rng);
        skip.set_requires_grad(true);
        up.set_requires_grad(true);
        guide.set_requires_grad(true);
        auto wrt = store_tensors(store);
        wrt.push_back(skip);
        wrt.push_back(up);
        wrt.push_back(guide);
        TD proj = rand_t({1, 8, 4, 4}, rng, 0.5, 1.5);
        out.push_back(check_loss(
            "fuse", kTolBlock,
            [&]() {
                return sum(mul(fuse_features(skip, up, &guide, proj_conv, block), proj));
            },
            wrt, 3));
    }
    {
        NetworkConfig cfg;
        cfg.scale = 4;
        cfg.base_channels = 4;
        cfg.channel_cap = 8;
        cfg.n_state = 3;
        Network<double> net(cfg, 7);
        TD d_up = rand_t({1, 1, 8, 8}, rng, 0.0, 1.0);
        TD rgb = rand_t({1, 3, 8, 8}, rng, 0.0, 1.0);
        TD target = rand_t({1, 1, 8, 8}, rng, 0.0, 1.0);
        auto wrt = store_tensors(net.params());
        out.push_back(check_loss(
            "network_forward_l1", kTolBlock,
            [&]() { return l1_loss(net.forward(d_up, rgb), target); }, wrt, 2));
    }
    return out;
}

}  // namespace msfum
