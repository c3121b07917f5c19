#include <doctest.h>

#include <cmath>

#include "msfum/blocks.hpp"
#include "msfum/ops.hpp"

using namespace msfum;

namespace {

template <typename T>
void zero_all(ParamStore<T>& store) {
    for (const auto& [name, t] : store.entries()) {
        Tensor<T> handle = t;
        std::fill(handle.data().begin(), handle.data().end(), T(0));
    }
}

}  // namespace

TEST_CASE("channel_attention: zero weights gate at one half") {
    ParamStore<float> store;
    Rng rng(1);
    ChannelAttention<float> att(store, "att", 8, 8, rng);
    zero_all(store);
    Rng xr(2);
    TensorF x = TensorF::uniform({2, 8, 3, 3}, xr, -1, 1);
    TensorF y = att.forward(x);
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == 0.5f * x.data()[i]);
}

TEST_CASE("channel_attention: zero input stays zero") {
    ParamStore<float> store;
    Rng rng(3);
    ChannelAttention<float> att(store, "att", 4, 2, rng);
    TensorF x = TensorF::zeros({1, 4, 5, 5});
    TensorF y = att.forward(x);
    for (float v : y.data()) CHECK(v == 0.0f);
}

TEST_CASE("channel_attention: gate has rank-1 spatial structure and lies in (0,1)") {
    ParamStore<float> store;
    Rng rng(5);
    ChannelAttention<float> att(store, "att", 6, 2, rng);
    Rng xr(6);
    TensorF x = TensorF::uniform({2, 6, 4, 4}, xr, 0.5, 2.0);
    TensorF y = att.forward(x);
    for (int64_t n = 0; n < 2; ++n) {
        for (int64_t c = 0; c < 6; ++c) {
            const float gate = y.at({n, c, 0, 0}) / x.at({n, c, 0, 0});
            CHECK(gate > 0.0f);
            CHECK(gate < 1.0f);
            for (int64_t h = 0; h < 4; ++h)
                for (int64_t w = 0; w < 4; ++w)
                    CHECK(y.at({n, c, h, w}) ==
                          doctest::Approx(gate * x.at({n, c, h, w})).epsilon(1e-6));
        }
    }
}

TEST_CASE("rdcb: zero weights reduce to the identity bitwise") {
    ParamStore<float> store;
    Rng rng(7);
    RdcbConfig cfg;
    cfg.channels = 8;
    cfg.growth = 4;
    cfg.reduction = 4;
    Rdcb<float> block(store, "rdcb", cfg, rng);
    zero_all(store);
    Rng xr(8);
    TensorF x = TensorF::uniform({1, 8, 6, 6}, xr, -1, 1);
    TensorF y = block.forward(x);
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("rdcb: shape preserved across channel/growth choices") {
    for (auto [c, g] : {std::pair<int64_t, int64_t>{4, 2}, {8, 4}, {6, 3}}) {
        ParamStore<float> store;
        Rng rng(9);
        RdcbConfig cfg;
        cfg.channels = c;
        cfg.growth = g;
        cfg.reduction = 2;
        Rdcb<float> block(store, "rdcb", cfg, rng);
        Rng xr(10);
        TensorF x = TensorF::uniform({2, c, 5, 7}, xr, -1, 1);
        TensorF y = block.forward(x);
        CHECK(y.shape() == x.shape());
        CHECK(all_finite(y));
    }
    ParamStore<float> store;
    Rng rng(11);
    RdcbConfig cfg;
    cfg.channels = 4;
    cfg.growth = 2;
    Rdcb<float> block(store, "rdcb", cfg, rng);
    CHECK_THROWS_AS(block.forward(TensorF::zeros({1, 5, 4, 4})), std::invalid_argument);
}

TEST_CASE("mamba block: zero output projection is the identity bitwise") {
    ParamStore<float> store;
    Rng rng(13);
    MambaBlockConfig cfg;
    cfg.model_dim = 6;
    cfg.n_state = 4;
    MambaBlock<float> block(store, "mb", cfg, rng);
    {
        Tensor<float> w = store.get("mb.out.weight");
        Tensor<float> b = store.get("mb.out.bias");
        std::fill(w.data().begin(), w.data().end(), 0.0f);
        std::fill(b.data().begin(), b.data().end(), 0.0f);
    }
    Rng xr(14);
    TensorF x = TensorF::uniform({2, 6, 3, 5}, xr, -1, 1);
    TensorF y = block.forward(x);
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("mamba block: shape preserved for arbitrary spatial sizes") {
    ParamStore<float> store;
    Rng rng(15);
    MambaBlockConfig cfg;
    cfg.model_dim = 4;
    cfg.n_state = 3;
    MambaBlock<float> block(store, "mb", cfg, rng);
    for (auto [h, w] : {std::pair<int64_t, int64_t>{2, 2}, {3, 7}, {8, 5}}) {
        Rng xr(16);
        TensorF x = TensorF::uniform({1, 4, h, w}, xr, -1, 1);
        TensorF y = block.forward(x);
        CHECK(y.shape() == x.shape());
        CHECK(all_finite(y));
    }
}

TEST_CASE("mamba block: batch permutation equivariance") {
    ParamStore<float> store;
    Rng rng(17);
    MambaBlockConfig cfg;
    cfg.model_dim = 4;
    cfg.n_state = 3;
    MambaBlock<float> block(store, "mb", cfg, rng);
    Rng xr(18);
    TensorF a = TensorF::uniform({1, 4, 4, 4}, xr, -1, 1);
    TensorF b = TensorF::uniform({1, 4, 4, 4}, xr, -1, 1);
    auto pack = [](const TensorF& first, const TensorF& second) {
        std::vector<float> data(first.data());
        data.insert(data.end(), second.data().begin(), second.data().end());
        return TensorF::from_data({2, 4, 4, 4}, data);
    };
    TensorF yab = block.forward(pack(a, b));
    TensorF yba = block.forward(pack(b, a));
    const size_t half = a.data().size();
    for (size_t i = 0; i < half; ++i) {
        CHECK(yab.data()[i] == yba.data()[half + i]);
        CHECK(yab.data()[half + i] == yba.data()[i]);
    }
}

TEST_CASE("rdcb_mamba: zero weights reduce to the identity bitwise") {
    ParamStore<float> store;
    Rng rng(19);
    RdcbMamba<float> block(store, "rm", 6, 3, true, true, rng);
    zero_all(store);
    Rng xr(20);
    TensorF x = TensorF::uniform({1, 6, 4, 4}, xr, -1, 1);
    TensorF y = block.forward(x);
    for (size_t i = 0; i < x.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("rdcb_mamba equals the manual four-stage composition") {
    ParamStore<float> store;
    Rng rng(21);
    RdcbMamba<float> block(store, "rm", 6, 3, true, true, rng);
    Rng xr(22);
    TensorF x = TensorF::uniform({1, 6, 5, 5}, xr, -1, 1);
    TensorF y = block.forward(x);
    TensorF manual = block.mambas[1].forward(
        block.mambas[0].forward(block.rdcbs[1].forward(block.rdcbs[0].forward(x))));
    for (size_t i = 0; i < y.data().size(); ++i) {
        CHECK(y.data()[i] == doctest::Approx(manual.data()[i]).epsilon(1e-6));
    }
    CHECK(y.shape() == x.shape());
}

TEST_CASE("rdcb_mamba ablation variants change structure") {
    {
        ParamStore<float> store;
        Rng rng(23);
        RdcbMamba<float> block(store, "rm", 4, 3, false, true, rng);
        for (const auto& [name, t] : store.entries()) {
            CHECK(name.find("rdcb") == std::string::npos);
        }
        CHECK(block.plain.size() == 2);
    }
    {
        ParamStore<float> store;
        Rng rng(24);
        RdcbMamba<float> block(store, "rm", 4, 3, true, false, rng);
        for (const auto& [name, t] : store.entries()) {
            CHECK(name.find("mamba") == std::string::npos);
        }
        CHECK(block.mambas.empty());
        Rng xr(25);
        TensorF x = TensorF::uniform({1, 4, 4, 4}, xr, -1, 1);
        CHECK(block.forward(x).shape() == x.shape());
    }
}
