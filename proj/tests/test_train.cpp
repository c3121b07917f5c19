#include <doctest.h>

#include <cmath>

#include "msfum/gradcheck.hpp"
#include "msfum/ops.hpp"
#include "msfum/synth.hpp"
#include "msfum/train.hpp"

using namespace msfum;

namespace {

NetworkConfig tiny_cfg() {
    NetworkConfig cfg;
    cfg.scale = 4;
    cfg.base_channels = 4;
    cfg.channel_cap = 8;
    cfg.n_state = 3;
    return cfg;
}

}  // namespace

TEST_CASE("l1_loss point values") {
    TensorF a = TensorF::from_data({2, 2}, {1, 2, 3, 4});
    TensorF b = TensorF::from_data({2, 2}, {1, 2, 3, 4});
    CHECK(l1_loss(a, b).item() == 0.0f);
    TensorF c = TensorF::from_data({2, 2}, {2, 3, 4, 5});
    CHECK(l1_loss(c, b).item() == doctest::Approx(1.0));
    CHECK_THROWS_AS(l1_loss(a, TensorF::zeros({3})), std::invalid_argument);
}

TEST_CASE("l1_loss gradient is the scaled sign, checked off the kink") {
    Rng rng(11);
    TensorD pred = TensorD::uniform({3, 4}, rng, -1, 1, true);
    TensorD target = TensorD::uniform({3, 4}, rng, 2, 3);  // keeps |pred-target| > 0
    auto report = gradcheck_loss([&]() { return l1_loss(pred, target); }, {pred}, 1e-5, 1e-6, 12);
    CHECK(report.pass);
    pred.zero_grad();
    backward(l1_loss(pred, target));
    for (double g : pred.grad()) CHECK(g == doctest::Approx(-1.0 / 12.0));
}

TEST_CASE("l2_loss gradient") {
    Rng rng(12);
    TensorD pred = TensorD::uniform({2, 3}, rng, -1, 1, true);
    TensorD target = TensorD::uniform({2, 3}, rng, -1, 1);
    auto report = gradcheck_loss([&]() { return l2_loss(pred, target); }, {pred}, 1e-5, 1e-6, 6);
    CHECK(report.pass);
}

TEST_CASE("rmse examples and properties") {
    DepthMap a;
    a.h = 2;
    a.w = 2;
    a.values = {1, 2, 3, 4};
    DepthMap b = a;
    CHECK(rmse(a, b) == 0.0);
    DepthMap c = a;
    for (auto& v : c.values) v += 2.5;
    CHECK(rmse(c, a) == doctest::Approx(2.5));
    CHECK(rmse(a, c) == doctest::Approx(2.5));
    CHECK(rmse(a, c) >= 0.0);

    DepthMap masked = a;
    masked.valid = {0, 0, 0, 0};
    CHECK_THROWS_AS(rmse(a, masked), std::invalid_argument);

    DepthMap partial = a;
    partial.valid = {1, 0, 0, 0};
    DepthMap off = a;
    off.values = {2, 99, 99, 99};
    CHECK(rmse(off, partial) == doctest::Approx(1.0));
}

TEST_CASE("lr schedule decays by steps") {
    TrainConfig cfg;
    CHECK(lr_at_epoch(0, cfg) == doctest::Approx(1e-4));
    CHECK(lr_at_epoch(149, cfg) == doctest::Approx(1e-4));
    CHECK(lr_at_epoch(150, cfg) == doctest::Approx(1e-5));
    CHECK(lr_at_epoch(300, cfg) == doctest::Approx(1e-6));
    double prev = lr_at_epoch(0, cfg);
    for (int64_t e = 1; e <= 600; ++e) {
        const double cur = lr_at_epoch(e, cfg);
        CHECK(cur <= prev);
        if (e % cfg.decay_every != 0) CHECK(cur == lr_at_epoch(e - 1, cfg));
        prev = cur;
    }
}

TEST_CASE("adam: zero gradient is a no-op from a fresh state") {
    ParamStore<float> params;
    params.add("w", {3}, {1.0f, -2.0f, 0.5f});
    AdamState st;
    st.init(params);
    TrainConfig cfg;
    adam_step(params, st, 0.1, cfg);
    const auto& w = params.get("w").data();
    CHECK(w[0] == 1.0f);
    CHECK(w[1] == -2.0f);
    CHECK(w[2] == 0.5f);
    for (float m : st.m[0]) CHECK(m == 0.0f);
    for (float v : st.v[0]) CHECK(v == 0.0f);
}

TEST_CASE("adam: first step moves by about -lr for a unit gradient") {
    ParamStore<float> params;
    Tensor<float> w = params.add("w", {1}, {0.0f});
    w.grad()[0] = 1.0f;
    AdamState st;
    st.init(params);
    TrainConfig cfg;
    adam_step(params, st, 0.1, cfg);
    // bias-corrected first step: -lr * 1 / (1 + eps * sqrt-correction)
    CHECK(std::abs(double(w.data()[0]) + 0.1) <= 1e-6);
    CHECK(st.t == 1);
}

TEST_CASE("adam: descends a quadratic monotonically") {
    ParamStore<float> params;
    Tensor<float> theta = params.add("theta", {1}, {1.0f});
    AdamState st;
    st.init(params);
    TrainConfig cfg;
    double prev_f = 1.0;
    for (int step = 0; step < 2; ++step) {
        theta.zero_grad();
        theta.grad()[0] = 2.0f * theta.data()[0];  // d(theta^2)
        adam_step(params, st, 0.05, cfg);
        const double f = double(theta.data()[0]) * double(theta.data()[0]);
        CHECK(f < prev_f);
        prev_f = f;
    }
}

TEST_CASE("adam: missing state is rejected") {
    ParamStore<float> params;
    params.add("w", {1}, {0.0f});
    AdamState st;  // not initialised
    TrainConfig cfg;
    CHECK_THROWS_AS(adam_step(params, st, 0.1, cfg), std::invalid_argument);
}

TEST_CASE("train_loop smoke: one epoch over four synthetic samples") {
    SynthConfig scfg;
    scfg.count = 5;
    scfg.size = 32;
    scfg.seed = 3;
    Dataset data = make_synth_dataset(scfg);
    REQUIRE(data.train.size() == 4);
    REQUIRE(data.val.size() == 1);

    TrainConfig tcfg;
    tcfg.epochs = 1;
    tcfg.patch = 32;
    tcfg.seed = 1;
    TrainResult result = train_loop(data, tcfg, tiny_cfg());
    REQUIRE(result.history.size() == 1);
    CHECK(std::isfinite(result.history[0].train_loss));
    CHECK(std::isfinite(result.history[0].val_rmse));
}

TEST_CASE("train_loop is deterministic for a fixed seed") {
    SynthConfig scfg;
    scfg.count = 6;
    scfg.size = 32;
    scfg.seed = 9;
    Dataset data = make_synth_dataset(scfg);
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.patch = 32;
    tcfg.seed = 77;

    TrainResult a = train_loop(data, tcfg, tiny_cfg());
    TrainResult b = train_loop(data, tcfg, tiny_cfg());
    CHECK(history_to_text(a.history) == history_to_text(b.history));
    for (int64_t i = 0; i < a.net.params().tensor_count(); ++i) {
        CHECK(a.net.params().entries()[static_cast<size_t>(i)].second.data() ==
              b.net.params().entries()[static_cast<size_t>(i)].second.data());
    }
}

TEST_CASE("evaluate_samples: constant scenes give (near) zero RMSE rows") {
    Sample s;
    s.id = "flat";
    s.hr.h = 32;
    s.hr.w = 32;
    s.hr.values.assign(32 * 32, 500.0);
    // a lone off-value pixel keeps normalization non-degenerate downstream
    s.hr.values[0] = 501.0;
    s.rgb.h = 32;
    s.rgb.w = 32;
    s.rgb.values.assign(32 * 32 * 3, 0.5);
    EvalReport report = evaluate_samples(nullptr, {s}, 4);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0].rmse <= 0.2);  // bicubic ringing around the single spike only
}

TEST_CASE("evaluate mean is the unweighted average of per-image rows") {
    Rng rng(31);
    auto make = [&rng](int64_t size, const std::string& id) {
        Sample s;
        s.id = id;
        s.hr.h = size;
        s.hr.w = size;
        s.hr.values.resize(static_cast<size_t>(size * size));
        for (auto& v : s.hr.values) v = rng.uniform(100.0, 1000.0);
        s.rgb.h = size;
        s.rgb.w = size;
        s.rgb.values.assign(static_cast<size_t>(size * size * 3), 0.5);
        return s;
    };
    std::vector<Sample> samples = {make(16, "a"), make(32, "b")};
    EvalReport report = evaluate_samples(nullptr, samples, 4);
    REQUIRE(report.rows.size() == 2);
    CHECK(report.mean_rmse ==
          doctest::Approx((report.rows[0].rmse + report.rows[1].rmse) / 2.0));
}

TEST_CASE("a zero-head network reproduces the bicubic row exactly") {
    SynthConfig scfg;
    scfg.count = 3;
    scfg.size = 32;
    scfg.seed = 13;
    Dataset data = make_synth_dataset(scfg);

    NetworkConfig ncfg = tiny_cfg();
    Network<float> net(ncfg, 21);
    Tensor<float> w = net.params().get("head.weight");
    Tensor<float> b = net.params().get("head.bias");
    std::fill(w.data().begin(), w.data().end(), 0.0f);
    std::fill(b.data().begin(), b.data().end(), 0.0f);

    EvalReport with_net = evaluate_samples(&net, data.train, 4);
    EvalReport baseline = evaluate_samples(nullptr, data.train, 4);
    REQUIRE(with_net.rows.size() == baseline.rows.size());
    for (size_t i = 0; i < with_net.rows.size(); ++i) {
        CHECK(with_net.rows[i].rmse == baseline.rows[i].rmse);
    }
    CHECK(with_net.mean_rmse == baseline.mean_rmse);
}

TEST_CASE("history serialization is line-delimited records") {
    std::vector<EpochRecord> hist = {{0, 1e-4, 0.5, 10.0}, {1, 1e-4, 0.25, 8.0}};
    const std::string text = history_to_text(hist);
    CHECK(text.find("epoch\tlr\ttrain_loss\tval_rmse\n") == 0);
    CHECK(text.find("\n1\t") != std::string::npos);
}
