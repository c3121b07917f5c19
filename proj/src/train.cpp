#include "msfum/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "msfum/ops.hpp"

namespace msfum {

void TrainConfig::validate() const {
    check(lr0 > 0 && decay_factor > 0 && decay_factor < 1, "TrainConfig: bad lr schedule");
    check(decay_every >= 1 && batch >= 1 && epochs >= 0 && patch >= 1, "TrainConfig: bad sizes");
    check(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1 && eps > 0, "TrainConfig: bad Adam");
}

double lr_at_epoch(int64_t epoch, const TrainConfig& cfg) {
    check(epoch >= 0, "lr_at_epoch: epoch must be >= 0");
    return cfg.lr0 * std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    check(pred.shape() == target.shape(), "l1_loss: shape mismatch " + shape_str(pred.shape()) +
                                              " vs " + shape_str(target.shape()));
    const int64_t n = pred.numel();
    const T* pp = pred.ptr();
    const T* pt = target.ptr();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) acc += std::abs(pp[i] - pt[i]);
    acc /= static_cast<T>(n);
    auto pi = pred.impl();
    auto ti = target.impl();
    auto fn = [pi, ti, n](const std::vector<T>& g, const GradSink<T>& sink) {
        const T* pv = pi->value.data();
        const T* tv = ti->value.data();
        const T scale = g[0] / static_cast<T>(n);
        if (pi->requires_grad) {
            auto& gp = sink(pi.get());
            for (int64_t i = 0; i < n; ++i) {
                const T d = pv[i] - tv[i];
                gp[i] += d > T(0) ? scale : (d < T(0) ? -scale : T(0));
            }
        }
        if (ti->requires_grad) {
            auto& gt = sink(ti.get());
            for (int64_t i = 0; i < n; ++i) {
                const T d = pv[i] - tv[i];
                gt[i] -= d > T(0) ? scale : (d < T(0) ? -scale : T(0));
            }
        }
    };
    return Tensor<T>::make_node({1}, {acc}, {pred, target}, std::move(fn));
}

template <typename T>
Tensor<T> l2_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    check(pred.shape() == target.shape(), "l2_loss: shape mismatch");
    const int64_t n = pred.numel();
    const T* pp = pred.ptr();
    const T* pt = target.ptr();
    T acc = T(0);
    for (int64_t i = 0; i < n; ++i) {
        const T d = pp[i] - pt[i];
        acc += d * d;
    }
    acc /= static_cast<T>(n);
    auto pi = pred.impl();
    auto ti = target.impl();
    auto fn = [pi, ti, n](const std::vector<T>& g, const GradSink<T>& sink) {
        const T* pv = pi->value.data();
        const T* tv = ti->value.data();
        const T scale = T(2) * g[0] / static_cast<T>(n);
        if (pi->requires_grad) {
            auto& gp = sink(pi.get());
            for (int64_t i = 0; i < n; ++i) gp[i] += scale * (pv[i] - tv[i]);
        }
        if (ti->requires_grad) {
            auto& gt = sink(ti.get());
            for (int64_t i = 0; i < n; ++i) gt[i] -= scale * (pv[i] - tv[i]);
        }
    };
    return Tensor<T>::make_node({1}, {acc}, {pred, target}, std::move(fn));
}

double rmse(const DepthMap& pred, const DepthMap& gt) {
    check(pred.h == gt.h && pred.w == gt.w, "rmse: dims differ");
    double acc = 0.0;
    int64_t count = 0;
    for (int64_t i = 0; i < gt.h * gt.w; ++i) {
        if (!gt.is_valid(i) || !pred.is_valid(i)) continue;
        const double d = pred.values[static_cast<size_t>(i)] - gt.values[static_cast<size_t>(i)];
        acc += d * d;
        ++count;
    }
    check(count > 0, "rmse: empty valid set");
    return std::sqrt(acc / static_cast<double>(count));
}

void AdamState::init(const ParamStore<float>& params) {
    t = 0;
    m.clear();
    v.clear();
    for (const auto& [name, tensor] : params.entries()) {
        m.emplace_back(tensor.data().size(), 0.0f);
        v.emplace_back(tensor.data().size(), 0.0f);
    }
}

void adam_step(ParamStore<float>& params, AdamState& state, double lr, const TrainConfig& cfg) {
    check(state.m.size() == static_cast<size_t>(params.tensor_count()),
          "adam_step: state not initialised for this parameter store");
    ++state.t;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    size_t idx = 0;
    for (const auto& [name, tensor] : params.entries()) {
        check(tensor.requires_grad(), "adam_step: parameter '" + name + "' has no grad buffer");
        Tensor<float> handle = tensor;  // shared storage
        auto& val = handle.data();
        const auto& grad = tensor.grad();
        auto& mi = state.m[idx];
        auto& vi = state.v[idx];
        for (size_t i = 0; i < val.size(); ++i) {
            const double g = static_cast<double>(grad[i]);
            const double mn = b1 * mi[i] + (1.0 - b1) * g;
            const double vn = b2 * vi[i] + (1.0 - b2) * g * g;
            mi[i] = static_cast<float>(mn);
            vi[i] = static_cast<float>(vn);
            const double mhat = mn / bc1;
            const double vhat = vn / bc2;
            val[i] = static_cast<float>(val[i] - lr * mhat / (std::sqrt(vhat) + cfg.eps));
        }
        ++idx;
    }
}

// ---------------------------------------------------------------------------
// Data

Dataset Dataset::from_manifest(const Manifest& m) {
    Dataset d;
    d.unit_scale = m.unit_scale;
    int64_t idx = 0;
    for (const auto& e : m.entries) {
        Sample s;
        s.id = e.depth_path;
        s.hr = load_depth(e.depth_path, m.unit_scale);
        s.rgb = load_rgb(e.rgb_path);
        check(s.rgb.h == s.hr.h && s.rgb.w == s.hr.w,
              "dataset entry " + std::to_string(idx) + ": rgb and depth dims differ");
        if (e.split == "val") {
            d.val.push_back(std::move(s));
        } else {
            d.train.push_back(std::move(s));
        }
        ++idx;
    }
    return d;
}

std::string history_to_text(const std::vector<EpochRecord>& history) {
    std::ostringstream os;
    os << "epoch\tlr\ttrain_loss\tval_rmse\n";
    char buf[160];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof(buf), "%lld\t%.17g\t%.17g\t%.17g\n",
                      static_cast<long long>(r.epoch), r.lr, r.train_loss, r.val_rmse);
        os << buf;
    }
    return os.str();
}

namespace {

// Whole-image tensors prepared once per sample, in the exact form the
// evaluation path consumes: the LR image is degraded, min-max normalized,
// and bicubically pre-upsampled at full size; patches are crops of these
// planes, so training sees the same statistics as inference.
struct PreparedImage {
    int64_t h = 0, w = 0;
    std::vector<float> up_norm;      // h*w
    std::vector<float> target_norm;  // h*w
    std::vector<float> rgb;          // 3*h*w planar
};

PreparedImage prepare_image(const Sample& s, int64_t scale) {
    const int64_t h = s.hr.h, w = s.hr.w;
    DepthMap lr = degrade(s.hr, scale, DegradeMethod::bicubic);
    auto [lr_norm, meta] = min_max_normalize(lr);
    (void)lr_norm;
    DepthMap up = bicubic_resize(lr, h, w);

    PreparedImage p;
    p.h = h;
    p.w = w;
    const double span = meta.span();
    p.up_norm.resize(static_cast<size_t>(h * w));
    p.target_norm.resize(static_cast<size_t>(h * w));
    for (int64_t i = 0; i < h * w; ++i) {
        p.up_norm[static_cast<size_t>(i)] =
            static_cast<float>((up.values[static_cast<size_t>(i)] - meta.min) / span);
        p.target_norm[static_cast<size_t>(i)] =
            static_cast<float>((s.hr.values[static_cast<size_t>(i)] - meta.min) / span);
    }
    const int64_t hw = h * w;
    p.rgb.resize(static_cast<size_t>(3 * hw));
    for (int64_t ch = 0; ch < 3; ++ch) {
        for (int64_t i = 0; i < hw; ++i) {
            p.rgb[static_cast<size_t>(ch * hw + i)] =
                static_cast<float>(s.rgb.values[static_cast<size_t>(i * 3 + ch)]);
        }
    }
    return p;
}

void copy_crop(const float* src, int64_t src_w, int64_t oy, int64_t ox, int64_t patch,
               float* dst) {
    for (int64_t y = 0; y < patch; ++y) {
        const float* row = src + (oy + y) * src_w + ox;
        std::copy(row, row + patch, dst + y * patch);
    }
}

double validation_rmse(const Network<float>& net, const std::vector<Sample>& val, int64_t scale) {
    if (val.empty()) return 0.0;
    EvalReport report = evaluate_samples(&net, val, scale);
    return report.mean_rmse;
}

}  // namespace

TrainResult train_loop(const Dataset& data, const TrainConfig& tcfg, const NetworkConfig& ncfg,
                       const EpochCallback& on_epoch) {
    tcfg.validate();
    check(!data.train.empty(), "train_loop: empty training set");
    const int64_t s = ncfg.scale;
    for (const auto& smp : data.train) {
        check(smp.hr.h >= tcfg.patch && smp.hr.w >= tcfg.patch,
              "train_loop: sample '" + smp.id + "' smaller than patch " +
                  std::to_string(tcfg.patch));
    }
    check(tcfg.patch % s == 0, "train_loop: patch must be divisible by the scale factor");

    TrainResult result{Network<float>(ncfg, tcfg.seed), {}};
    Network<float>& net = result.net;
    AdamState adam;
    adam.init(net.params());
    Rng rng(tcfg.seed ^ 0x9E3779B97F4A7C15ull);

    const int64_t ntrain = static_cast<int64_t>(data.train.size());
    const int64_t patch = tcfg.patch;
    const int64_t hw = patch * patch;

    std::vector<PreparedImage> prepared;
    prepared.reserve(static_cast<size_t>(ntrain));
    for (const auto& smp : data.train) prepared.push_back(prepare_image(smp, s));

    for (int64_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(epoch, tcfg);
        std::vector<int64_t> order(static_cast<size_t>(ntrain));
        for (int64_t i = 0; i < ntrain; ++i) order[static_cast<size_t>(i)] = i;
        for (int64_t i = ntrain - 1; i > 0; --i) {
            std::swap(order[static_cast<size_t>(i)],
                      order[static_cast<size_t>(rng.uniform_int(0, i))]);
        }

        double loss_acc = 0.0;
        int64_t batches = 0;
        for (int64_t start = 0; start < ntrain; start += tcfg.batch) {
            const int64_t bsz = std::min(tcfg.batch, ntrain - start);
            std::vector<float> up_b(static_cast<size_t>(bsz * hw));
            std::vector<float> tgt_b(static_cast<size_t>(bsz * hw));
            std::vector<float> rgb_b(static_cast<size_t>(bsz * 3 * hw));
            for (int64_t bi = 0; bi < bsz; ++bi) {
                const PreparedImage& img = prepared[static_cast<size_t>(order[start + bi])];
                const int64_t max_oy = (img.h - patch) / s;
                const int64_t max_ox = (img.w - patch) / s;
                const int64_t oy = s * (max_oy > 0 ? rng.uniform_int(0, max_oy) : 0);
                const int64_t ox = s * (max_ox > 0 ? rng.uniform_int(0, max_ox) : 0);
                copy_crop(img.up_norm.data(), img.w, oy, ox, patch, up_b.data() + bi * hw);
                copy_crop(img.target_norm.data(), img.w, oy, ox, patch,
                          tgt_b.data() + bi * hw);
                const int64_t img_hw = img.h * img.w;
                for (int64_t ch = 0; ch < 3; ++ch) {
                    copy_crop(img.rgb.data() + ch * img_hw, img.w, oy, ox, patch,
                              rgb_b.data() + (bi * 3 + ch) * hw);
                }
            }
            TensorF d_up = TensorF::from_data({bsz, 1, patch, patch}, std::move(up_b));
            TensorF target = TensorF::from_data({bsz, 1, patch, patch}, std::move(tgt_b));
            TensorF rgb = TensorF::from_data({bsz, 3, patch, patch}, std::move(rgb_b));

            TensorF pred = net.forward(d_up, rgb);
            TensorF loss = tcfg.use_l2 ? l2_loss(pred, target) : l1_loss(pred, target);
            const double loss_value = static_cast<double>(loss.item());
            if (!std::isfinite(loss_value)) {
                throw std::runtime_error("train_loop: non-finite loss at epoch " +
                                         std::to_string(epoch) + " batch " +
                                         std::to_string(batches));
            }
            backward(loss);
            adam_step(net.params(), adam, lr, tcfg);
            net.params().zero_grads();
            loss_acc += loss_value;
            ++batches;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = lr;
        rec.train_loss = batches > 0 ? loss_acc / static_cast<double>(batches) : 0.0;
        rec.val_rmse = validation_rmse(net, data.val, s);
        result.history.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

DepthMap center_crop_to_multiple(const DepthMap& d, int64_t s) {
    const int64_t ch = (d.h / s) * s;
    const int64_t cw = (d.w / s) * s;
    if (ch == d.h && cw == d.w) return d;
    const int64_t oy = (d.h - ch) / 2;
    const int64_t ox = (d.w - cw) / 2;
    DepthMap out;
    out.h = ch;
    out.w = cw;
    out.unit_scale = d.unit_scale;
    out.values.resize(static_cast<size_t>(ch * cw));
    if (d.has_mask()) out.valid.resize(static_cast<size_t>(ch * cw));
    for (int64_t y = 0; y < ch; ++y) {
        for (int64_t x = 0; x < cw; ++x) {
            out.values[static_cast<size_t>(y * cw + x)] = d.at(oy + y, ox + x);
            if (d.has_mask()) {
                out.valid[static_cast<size_t>(y * cw + x)] =
                    d.valid[static_cast<size_t>((oy + y) * d.w + ox + x)];
            }
        }
    }
    return out;
}

GuidanceImage center_crop_to_multiple(const GuidanceImage& g, int64_t s) {
    const int64_t ch = (g.h / s) * s;
    const int64_t cw = (g.w / s) * s;
    if (ch == g.h && cw == g.w) return g;
    const int64_t oy = (g.h - ch) / 2;
    const int64_t ox = (g.w - cw) / 2;
    GuidanceImage out;
    out.h = ch;
    out.w = cw;
    out.values.resize(static_cast<size_t>(ch * cw * 3));
    for (int64_t y = 0; y < ch; ++y) {
        for (int64_t x = 0; x < cw; ++x) {
            for (int64_t k = 0; k < 3; ++k) {
                out.values[static_cast<size_t>((y * cw + x) * 3 + k)] = g.at(oy + y, ox + x, k);
            }
        }
    }
    return out;
}

EvalRow evaluate_one(const Network<float>* net, const Sample& s, int64_t scale,
                     DegradeMethod method) {
    EvalRow row;
    row.id = s.id;
    DepthMap gt = center_crop_to_multiple(s.hr, scale);
    GuidanceImage rgb = center_crop_to_multiple(s.rgb, scale);
    DepthMap lr = degrade(gt, scale, method);
    DepthMap pred;
    if (net) {
        pred = net->super_resolve(lr, rgb).pred;
    } else {
        pred = bicubic_resize(lr, gt.h, gt.w);
    }
    row.rmse = rmse(pred, gt);
    row.ok = true;
    return row;
}

}  // namespace

std::string EvalReport::to_text() const {
    std::ostringstream os;
    os << "image\tRMSE\n";
    char buf[64];
    for (const auto& r : rows) {
        if (r.ok) {
            std::snprintf(buf, sizeof(buf), "%.6g", r.rmse);
            os << r.id << "\t" << buf << "\n";
        } else {
            os << r.id << "\tSKIPPED (" << r.note << ")\n";
        }
    }
    std::snprintf(buf, sizeof(buf), "%.6g", mean_rmse);
    os << "mean\t" << buf << "\t(" << evaluated << " images, " << unit_note << ")\n";
    return os.str();
}

EvalReport evaluate_samples(const Network<float>* net, const std::vector<Sample>& samples,
                            int64_t scale, DegradeMethod method) {
    EvalReport report;
    double acc = 0.0;
    for (const auto& s : samples) {
        EvalRow row = evaluate_one(net, s, scale, method);
        acc += row.rmse;
        ++report.evaluated;
        report.rows.push_back(std::move(row));
    }
    report.mean_rmse = report.evaluated > 0 ? acc / static_cast<double>(report.evaluated) : 0.0;
    report.unit_note = "stored depth units";
    return report;
}

EvalReport evaluate_manifest(const Network<float>* net, const Manifest& manifest, int64_t scale,
                             const std::string& split_filter, DegradeMethod method) {
    EvalReport report;
    double acc = 0.0;
    for (const auto& e : manifest.entries) {
        if (!split_filter.empty() && e.split != split_filter) continue;
        EvalRow row;
        row.id = e.depth_path;
        try {
            Sample s;
            s.id = e.depth_path;
            s.hr = load_depth(e.depth_path, manifest.unit_scale);
            s.rgb = load_rgb(e.rgb_path);
            row = evaluate_one(net, s, scale, method);
        } catch (const std::exception& ex) {
            row.ok = false;
            row.note = ex.what();
        }
        if (row.ok) {
            acc += row.rmse;
            ++report.evaluated;
        }
        report.rows.push_back(std::move(row));
    }
    report.mean_rmse = report.evaluated > 0 ? acc / static_cast<double>(report.evaluated) : 0.0;
    std::ostringstream os;
    os << "stored depth units, unit_scale=" << manifest.unit_scale;
    report.unit_note = os.str();
    return report;
}

// ---------------------------------------------------------------------------
// Ablation

std::string AblationReport::to_text() const {
    std::ostringstream os;
    os << "# seed " << seed << " epochs " << epochs << "\n";
    os << "config\tguidance\trdcb\tmamba\tval_rmse\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.6g", r.val_rmse);
        os << r.label << "\t" << (r.flags.use_guidance ? "yes" : "-") << "\t"
           << (r.flags.use_rdcb ? "yes" : "-") << "\t" << (r.flags.use_mamba ? "yes" : "-")
           << "\t" << buf << "\n";
    }
    return os.str();
}

AblationReport ablation_run(const Dataset& data, const TrainConfig& tcfg,
                            const NetworkConfig& base_cfg,
                            const std::function<void(const std::string&, const EpochRecord&)>&
                                on_epoch) {
    struct Row {
        const char* label;
        AblationFlags flags;
    };
    const Row matrix[5] = {
        {"baseline", {false, false, false}},
        {"+guidance", {true, false, false}},
        {"+guidance+rdcb", {true, true, false}},
        {"+guidance+mamba", {true, false, true}},
        {"full", {true, true, true}},
    };
    AblationReport report;
    report.seed = tcfg.seed;
    report.epochs = tcfg.epochs;
    for (const Row& r : matrix) {
        NetworkConfig cfg = base_cfg;
        cfg.ablation = r.flags;
        EpochCallback cb;
        if (on_epoch) {
            const std::string label = r.label;
            cb = [&on_epoch, label](const EpochRecord& rec) { on_epoch(label, rec); };
        }
        TrainResult res = train_loop(data, tcfg, cfg, cb);
        AblationRow out;
        out.label = r.label;
        out.flags = r.flags;
        out.val_rmse = res.history.empty() ? 0.0 : res.history.back().val_rmse;
        report.rows.push_back(std::move(out));
    }
    return report;
}

template Tensor<float> l1_loss<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> l1_loss<double>(const Tensor<double>&, const Tensor<double>&);
template Tensor<float> l2_loss<float>(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> l2_loss<double>(const Tensor<double>&, const Tensor<double>&);

}  // namespace msfum
