#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "msfum/dataset_io.hpp"
#include "msfum/image_ops.hpp"
#include "msfum/network.hpp"

namespace msfum {

struct TrainConfig {
    double lr0 = 1e-4;
    double decay_factor = 0.1;
    int64_t decay_every = 150;  // epochs
    int64_t batch = 2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    int64_t epochs = 100;
    int64_t patch = 256;
    uint64_t seed = 0;
    bool use_l2 = false;

    void validate() const;
};

// lr0 * decay^floor(e / decay_every)
double lr_at_epoch(int64_t epoch, const TrainConfig& cfg);

// Mean absolute error; subgradient 0 at ties.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);

template <typename T>
Tensor<T> l2_loss(const Tensor<T>& pred, const Tensor<T>& target);

// sqrt(mean((pred-gt)^2)) over valid pixels, in stored depth units.
double rmse(const DepthMap& pred, const DepthMap& gt);

// Bias-corrected Adam over a parameter store; gradients are read from the
// tensors' grad buffers, the caller zeroes them afterwards.
struct AdamState {
    int64_t t = 0;
    std::vector<std::vector<float>> m;
    std::vector<std::vector<float>> v;

    void init(const ParamStore<float>& params);
};

void adam_step(ParamStore<float>& params, AdamState& state, double lr, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Data plumbing

struct Sample {
    std::string id;
    DepthMap hr;
    GuidanceImage rgb;
};

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> val;
    double unit_scale = 1.0;

    static Dataset from_manifest(const Manifest& m);
};

struct EpochRecord {
    int64_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_rmse = 0.0;
};

std::string history_to_text(const std::vector<EpochRecord>& history);

struct TrainResult {
    Network<float> net;
    std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Seeded patch sampling; per batch: degrade -> normalize -> forward ->
// loss -> backward -> adam. Deterministic for a fixed (seed, config, data).
// on_epoch, when set, observes each appended history record.
TrainResult train_loop(const Dataset& data, const TrainConfig& tcfg, const NetworkConfig& ncfg,
                       const EpochCallback& on_epoch = {});

// ---------------------------------------------------------------------------
// Evaluation

struct EvalRow {
    std::string id;
    double rmse = 0.0;
    bool ok = false;
    std::string note;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    double mean_rmse = 0.0;  // unweighted over evaluated rows
    int64_t evaluated = 0;
    std::string unit_note;

    std::string to_text() const;
};

// net == nullptr evaluates the bicubic baseline. Images are center-cropped
// to multiples of the scale before degradation.
EvalReport evaluate_samples(const Network<float>* net, const std::vector<Sample>& samples,
                            int64_t scale, DegradeMethod method = DegradeMethod::bicubic);

// Loads entries lazily so unreadable samples become skip rows.
EvalReport evaluate_manifest(const Network<float>* net, const Manifest& manifest, int64_t scale,
                             const std::string& split_filter,
                             DegradeMethod method = DegradeMethod::bicubic);

// ---------------------------------------------------------------------------
// Ablation matrix

struct AblationRow {
    std::string label;
    AblationFlags flags;
    double val_rmse = 0.0;
};

struct AblationReport {
    uint64_t seed = 0;
    int64_t epochs = 0;
    std::vector<AblationRow> rows;

    std::string to_text() const;
};

// Trains and evaluates the five switch combinations (baseline, +guidance,
// +guidance+RDCB, +guidance+Mamba, full) under one seed and budget.
AblationReport ablation_run(const Dataset& data, const TrainConfig& tcfg,
                            const NetworkConfig& base_cfg,
                            const std::function<void(const std::string&, const EpochRecord&)>&
                                on_epoch = {});

}  // namespace msfum
