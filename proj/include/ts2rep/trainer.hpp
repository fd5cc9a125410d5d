#pragma once

// Optimization loop: batching, view generation, dual-view encoding,
// hierarchical loss, adaptive-moment updates, checkpointing.

#include <cstdint>
#include <string>
#include <vector>

#include "ts2rep/augment.hpp"
#include "ts2rep/encoder.hpp"
#include "ts2rep/losses.hpp"

namespace ts2rep::train {

/// Toggles for each removable component, used by the ablation and collapse
/// harnesses. Defaults run the full method.
struct AblationFlags {
    bool cropping = true;
    bool masking = true;
    bool temporal = true;
    bool instance = true;
    bool hierarchical = true;
};

struct TrainConfig {
    int64_t batch_size = 8;
    double learning_rate = 0.001;
    int64_t iters = -1;  // -1 resolves to 200 below 100,000 points, 600 otherwise
    int64_t max_train_length = 3000;
    uint64_t seed = 42;
    AblationFlags ablation;
};

/// A series stripped of any label; training can only ever see these.
struct UnlabeledSeries {
    int64_t T = 0, F = 0;
    std::vector<double> values;  // row-major T x F, NaN = missing
};

int64_t resolve_iters(const TrainConfig& config, int64_t total_points);

/// Crop oversized series into max_len pieces; concatenating the pieces of one
/// series reconstructs it. Short series pass through untouched.
std::vector<UnlabeledSeries> slice_long_series(const std::vector<UnlabeledSeries>& data, int64_t max_len);

/// Adam-style adaptive moments (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamOptimizer {
public:
    void step(encoder::EncoderParams<float>& params, double lr);
    int64_t steps_taken() const { return t_; }

private:
    std::vector<std::vector<float>> m_, v_;
    int64_t t_ = 0;
};

struct TrainState {
    encoder::EncoderParams<float> params;
    AdamOptimizer optimizer;
    int64_t iteration = 0;
    std::vector<double> loss_history;
};

struct StepResult {
    double loss = 0.0;
    int64_t levels = 0;
};

/// One optimizer update: sample a crop pair, encode both masked views, take
/// the hierarchical loss on the overlap, backpropagate, apply Adam.
StepResult train_step(TrainState& state, const encoder::Batch& batch, Rng& rng, const TrainConfig& config,
                      const std::vector<int64_t>* batch_ids = nullptr);

struct FitResult {
    encoder::EncoderParams<float> params;
    std::vector<double> loss_history;
    int64_t iters_run = 0;
};

/// Run `iters` updates over reshuffled batches (final partial batch kept).
/// Writes a JSON-lines training log {iter, loss, wall_ms} when log_path is
/// nonempty. Deterministic for a fixed config.
FitResult fit(const std::vector<UnlabeledSeries>& data, const encoder::EncoderConfig& enc_config,
              const TrainConfig& config, const std::string& log_path = "");

}  // namespace ts2rep::train
