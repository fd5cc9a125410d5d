#include "ts2rep/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ts2rep::train {

int64_t resolve_iters(const TrainConfig& config, int64_t total_points) {
    if (config.iters >= 0) return config.iters;
    return total_points < 100000 ? 200 : 600;
}

std::vector<UnlabeledSeries> slice_long_series(const std::vector<UnlabeledSeries>& data, int64_t max_len) {
    if (max_len < 2) throw ArgumentError("slice_long_series: max_len must be >= 2");
    std::vector<UnlabeledSeries> out;
    for (const auto& s : data) {
        if (s.T <= max_len) {
            out.push_back(s);
            continue;
        }
        for (int64_t start = 0; start < s.T; start += max_len) {
            const int64_t len = std::min(max_len, s.T - start);
            UnlabeledSeries piece{len, s.F, {}};
            piece.values.assign(s.values.begin() + start * s.F, s.values.begin() + (start + len) * s.F);
            out.push_back(std::move(piece));
        }
    }
    return out;
}

void AdamOptimizer::step(encoder::EncoderParams<float>& params, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (m_.empty()) {
        m_.resize(params.named.size());
        v_.resize(params.named.size());
        for (size_t i = 0; i < params.named.size(); ++i) {
            m_[i].assign(params.named[i].second->data.size(), 0.0f);
            v_[i].assign(params.named[i].second->data.size(), 0.0f);
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (size_t i = 0; i < params.named.size(); ++i) {
        auto& p = *params.named[i].second;
        for (size_t j = 0; j < p.data.size(); ++j) {
            const double g = p.grad[j];
            m_[i][j] = static_cast<float>(beta1 * m_[i][j] + (1.0 - beta1) * g);
            v_[i][j] = static_cast<float>(beta2 * v_[i][j] + (1.0 - beta2) * g * g);
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p.data[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps));
        }
    }
}

StepResult train_step(TrainState& state, const encoder::Batch& batch, Rng& rng, const TrainConfig& config,
                      const std::vector<int64_t>* batch_ids) {
    if (batch.B < 1 || batch.T < 1) throw ArgumentError("train_step: empty batch");

    const augment::CropPair pair = config.ablation.cropping ? augment::sample_crop_pair(batch.T, rng)
                                                            : augment::CropPair{0, batch.T, 0, batch.T};
    auto views = augment::make_views(batch, pair, rng, config.ablation.masking);

    auto r1 = encoder::encode(state.params, views.view1.batch, views.view1.plan);
    auto r2 = encoder::encode(state.params, views.view2.batch, views.view2.plan);
    losses::ReprPair<float> overlap{
        tensor::slice_time(r1, views.view1.overlap_begin, views.view1.overlap_end),
        tensor::slice_time(r2, views.view2.overlap_begin, views.view2.overlap_end)};

    losses::LossOptions opts;
    opts.temporal = config.ablation.temporal;
    opts.instance = config.ablation.instance;
    auto hier = losses::hierarchical_loss(overlap, opts, config.ablation.hierarchical);
    const double loss = hier.loss->data[0];
    if (!std::isfinite(loss)) {
        std::ostringstream os;
        os << "non-finite loss at iteration " << state.iteration;
        if (batch_ids) {
            os << " (batch ids:";
            for (int64_t id : *batch_ids) os << " " << id;
            os << ")";
        }
        throw NumericError(os.str());
    }

    for (auto& [name, t] : state.params.named) t->zero_grad();
    tensor::backward(hier.loss);
    state.optimizer.step(state.params, config.learning_rate);
    ++state.iteration;
    state.loss_history.push_back(loss);
    return {loss, hier.levels};
}

namespace {

encoder::Batch assemble_batch(const std::vector<UnlabeledSeries>& data, const std::vector<int64_t>& ids) {
    int64_t T = 0;
    const int64_t F = data[static_cast<size_t>(ids[0])].F;
    for (int64_t id : ids) {
        const auto& s = data[static_cast<size_t>(id)];
        if (s.F != F) throw DimensionError("fit: series disagree on feature count");
        T = std::max(T, s.T);
    }
    encoder::Batch batch{static_cast<int64_t>(ids.size()), T, F, {}};
    batch.values.assign(static_cast<size_t>(batch.B * T * F), std::nan(""));
    for (size_t b = 0; b < ids.size(); ++b) {
        const auto& s = data[static_cast<size_t>(ids[b])];
        std::copy(s.values.begin(), s.values.end(), batch.values.begin() + static_cast<int64_t>(b) * T * F);
    }
    return batch;
}

}  // namespace

FitResult fit(const std::vector<UnlabeledSeries>& data, const encoder::EncoderConfig& enc_config,
              const TrainConfig& config, const std::string& log_path) {
    if (data.empty()) throw ArgumentError("fit: empty dataset");
    for (const auto& s : data)
        if (s.T < 1 || s.F != enc_config.input_dims)
            throw DimensionError("fit: series shape does not match encoder input_dims " +
                                 std::to_string(enc_config.input_dims));

    const auto pieces = slice_long_series(data, config.max_train_length);
    int64_t total_points = 0;
    for (const auto& s : pieces) total_points += s.T * s.F;
    const int64_t iters = resolve_iters(config, total_points);

    TrainState state;
    state.params = encoder::init_params<float>(enc_config, config.seed);

    std::ofstream log;
    if (!log_path.empty()) {
        log.open(log_path, std::ios::trunc);
        if (!log) throw DataError("fit: cannot open training log '" + log_path + "'");
    }

    std::vector<int64_t> order(pieces.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();  // forces a shuffle before the first batch
    uint64_t epoch = 0;

    for (int64_t it = 0; it < iters; ++it) {
        std::vector<int64_t> ids;
        ids.reserve(static_cast<size_t>(config.batch_size));
        while (static_cast<int64_t>(ids.size()) < config.batch_size) {
            if (cursor == order.size()) {
                if (!ids.empty()) break;  // keep the final partial batch
                Rng shuffle_rng(config.seed, 0x9000 + epoch);
                for (size_t i = order.size(); i > 1; --i)
                    std::swap(order[i - 1], order[static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1))]);
                cursor = 0;
                ++epoch;
            }
            ids.push_back(order[cursor++]);
        }

        const auto batch = assemble_batch(pieces, ids);
        Rng step_rng(config.seed, static_cast<uint64_t>(it) + 1);
        const auto t0 = std::chrono::steady_clock::now();
        const auto result = train_step(state, batch, step_rng, config, &ids);
        const auto wall_ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
        if (log)
            log << "{\"iter\":" << it << ",\"loss\":" << result.loss << ",\"wall_ms\":" << wall_ms << "}\n";
    }

    state.params.set_requires_grad(false);
    return {std::move(state.params), std::move(state.loss_history), iters};
}

}  // namespace ts2rep::train
