#pragma once

// Per-timestamp representation encoder: input projection -> timestamp masking
// -> stack of dilated residual blocks -> output block. Output keeps the input
// time length.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ts2rep/common.hpp"
#include "ts2rep/tensor.hpp"

namespace ts2rep::encoder {

struct EncoderConfig {
    int64_t input_dims = 1;     // F, observed features per timestamp
    int64_t hidden_dims = 64;   // latent width after projection
    int64_t output_dims = 320;  // K, representation width
    int64_t depth = 10;         // hidden residual blocks; one output block follows
    static constexpr int64_t kernel_size = 3;

    void validate() const {
        if (input_dims < 1 || hidden_dims < 1 || output_dims < 1 || depth < 1)
            throw ArgumentError("encoder config: all dimensions must be >= 1");
    }
};

/// Block l (including the output block at index depth) dilates by 2^l; each
/// block applies two width-3 convolutions, so its reach grows by 2 * 2^l on
/// each side.
inline int64_t receptive_field_radius(int64_t depth) {
    int64_t r = 0;
    for (int64_t l = 0; l <= depth; ++l) r += 2 * (int64_t{1} << l);
    return r;
}

/// All learnable weights, addressable by a stable string name. Canonical
/// order: proj.W, proj.b, then per block conv1.k, conv1.b, conv2.k, conv2.b
/// and skip.W where channel counts differ.
template <typename S>
struct EncoderParams {
    EncoderConfig config;
    std::vector<std::pair<std::string, tensor::TensorPtr<S>>> named;

    tensor::TensorPtr<S> find(const std::string& name) const {
        for (const auto& [n, t] : named)
            if (n == name) return t;
        throw ArgumentError("no parameter named '" + name + "'");
    }

    std::vector<tensor::TensorPtr<S>> tensors() const {
        std::vector<tensor::TensorPtr<S>> out;
        out.reserve(named.size());
        for (const auto& [n, t] : named) out.push_back(t);
        return out;
    }

    void set_requires_grad(bool on) {
        for (auto& [n, t] : named) {
            t->requires_grad = on;
            t->grad.assign(on ? t->data.size() : 0, S(0));
        }
    }
};

/// Binary keep-mask over timestamps, one row per batch element. keep = 1
/// leaves the latent vector unchanged, keep = 0 zeroes it.
struct MaskPlan {
    enum class Mode { bernoulli_half, all_ones, all_zeros, mask_last, custom };
    Mode mode = Mode::all_ones;
    int64_t batch = 0;
    int64_t len = 0;
    std::vector<uint8_t> keep;  // batch * len entries

    static MaskPlan all_ones(int64_t B, int64_t T) {
        return {Mode::all_ones, B, T, std::vector<uint8_t>(static_cast<size_t>(B * T), 1)};
    }
    static MaskPlan all_zeros(int64_t B, int64_t T) {
        return {Mode::all_zeros, B, T, std::vector<uint8_t>(static_cast<size_t>(B * T), 0)};
    }
    static MaskPlan mask_last(int64_t B, int64_t T) {
        MaskPlan p{Mode::mask_last, B, T, std::vector<uint8_t>(static_cast<size_t>(B * T), 1)};
        for (int64_t b = 0; b < B; ++b) p.keep[static_cast<size_t>(b * T + T - 1)] = 0;
        return p;
    }
    /// Each element kept independently with p = 0.5; resample per forward pass.
    static MaskPlan bernoulli_half(int64_t B, int64_t T, Rng& rng) {
        MaskPlan p{Mode::bernoulli_half, B, T, std::vector<uint8_t>(static_cast<size_t>(B * T), 0)};
        for (auto& v : p.keep) v = rng.bernoulli(0.5) ? 1 : 0;
        return p;
    }
    static MaskPlan custom(int64_t B, int64_t T, std::vector<uint8_t> keep) {
        if (static_cast<int64_t>(keep.size()) != B * T)
            throw DimensionError("custom mask: size mismatch");
        return {Mode::custom, B, T, std::move(keep)};
    }
};

/// One batch of raw series values, row-major [B x T x F]; NaN marks missing.
struct Batch {
    int64_t B = 0, T = 0, F = 0;
    std::vector<double> values;

    double at(int64_t b, int64_t t, int64_t f) const { return values[(b * T + t) * F + f]; }
};

template <typename S>
EncoderParams<S> init_params(const EncoderConfig& config, uint64_t seed, bool requires_grad = true) {
    config.validate();
    EncoderParams<S> params;
    params.config = config;
    Rng rng(seed);

    auto uniform_tensor = [&](tensor::Shape shape, int64_t fan_in) {
        auto t = tensor::make_tensor<S>(std::move(shape), requires_grad);
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& v : t->data) v = static_cast<S>(rng.uniform(-bound, bound));
        return t;
    };
    auto const_tensor = [&](tensor::Shape shape, double value) {
        auto t = tensor::make_tensor<S>(std::move(shape), requires_grad);
        for (auto& v : t->data) v = static_cast<S>(value);
        return t;
    };

    const int64_t F = config.input_dims, H = config.hidden_dims, K = config.output_dims;
    params.named.emplace_back("proj.W", uniform_tensor({H, F}, F));
    // Small nonzero constant keeps projected latents away from the zero mask
    // vector from step 0 on.
    params.named.emplace_back("proj.b", const_tensor({H}, 0.01));

    for (int64_t l = 0; l <= config.depth; ++l) {
        const bool final_block = l == config.depth;
        const int64_t ci = H;
        const int64_t co = final_block ? K : H;
        const std::string prefix = "block" + std::to_string(l) + ".";
        params.named.emplace_back(prefix + "conv1.k", uniform_tensor({co, ci, 3}, ci * 3));
        params.named.emplace_back(prefix + "conv1.b", const_tensor({co}, 0.0));
        params.named.emplace_back(prefix + "conv2.k", uniform_tensor({co, co, 3}, co * 3));
        params.named.emplace_back(prefix + "conv2.b", const_tensor({co}, 0.0));
        if (ci != co) params.named.emplace_back(prefix + "skip.W", uniform_tensor({co, ci}, ci));
    }
    return params;
}

/// Per-timestamp affine map into the latent space. NaN observations are
/// zero-substituted and their timestamps forced into the mask plan, so the
/// network sees them exactly as masked positions.
template <typename S>
tensor::TensorPtr<S> project_input(const EncoderParams<S>& params, const Batch& batch, MaskPlan& plan) {
    const EncoderConfig& cfg = params.config;
    if (batch.F != cfg.input_dims)
        throw DimensionError("input feature count " + std::to_string(batch.F) + " does not match encoder input_dims " +
                             std::to_string(cfg.input_dims));
    if (plan.batch != batch.B || plan.len != batch.T)
        throw DimensionError("mask plan " + std::to_string(plan.batch) + "x" + std::to_string(plan.len) +
                             " does not match batch " + std::to_string(batch.B) + "x" + std::to_string(batch.T));

    auto x = tensor::make_tensor<S>({batch.B * batch.T, batch.F});
    for (int64_t r = 0; r < batch.B * batch.T; ++r) {
        bool missing = false;
        for (int64_t f = 0; f < batch.F; ++f) {
            const double v = batch.values[r * batch.F + f];
            if (std::isnan(v)) {
                missing = true;
                x->data[r * batch.F + f] = S(0);
            } else {
                x->data[r * batch.F + f] = static_cast<S>(v);
            }
        }
        if (missing) plan.keep[static_cast<size_t>(r)] = 0;
    }
    auto latent = tensor::affine(x, params.find("proj.W"), params.find("proj.b"));
    return tensor::reshape(latent, {batch.B, batch.T, cfg.hidden_dims});
}

/// Zero the latent vectors of masked timestamps.
template <typename S>
tensor::TensorPtr<S> apply_mask(const tensor::TensorPtr<S>& latent, const MaskPlan& plan) {
    if (latent->shape.size() != 3 || latent->shape[0] != plan.batch || latent->shape[1] != plan.len)
        throw DimensionError("apply_mask: latent " + tensor::shape_str(latent->shape) + " vs plan " +
                             std::to_string(plan.batch) + "x" + std::to_string(plan.len));
    return tensor::mask_time(latent, plan.keep);
}

namespace detail {

template <typename S>
tensor::TensorPtr<S> residual_block(const EncoderParams<S>& params, const tensor::TensorPtr<S>& h, int64_t l) {
    const std::string prefix = "block" + std::to_string(l) + ".";
    const int64_t dilation = int64_t{1} << l;
    const int64_t ci = h->shape[1];
    const auto k1 = params.find(prefix + "conv1.k");
    const int64_t co = k1->shape[0];

    tensor::TensorPtr<S> skip = h;
    if (ci != co) skip = tensor::channel_map(h, params.find(prefix + "skip.W"));

    auto y = tensor::gelu(h);
    y = tensor::bias_add_channel(tensor::conv1d_dilated(y, k1, dilation), params.find(prefix + "conv1.b"));
    y = tensor::gelu(y);
    y = tensor::bias_add_channel(tensor::conv1d_dilated(y, params.find(prefix + "conv2.k"), dilation),
                                 params.find(prefix + "conv2.b"));
    return tensor::add(y, skip);
}

}  // namespace detail

/// Full pipeline: project -> mask -> dilated residual stack -> output block.
/// Returns per-timestamp representations [B x T x K]; a pure function of
/// (params, batch, plan).
template <typename S>
tensor::TensorPtr<S> encode(const EncoderParams<S>& params, const Batch& batch, MaskPlan plan) {
    if (batch.T < 1 || batch.B < 1) throw ArgumentError("encode: empty batch");
    auto latent = project_input(params, batch, plan);
    auto masked = apply_mask(latent, plan);
    auto h = tensor::transpose_last2(masked);  // [B x H x T]
    for (int64_t l = 0; l <= params.config.depth; ++l) h = detail::residual_block(params, h, l);
    return tensor::transpose_last2(h);  // [B x T x K]
}

}  // namespace ts2rep::encoder
