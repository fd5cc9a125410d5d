#pragma once

// Contrastive losses over the overlap-aligned representations of two views:
// temporal (negatives across time), instance-wise (negatives across the
// batch), their sum, and the hierarchical version that max-pools the time
// axis until length 1. Similarity is the raw dot product, no temperature.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ts2rep/common.hpp"
#include "ts2rep/tensor.hpp"

namespace ts2rep::losses {

/// Overlap-aligned representations from the two views, both [B x L x K];
/// position j addresses the same original timestamp in both.
template <typename S>
struct ReprPair {
    tensor::TensorPtr<S> view1;
    tensor::TensorPtr<S> view2;
};

struct LossOptions {
    bool symmetric = true;  // average the written form with the views swapped
    bool temporal = true;
    bool instance = true;
};

namespace detail {

template <typename S>
void check_pair(const ReprPair<S>& pair) {
    if (pair.view1->shape.size() != 3 || pair.view2->shape.size() != 3)
        throw DimensionError("loss: representations must be [BxLxK]");
    if (pair.view1->shape != pair.view2->shape)
        throw DimensionError("loss: views differ in shape, " + tensor::shape_str(pair.view1->shape) + " vs " +
                             tensor::shape_str(pair.view2->shape));
    if (pair.view1->shape[1] < 1) throw ArgumentError("loss: empty overlap");
}

template <typename S>
S dot(const S* a, const S* b, int64_t k) {
    S acc = 0;
    for (int64_t i = 0; i < k; ++i) acc += a[i] * b[i];
    return acc;
}

// Mean over (i, t) of the temporal term with `anchor` in the numerator-left
// role. If g_anchor is non-null, accumulates coeff-scaled gradients.
template <typename S>
double temporal_term(const tensor::Tensor<S>* anchor, const tensor::Tensor<S>* other, double coeff, std::vector<S>* g_anchor,
                     std::vector<S>* g_other) {
    const int64_t B = anchor->shape[0], L = anchor->shape[1], K = anchor->shape[2];
    double total = 0.0;
    std::vector<S> cross(static_cast<size_t>(L)), self(static_cast<size_t>(L));
    for (int64_t i = 0; i < B; ++i) {
        const S* a_base = anchor->data.data() + i * L * K;
        const S* o_base = other->data.data() + i * L * K;
        for (int64_t t = 0; t < L; ++t) {
            const S* at = a_base + t * K;
            S m = dot(at, o_base, K);  // seed max with the t'=0 cross term
            for (int64_t tp = 0; tp < L; ++tp) {
                cross[tp] = dot(at, o_base + tp * K, K);
                if (cross[tp] > m) m = cross[tp];
                if (tp != t) {
                    self[tp] = dot(at, a_base + tp * K, K);
                    if (self[tp] > m) m = self[tp];
                }
            }
            double sumexp = 0.0;
            for (int64_t tp = 0; tp < L; ++tp) {
                sumexp += std::exp(static_cast<double>(cross[tp] - m));
                if (tp != t) sumexp += std::exp(static_cast<double>(self[tp] - m));
            }
            total += -static_cast<double>(cross[t]) + static_cast<double>(m) + std::log(sumexp);

            if (g_anchor) {
                const double inv = 1.0 / sumexp;
                S* ga_t = g_anchor->data() + (i * L + t) * K;
                for (int64_t tp = 0; tp < L; ++tp) {
                    const double pc = std::exp(static_cast<double>(cross[tp] - m)) * inv;
                    const double cc = coeff * (pc - (tp == t ? 1.0 : 0.0));
                    const S* o_tp = o_base + tp * K;
                    S* go_tp = g_other->data() + (i * L + tp) * K;
                    for (int64_t k = 0; k < K; ++k) {
                        ga_t[k] += static_cast<S>(cc * o_tp[k]);
                        go_tp[k] += static_cast<S>(cc * at[k]);
                    }
                    if (tp != t) {
                        const double pw = std::exp(static_cast<double>(self[tp] - m)) * inv;
                        const double cw = coeff * pw;
                        const S* a_tp = a_base + tp * K;
                        S* ga_tp = g_anchor->data() + (i * L + tp) * K;
                        for (int64_t k = 0; k < K; ++k) {
                            ga_t[k] += static_cast<S>(cw * a_tp[k]);
                            ga_tp[k] += static_cast<S>(cw * at[k]);
                        }
                    }
                }
            }
        }
    }
    return total / static_cast<double>(B * L);
}

// Mean over (i, t) of the instance-wise term with `anchor` in the anchor role.
template <typename S>
double instance_term(const tensor::Tensor<S>* anchor, const tensor::Tensor<S>* other, double coeff, std::vector<S>* g_anchor,
                     std::vector<S>* g_other) {
    const int64_t B = anchor->shape[0], L = anchor->shape[1], K = anchor->shape[2];
    double total = 0.0;
    std::vector<S> cross(static_cast<size_t>(B)), self(static_cast<size_t>(B));
    for (int64_t t = 0; t < L; ++t) {
        for (int64_t i = 0; i < B; ++i) {
            const S* a_it = anchor->data.data() + (i * L + t) * K;
            S m = dot(a_it, other->data.data() + t * K, K);
            for (int64_t j = 0; j < B; ++j) {
                cross[j] = dot(a_it, other->data.data() + (j * L + t) * K, K);
                if (cross[j] > m) m = cross[j];
                if (j != i) {
                    self[j] = dot(a_it, anchor->data.data() + (j * L + t) * K, K);
                    if (self[j] > m) m = self[j];
                }
            }
            double sumexp = 0.0;
            for (int64_t j = 0; j < B; ++j) {
                sumexp += std::exp(static_cast<double>(cross[j] - m));
                if (j != i) sumexp += std::exp(static_cast<double>(self[j] - m));
            }
            total += -static_cast<double>(cross[i]) + static_cast<double>(m) + std::log(sumexp);

            if (g_anchor) {
                const double inv = 1.0 / sumexp;
                S* ga_it = g_anchor->data() + (i * L + t) * K;
                for (int64_t j = 0; j < B; ++j) {
                    const double pc = std::exp(static_cast<double>(cross[j] - m)) * inv;
                    const double cc = coeff * (pc - (j == i ? 1.0 : 0.0));
                    const S* o_jt = other->data.data() + (j * L + t) * K;
                    S* go_jt = g_other->data() + (j * L + t) * K;
                    for (int64_t k = 0; k < K; ++k) {
                        ga_it[k] += static_cast<S>(cc * o_jt[k]);
                        go_jt[k] += static_cast<S>(cc * a_it[k]);
                    }
                    if (j != i) {
                        const double pw = std::exp(static_cast<double>(self[j] - m)) * inv;
                        const double cw = coeff * pw;
                        const S* a_jt = anchor->data.data() + (j * L + t) * K;
                        S* ga_jt = g_anchor->data() + (j * L + t) * K;
                        for (int64_t k = 0; k < K; ++k) {
                            ga_it[k] += static_cast<S>(cw * a_jt[k]);
                            ga_jt[k] += static_cast<S>(cw * a_it[k]);
                        }
                    }
                }
            }
        }
    }
    return total / static_cast<double>(B * L);
}

using TermFn = double (*)(const void*, const void*, double, void*, void*);

// Build the fused scalar node for one loss term family.
template <typename S, typename Fn>
tensor::TensorPtr<S> fused_loss(const ReprPair<S>& pair, bool symmetric, Fn term) {
    check_pair(pair);
    auto out = tensor::detail::make_result<S>({1}, {pair.view1, pair.view2});
    const tensor::Tensor<S>* r1 = pair.view1.get();
    const tensor::Tensor<S>* r2 = pair.view2.get();
    double value = term(r1, r2, 0.0, static_cast<std::vector<S>*>(nullptr), nullptr);
    if (symmetric) value = 0.5 * (value + term(r2, r1, 0.0, nullptr, nullptr));
    out->data[0] = static_cast<S>(value);
    if (!out->parents.empty()) {
        out->backprop = [r1, r2, symmetric, term](const std::vector<S>& go,
                                                  const std::vector<std::vector<S>*>& pg) {
            const int64_t B = r1->shape[0], L = r1->shape[1];
            const double base = static_cast<double>(go[0]) / static_cast<double>(B * L);
            const double coeff = symmetric ? 0.5 * base : base;
            term(r1, r2, coeff, pg[0], pg[1]);
            if (symmetric) term(r2, r1, coeff, pg[1], pg[0]);
        };
    }
    return out;
}

}  // namespace detail

/// Positives: same timestamp across the two views. Negatives: other
/// timestamps of the same series, drawn from both views.
template <typename S>
tensor::TensorPtr<S> temporal_loss(const ReprPair<S>& pair, bool symmetric = true) {
    return detail::fused_loss<S>(pair, symmetric, &detail::temporal_term<S>);
}

/// Positives: same timestamp, same series. Negatives: other series of the
/// batch at the same timestamp, drawn from both views. Exactly zero at B = 1.
template <typename S>
tensor::TensorPtr<S> instance_loss(const ReprPair<S>& pair, bool symmetric = true) {
    return detail::fused_loss<S>(pair, symmetric, &detail::instance_term<S>);
}

/// Sum of the temporal and instance-wise terms; both are (i, t)-means, so
/// this matches the 1/(NT) normalization of the combined objective.
template <typename S>
tensor::TensorPtr<S> dual_loss(const ReprPair<S>& pair, const LossOptions& opts = {}) {
    if (!opts.temporal && !opts.instance) throw ArgumentError("dual_loss: both terms disabled");
    if (!opts.instance) return temporal_loss(pair, opts.symmetric);
    if (!opts.temporal) return instance_loss(pair, opts.symmetric);
    return tensor::add(temporal_loss(pair, opts.symmetric), instance_loss(pair, opts.symmetric));
}

template <typename S>
struct HierLoss {
    tensor::TensorPtr<S> loss;
    int64_t levels = 0;
};

/// Accumulate the dual loss while max-pooling both views along time (kernel
/// 2, ceil semantics) until length 1, then divide by the level count.
/// Terminates in ceil(log2 L) + 1 levels. With hierarchical disabled, only
/// the finest level is used.
template <typename S>
HierLoss<S> hierarchical_loss(const ReprPair<S>& pair, const LossOptions& opts = {}, bool hierarchical = true) {
    detail::check_pair(pair);
    auto total = dual_loss(pair, opts);
    int64_t levels = 1;
    // Pool along the last axis, so keep [B x K x L] between levels.
    auto cur1 = tensor::transpose_last2(pair.view1);
    auto cur2 = tensor::transpose_last2(pair.view2);
    auto level_pair = [&]() {
        return ReprPair<S>{tensor::transpose_last2(cur1), tensor::transpose_last2(cur2)};
    };
    while (hierarchical && cur1->shape.back() > 1) {
        cur1 = tensor::maxpool1d_time(cur1);
        cur2 = tensor::maxpool1d_time(cur2);
        total = tensor::add(total, dual_loss(level_pair(), opts));
        ++levels;
    }
    return {tensor::scale(total, static_cast<S>(1.0 / static_cast<double>(levels))), levels};
}

}  // namespace ts2rep::losses
