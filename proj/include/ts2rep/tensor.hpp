#pragma once

// Minimal dense-array engine with reverse-mode differentiation. Supplies
// exactly the operations the encoder and the contrastive losses need; no
// broadcasting beyond that.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ts2rep/common.hpp"

namespace ts2rep::tensor {

using Shape = std::vector<int64_t>;

inline int64_t numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), int64_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

template <typename S>
struct Tensor;

template <typename S>
using TensorPtr = std::shared_ptr<Tensor<S>>;

/// A node in the computation graph. Leaf nodes hold parameters or inputs;
/// interior nodes keep shared_ptr links to their parents plus a closure that
/// routes pass-local gradients backwards. `grad` is a pure accumulator:
/// backward() adds into it and never resets it.
template <typename S>
struct Tensor {
    Shape shape;
    std::vector<S> data;
    std::vector<S> grad;  // same size as data iff requires_grad
    bool requires_grad = false;

    std::vector<TensorPtr<S>> parents;
    // backprop(self_local, parent_locals): add contributions of this node's
    // pass-local gradient into the parents' pass-local gradients.
    std::function<void(const std::vector<S>&, const std::vector<std::vector<S>*>&)> backprop;

    int64_t size() const { return static_cast<int64_t>(data.size()); }

    void zero_grad() {
        std::fill(grad.begin(), grad.end(), S(0));
    }
};

template <typename S>
TensorPtr<S> make_tensor(Shape shape, bool requires_grad = false) {
    for (int64_t d : shape) {
        if (d <= 0) throw ArgumentError("tensor extents must be positive, got " + shape_str(shape));
    }
    auto t = std::make_shared<Tensor<S>>();
    t->shape = std::move(shape);
    t->data.assign(static_cast<size_t>(numel(t->shape)), S(0));
    t->requires_grad = requires_grad;
    if (requires_grad) t->grad.assign(t->data.size(), S(0));
    return t;
}

template <typename S>
TensorPtr<S> from_values(Shape shape, std::vector<S> values, bool requires_grad = false) {
    auto t = make_tensor<S>(std::move(shape), requires_grad);
    if (values.size() != t->data.size())
        throw DimensionError("value count " + std::to_string(values.size()) + " does not match shape " +
                             shape_str(t->shape));
    t->data = std::move(values);
    return t;
}

namespace detail {

inline constexpr double kInvSqrt2 = 0.7071067811865475244;
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

template <typename S>
TensorPtr<S> make_result(Shape shape, std::vector<TensorPtr<S>> parents) {
    auto t = make_tensor<S>(std::move(shape), false);
    bool track = false;
    for (const auto& p : parents) track = track || p->requires_grad || p->backprop;
    if (track) t->parents = std::move(parents);
    return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

/// Reverse-mode sweep from a scalar root. Uses pass-local gradient buffers so
/// repeated sweeps accumulate exactly (two backward passes without zeroing
/// yield exactly twice the gradient of one).
template <typename S>
void backward(const TensorPtr<S>& root) {
    if (root->size() != 1) throw ArgumentError("backward requires a scalar root");

    // Topological order via iterative post-order DFS.
    std::vector<Tensor<S>*> order;
    std::unordered_set<Tensor<S>*> seen;
    std::vector<std::pair<Tensor<S>*, size_t>> frames;
    frames.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!frames.empty()) {
        auto& [node, idx] = frames.back();
        if (idx < node->parents.size()) {
            Tensor<S>* next = node->parents[idx].get();
            ++idx;
            if (seen.insert(next).second) frames.push_back({next, 0});
        } else {
            order.push_back(node);
            frames.pop_back();
        }
    }
    // order is post-order: parents appear before their children. Iterate from
    // the root (end) backwards.
    std::unordered_map<Tensor<S>*, std::vector<S>> local;
    local[root.get()] = {S(1)};

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor<S>* node = *it;
        auto found = local.find(node);
        if (found == local.end()) continue;  // no gradient reached this node
        if (node->backprop) {
            std::vector<std::vector<S>*> parent_locals;
            parent_locals.reserve(node->parents.size());
            for (const auto& p : node->parents) {
                auto& buf = local[p.get()];
                if (buf.empty()) buf.assign(p->data.size(), S(0));
                parent_locals.push_back(&buf);
            }
            node->backprop(found->second, parent_locals);
        }
    }
    for (auto* node : order) {
        if (!node->requires_grad) continue;
        auto found = local.find(node);
        if (found == local.end()) continue;
        if (node->grad.size() != node->data.size()) node->grad.assign(node->data.size(), S(0));
        for (size_t i = 0; i < node->grad.size(); ++i) node->grad[i] += found->second[i];
    }
}

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

/// out[n] = W · x[n] + b for each row of x. x: [N x F], W: [G x F], b: [G].
template <typename S>
TensorPtr<S> affine(const TensorPtr<S>& x, const TensorPtr<S>& W, const TensorPtr<S>& b) {
    if (x->shape.size() != 2 || W->shape.size() != 2 || b->shape.size() != 1)
        throw DimensionError("affine expects x[NxF], W[GxF], b[G]; got x" + shape_str(x->shape) + " W" +
                             shape_str(W->shape) + " b" + shape_str(b->shape));
    const int64_t N = x->shape[0], F = x->shape[1], G = W->shape[0];
    if (W->shape[1] != F || b->shape[0] != G)
        throw DimensionError("affine shape mismatch: x" + shape_str(x->shape) + " vs W" + shape_str(W->shape) +
                             ", b" + shape_str(b->shape));

    auto out = detail::make_result<S>({N, G}, {x, W, b});
    const S* xd = x->data.data();
    const S* wd = W->data.data();
    const S* bd = b->data.data();
    S* od = out->data.data();
    for (int64_t n = 0; n < N; ++n) {
        for (int64_t g = 0; g < G; ++g) {
            S acc = bd[g];
            const S* xr = xd + n * F;
            const S* wr = wd + g * F;
            for (int64_t f = 0; f < F; ++f) acc += xr[f] * wr[f];
            od[n * G + g] = acc;
        }
    }
    if (!out->parents.empty()) {
        Tensor<S>* xp = x.get();
        Tensor<S>* wp = W.get();
        out->backprop = [xp, wp, N, F, G](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            auto& gw = *pg[1];
            auto& gb = *pg[2];
            for (int64_t n = 0; n < N; ++n) {
                for (int64_t g = 0; g < G; ++g) {
                    const S go_ng = go[n * G + g];
                    if (go_ng == S(0)) continue;
                    const S* wr = wp->data.data() + g * F;
                    const S* xr = xp->data.data() + n * F;
                    for (int64_t f = 0; f < F; ++f) {
                        gx[n * F + f] += go_ng * wr[f];
                        gw[g * F + f] += go_ng * xr[f];
                    }
                    gb[g] += go_ng;
                }
            }
        };
    }
    return out;
}

namespace detail {

// Shared conv kernel loop for one batch element. Length-preserving with
// symmetric zero padding of width = dilation.
template <typename S>
void conv_forward_one(const S* x, const S* k, S* out, int64_t Ci, int64_t Co, int64_t T, int64_t d) {
    for (int64_t co = 0; co < Co; ++co) {
        S* orow = out + co * T;
        for (int64_t ci = 0; ci < Ci; ++ci) {
            const S* xrow = x + ci * T;
            const S* kk = k + (co * Ci + ci) * 3;
            // w = 0 (left tap, offset -d), w = 1 (center), w = 2 (right, +d)
            const S k0 = kk[0], k1 = kk[1], k2 = kk[2];
            for (int64_t t = 0; t < T; ++t) {
                S acc = k1 * xrow[t];
                if (t - d >= 0) acc += k0 * xrow[t - d];
                if (t + d < T) acc += k2 * xrow[t + d];
                orow[t] += acc;
            }
        }
    }
}

template <typename S>
void conv_backward_one(const S* x, const S* k, const S* go, S* gx, S* gk, int64_t Ci, int64_t Co, int64_t T,
                       int64_t d) {
    for (int64_t co = 0; co < Co; ++co) {
        const S* grow = go + co * T;
        for (int64_t ci = 0; ci < Ci; ++ci) {
            const S* xrow = x + ci * T;
            S* gxrow = gx + ci * T;
            const S* kk = k + (co * Ci + ci) * 3;
            S* gkk = gk + (co * Ci + ci) * 3;
            S gk0 = 0, gk1 = 0, gk2 = 0;
            for (int64_t t = 0; t < T; ++t) {
                const S g = grow[t];
                if (g == S(0)) continue;
                gk1 += g * xrow[t];
                gxrow[t] += kk[1] * g;
                if (t - d >= 0) {
                    gk0 += g * xrow[t - d];
                    gxrow[t - d] += kk[0] * g;
                }
                if (t + d < T) {
                    gk2 += g * xrow[t + d];
                    gxrow[t + d] += kk[2] * g;
                }
            }
            gkk[0] += gk0;
            gkk[1] += gk1;
            gkk[2] += gk2;
        }
    }
}

}  // namespace detail

/// Length-preserving dilated convolution, kernel width 3, symmetric zero
/// padding of width = dilation. x: [Ci x T] or [B x Ci x T], k: [Co x Ci x 3].
template <typename S>
TensorPtr<S> conv1d_dilated(const TensorPtr<S>& x, const TensorPtr<S>& k, int64_t dilation) {
    if (dilation < 1) throw ArgumentError("conv1d_dilated: dilation must be >= 1, got " + std::to_string(dilation));
    if (k->shape.size() != 3 || k->shape[2] != 3)
        throw DimensionError("conv1d_dilated: kernel must be [CoxCix3], got " + shape_str(k->shape));
    const bool batched = x->shape.size() == 3;
    if (!batched && x->shape.size() != 2)
        throw DimensionError("conv1d_dilated: input must be [CixT] or [BxCixT], got " + shape_str(x->shape));
    const int64_t B = batched ? x->shape[0] : 1;
    const int64_t Ci = batched ? x->shape[1] : x->shape[0];
    const int64_t T = batched ? x->shape[2] : x->shape[1];
    const int64_t Co = k->shape[0];
    if (k->shape[1] != Ci)
        throw DimensionError("conv1d_dilated: input channels " + shape_str(x->shape) + " vs kernel " +
                             shape_str(k->shape));
    if (T < 1) throw ArgumentError("conv1d_dilated: empty time axis");

    Shape out_shape = batched ? Shape{B, Co, T} : Shape{Co, T};
    auto out = detail::make_result<S>(out_shape, {x, k});
    const S* xd = x->data.data();
    const S* kd = k->data.data();
    S* od = out->data.data();
    parallel_for(B, [&](int64_t b) {
        detail::conv_forward_one(xd + b * Ci * T, kd, od + b * Co * T, Ci, Co, T, dilation);
    });
    if (!out->parents.empty()) {
        Tensor<S>* xp = x.get();
        Tensor<S>* kp = k.get();
        out->backprop = [xp, kp, B, Ci, Co, T, dilation](const std::vector<S>& go,
                                                         const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            auto& gk = *pg[1];
            for (int64_t b = 0; b < B; ++b) {
                detail::conv_backward_one(xp->data.data() + b * Ci * T, kp->data.data(), go.data() + b * Co * T,
                                          gx.data() + b * Ci * T, gk.data(), Ci, Co, T, dilation);
            }
        };
    }
    return out;
}

/// Per-channel bias over the time axis. x: [... C x T], b: [C].
template <typename S>
TensorPtr<S> bias_add_channel(const TensorPtr<S>& x, const TensorPtr<S>& b) {
    const bool batched = x->shape.size() == 3;
    if (!batched && x->shape.size() != 2)
        throw DimensionError("bias_add_channel: input must be [CxT] or [BxCxT], got " + shape_str(x->shape));
    const int64_t B = batched ? x->shape[0] : 1;
    const int64_t C = batched ? x->shape[1] : x->shape[0];
    const int64_t T = batched ? x->shape[2] : x->shape[1];
    if (b->shape.size() != 1 || b->shape[0] != C)
        throw DimensionError("bias_add_channel: bias " + shape_str(b->shape) + " vs channels " +
                             std::to_string(C));
    auto out = detail::make_result<S>(x->shape, {x, b});
    for (int64_t bi = 0; bi < B; ++bi)
        for (int64_t c = 0; c < C; ++c) {
            const S bv = b->data[c];
            const S* xr = x->data.data() + (bi * C + c) * T;
            S* orow = out->data.data() + (bi * C + c) * T;
            for (int64_t t = 0; t < T; ++t) orow[t] = xr[t] + bv;
        }
    if (!out->parents.empty()) {
        out->backprop = [B, C, T](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            auto& gb = *pg[1];
            for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
            for (int64_t bi = 0; bi < B; ++bi)
                for (int64_t c = 0; c < C; ++c) {
                    S acc = 0;
                    const S* grow = go.data() + (bi * C + c) * T;
                    for (int64_t t = 0; t < T; ++t) acc += grow[t];
                    gb[c] += acc;
                }
        };
    }
    return out;
}

/// 1x1 channel projection along the time axis (used for skip paths whose
/// channel counts differ). x: [... Ci x T], W: [Co x Ci].
template <typename S>
TensorPtr<S> channel_map(const TensorPtr<S>& x, const TensorPtr<S>& W) {
    const bool batched = x->shape.size() == 3;
    if (!batched && x->shape.size() != 2)
        throw DimensionError("channel_map: input must be [CixT] or [BxCixT], got " + shape_str(x->shape));
    const int64_t B = batched ? x->shape[0] : 1;
    const int64_t Ci = batched ? x->shape[1] : x->shape[0];
    const int64_t T = batched ? x->shape[2] : x->shape[1];
    if (W->shape.size() != 2 || W->shape[1] != Ci)
        throw DimensionError("channel_map: W " + shape_str(W->shape) + " vs input channels " + std::to_string(Ci));
    const int64_t Co = W->shape[0];
    Shape out_shape = batched ? Shape{B, Co, T} : Shape{Co, T};
    auto out = detail::make_result<S>(out_shape, {x, W});
    for (int64_t b = 0; b < B; ++b)
        for (int64_t co = 0; co < Co; ++co) {
            S* orow = out->data.data() + (b * Co + co) * T;
            for (int64_t ci = 0; ci < Ci; ++ci) {
                const S w = W->data[co * Ci + ci];
                if (w == S(0)) continue;
                const S* xr = x->data.data() + (b * Ci + ci) * T;
                for (int64_t t = 0; t < T; ++t) orow[t] += w * xr[t];
            }
        }
    if (!out->parents.empty()) {
        Tensor<S>* xp = x.get();
        Tensor<S>* wp = W.get();
        out->backprop = [xp, wp, B, Ci, Co, T](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            auto& gw = *pg[1];
            for (int64_t b = 0; b < B; ++b)
                for (int64_t co = 0; co < Co; ++co) {
                    const S* grow = go.data() + (b * Co + co) * T;
                    for (int64_t ci = 0; ci < Ci; ++ci) {
                        const S w = wp->data[co * Ci + ci];
                        const S* xr = xp->data.data() + (b * Ci + ci) * T;
                        S* gxr = gx.data() + (b * Ci + ci) * T;
                        S gacc = 0;
                        for (int64_t t = 0; t < T; ++t) {
                            gxr[t] += w * grow[t];
                            gacc += grow[t] * xr[t];
                        }
                        gw[co * Ci + ci] += gacc;
                    }
                }
        };
    }
    return out;
}

/// Elementwise GELU using the exact erf form 0.5 * x * (1 + erf(x / sqrt(2))).
template <typename S>
TensorPtr<S> gelu(const TensorPtr<S>& x) {
    auto out = detail::make_result<S>(x->shape, {x});
    for (size_t i = 0; i < x->data.size(); ++i) {
        const double v = static_cast<double>(x->data[i]);
        out->data[i] = static_cast<S>(0.5 * v * (1.0 + std::erf(v * detail::kInvSqrt2)));
    }
    if (!out->parents.empty()) {
        Tensor<S>* xp = x.get();
        out->backprop = [xp](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            for (size_t i = 0; i < go.size(); ++i) {
                const double v = static_cast<double>(xp->data[i]);
                const double cdf = 0.5 * (1.0 + std::erf(v * detail::kInvSqrt2));
                const double pdf = detail::kInvSqrt2Pi * std::exp(-0.5 * v * v);
                gx[i] += go[i] * static_cast<S>(cdf + v * pdf);
            }
        };
    }
    return out;
}

/// Max pooling with kernel 2 along the last (time) axis; ceil semantics, a
/// trailing odd element passes through. Gradient routes to the earliest
/// maximal index of each pair.
template <typename S>
TensorPtr<S> maxpool1d_time(const TensorPtr<S>& x) {
    if (x->shape.empty()) throw DimensionError("maxpool1d_time: scalar input");
    const int64_t T = x->shape.back();
    if (T < 1) throw ArgumentError("maxpool1d_time: empty time axis");
    const int64_t To = (T + 1) / 2;
    Shape out_shape = x->shape;
    out_shape.back() = To;
    const int64_t rows = numel(x->shape) / T;

    auto out = detail::make_result<S>(out_shape, {x});
    auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(rows * To));
    for (int64_t r = 0; r < rows; ++r) {
        const S* xr = x->data.data() + r * T;
        S* orow = out->data.data() + r * To;
        int64_t* ar = arg->data() + r * To;
        for (int64_t j = 0; j < To; ++j) {
            const int64_t t0 = 2 * j, t1 = 2 * j + 1;
            if (t1 < T && xr[t1] > xr[t0]) {
                orow[j] = xr[t1];
                ar[j] = t1;
            } else {
                orow[j] = xr[t0];
                ar[j] = t0;
            }
        }
    }
    if (!out->parents.empty()) {
        out->backprop = [arg, rows, T, To](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t j = 0; j < To; ++j) gx[r * T + (*arg)[r * To + j]] += go[r * To + j];
        };
    }
    return out;
}

/// log(sum(exp(v))) of a 1-D tensor, computed with a max shift so it is exact
/// to float precision for any magnitudes.
template <typename S>
TensorPtr<S> logsumexp(const TensorPtr<S>& v) {
    if (v->shape.size() != 1) throw DimensionError("logsumexp expects a 1-D tensor, got " + shape_str(v->shape));
    if (v->size() < 1) throw ArgumentError("logsumexp: empty input");
    const S m = *std::max_element(v->data.begin(), v->data.end());
    S sum = 0;
    for (const S u : v->data) sum += std::exp(u - m);
    auto out = detail::make_result<S>({1}, {v});
    out->data[0] = m + std::log(sum);
    if (!out->parents.empty()) {
        Tensor<S>* vp = v.get();
        const S lse = out->data[0];
        out->backprop = [vp, lse](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gv = *pg[0];
            for (size_t i = 0; i < gv.size(); ++i) gv[i] += go[0] * std::exp(vp->data[i] - lse);
        };
    }
    return out;
}

template <typename S>
TensorPtr<S> add(const TensorPtr<S>& a, const TensorPtr<S>& b) {
    if (a->shape != b->shape)
        throw DimensionError("add: shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    auto out = detail::make_result<S>(a->shape, {a, b});
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
    if (!out->parents.empty()) {
        out->backprop = [](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            for (size_t i = 0; i < go.size(); ++i) {
                (*pg[0])[i] += go[i];
                (*pg[1])[i] += go[i];
            }
        };
    }
    return out;
}

template <typename S>
TensorPtr<S> scale(const TensorPtr<S>& x, S c) {
    auto out = detail::make_result<S>(x->shape, {x});
    for (size_t i = 0; i < out->data.size(); ++i) out->data[i] = c * x->data[i];
    if (!out->parents.empty()) {
        out->backprop = [c](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            for (size_t i = 0; i < go.size(); ++i) (*pg[0])[i] += c * go[i];
        };
    }
    return out;
}

/// Zero out whole timestamps: x is [B x T x C], keep[b*T+t] in {0,1}. Masked
/// rows block gradient flow.
template <typename S>
TensorPtr<S> mask_time(const TensorPtr<S>& x, const std::vector<uint8_t>& keep) {
    if (x->shape.size() != 3)
        throw DimensionError("mask_time expects [BxTxC], got " + shape_str(x->shape));
    const int64_t B = x->shape[0], T = x->shape[1], C = x->shape[2];
    if (static_cast<int64_t>(keep.size()) != B * T)
        throw DimensionError("mask_time: mask length " + std::to_string(keep.size()) + " vs B*T = " +
                             std::to_string(B * T));
    auto out = detail::make_result<S>(x->shape, {x});
    for (int64_t r = 0; r < B * T; ++r) {
        const S* xr = x->data.data() + r * C;
        S* orow = out->data.data() + r * C;
        if (keep[r]) std::copy(xr, xr + C, orow);
        // else: stays zero
    }
    if (!out->parents.empty()) {
        auto keep_copy = std::make_shared<std::vector<uint8_t>>(keep);
        out->backprop = [keep_copy, B, T, C](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            for (int64_t r = 0; r < B * T; ++r) {
                if (!(*keep_copy)[r]) continue;
                for (int64_t c = 0; c < C; ++c) gx[r * C + c] += go[r * C + c];
            }
        };
    }
    return out;
}

/// Swap the last two axes ([... x A x B] -> [... x B x A]).
template <typename S>
TensorPtr<S> transpose_last2(const TensorPtr<S>& x) {
    if (x->shape.size() < 2) throw DimensionError("transpose_last2 needs rank >= 2, got " + shape_str(x->shape));
    const int64_t A = x->shape[x->shape.size() - 2];
    const int64_t Bd = x->shape.back();
    const int64_t outer = numel(x->shape) / (A * Bd);
    Shape out_shape = x->shape;
    out_shape[out_shape.size() - 2] = Bd;
    out_shape.back() = A;
    auto out = detail::make_result<S>(out_shape, {x});
    for (int64_t o = 0; o < outer; ++o) {
        const S* xs = x->data.data() + o * A * Bd;
        S* os = out->data.data() + o * A * Bd;
        for (int64_t a = 0; a < A; ++a)
            for (int64_t b = 0; b < Bd; ++b) os[b * A + a] = xs[a * Bd + b];
    }
    if (!out->parents.empty()) {
        out->backprop = [outer, A, Bd](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            for (int64_t o = 0; o < outer; ++o)
                for (int64_t a = 0; a < A; ++a)
                    for (int64_t b = 0; b < Bd; ++b) gx[o * A * Bd + a * Bd + b] += go[o * A * Bd + b * A + a];
        };
    }
    return out;
}

template <typename S>
TensorPtr<S> reshape(const TensorPtr<S>& x, Shape new_shape) {
    if (numel(new_shape) != numel(x->shape))
        throw DimensionError("reshape: element count mismatch " + shape_str(x->shape) + " -> " +
                             shape_str(new_shape));
    auto out = detail::make_result<S>(std::move(new_shape), {x});
    out->data = x->data;
    if (!out->parents.empty()) {
        out->backprop = [](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
        };
    }
    return out;
}

/// Slice [t0, t1) along the time axis of [B x T x C].
template <typename S>
TensorPtr<S> slice_time(const TensorPtr<S>& x, int64_t t0, int64_t t1) {
    if (x->shape.size() != 3)
        throw DimensionError("slice_time expects [BxTxC], got " + shape_str(x->shape));
    const int64_t B = x->shape[0], T = x->shape[1], C = x->shape[2];
    if (t0 < 0 || t1 > T || t0 >= t1)
        throw ArgumentError("slice_time: invalid range [" + std::to_string(t0) + "," + std::to_string(t1) +
                            ") for T=" + std::to_string(T));
    const int64_t L = t1 - t0;
    auto out = detail::make_result<S>({B, L, C}, {x});
    for (int64_t b = 0; b < B; ++b)
        std::copy(x->data.data() + (b * T + t0) * C, x->data.data() + (b * T + t1) * C,
                  out->data.data() + b * L * C);
    if (!out->parents.empty()) {
        out->backprop = [B, T, C, t0, L](const std::vector<S>& go, const std::vector<std::vector<S>*>& pg) {
            auto& gx = *pg[0];
            for (int64_t b = 0; b < B; ++b)
                for (int64_t i = 0; i < L * C; ++i) gx[(b * T + t0) * C + i] += go[b * L * C + i];
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// gradient checking
// ---------------------------------------------------------------------------

/// Compare reverse-mode gradients of a scalar-valued graph function against
/// central finite differences, coordinate by coordinate, and return the
/// maximum relative error. Intended for 64-bit mode.
template <typename S>
double grad_check(const std::function<TensorPtr<S>()>& f, const std::vector<TensorPtr<S>>& params, double eps) {
    auto root = f();
    if (!std::isfinite(static_cast<double>(root->data[0])))
        throw NumericError("grad_check: non-finite function value at probe point");
    for (const auto& p : params) p->zero_grad();
    backward(root);

    double max_rel = 0.0;
    for (const auto& p : params) {
        for (size_t i = 0; i < p->data.size(); ++i) {
            const S saved = p->data[i];
            p->data[i] = saved + static_cast<S>(eps);
            const double fp = static_cast<double>(f()->data[0]);
            p->data[i] = saved - static_cast<S>(eps);
            const double fm = static_cast<double>(f()->data[0]);
            p->data[i] = saved;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw NumericError("grad_check: non-finite function value near probe point");
            const double numeric = (fp - fm) / (2.0 * eps);
            const double analytic = static_cast<double>(p->grad[i]);
            const double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-3});
            max_rel = std::max(max_rel, std::fabs(numeric - analytic) / denom);
        }
    }
    return max_rel;
}

}  // namespace ts2rep::tensor
