#pragma once
// Adam and plain SGD with global-norm gradient clipping.

#include "ltx/ops.hpp"
#include "ltx/tensor.hpp"

#include <cmath>
#include <vector>

namespace ltx {

enum class OptKind { Adam, Sgd };

template <class S>
struct OptimizerT {
    OptKind kind = OptKind::Sgd;
    S lr = S(1e-3);
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S eps = S(1e-8);
    S clip_norm = S(5);  // 0 disables clipping
    int64_t step_count = 0;
    std::vector<std::vector<S>> m, v;  // Adam moments, parallel to the param list

    static OptimizerT adam(S lr, S clip = S(5)) {
        OptimizerT o;
        o.kind = OptKind::Adam;
        o.lr = lr;
        o.clip_norm = clip;
        return o;
    }

    static OptimizerT sgd(S lr, S clip = S(5)) {
        OptimizerT o;
        o.kind = OptKind::Sgd;
        o.lr = lr;
        o.clip_norm = clip;
        return o;
    }

    // Applies one update in place, zeroes the grads, bumps the step counter.
    void step(std::vector<TensorT<S>>& params) {
        for (auto& p : params)
            if (!p.requires_grad() || !p.has_grad())
                throw ContractError("optimizer_step: parameter without populated grad");
        if (kind == OptKind::Adam && m.empty()) {
            m.resize(params.size());
            v.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                m[i].assign(static_cast<size_t>(params[i].numel()), S(0));
                v[i].assign(static_cast<size_t>(params[i].numel()), S(0));
            }
        }
        if (kind == OptKind::Adam && m.size() != params.size())
            throw ContractError("optimizer_step: parameter list changed size");

        // Global-norm clip across the whole group; also the non-finite
        // gradient check for the step.
        double sq = 0;
        for (auto& p : params) {
            auto g = p.g();
            for (S x : g) sq += static_cast<double>(x) * static_cast<double>(x);
        }
        if (!std::isfinite(sq)) throw NumericError("optimizer_step: non-finite gradient norm");
        double norm = std::sqrt(sq);
        S gscale = S(1);
        if (clip_norm > S(0) && norm > static_cast<double>(clip_norm))
            gscale = static_cast<S>(static_cast<double>(clip_norm) / norm);

        const int64_t t = step_count + 1;
        if (kind == OptKind::Sgd) {
            for (auto& p : params) {
                auto val = p.v();
                auto g = p.g();
                for (size_t i = 0; i < val.size(); ++i) val[i] -= lr * gscale * g[i];
            }
        } else {
            const S bc1 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta1), t));
            const S bc2 = S(1) - static_cast<S>(std::pow(static_cast<double>(beta2), t));
            for (size_t pi = 0; pi < params.size(); ++pi) {
                auto val = params[pi].v();
                auto g = params[pi].g();
                auto& mi = m[pi];
                auto& vi = v[pi];
                for (size_t i = 0; i < val.size(); ++i) {
                    const S gi = gscale * g[i];
                    mi[i] = beta1 * mi[i] + (S(1) - beta1) * gi;
                    vi[i] = beta2 * vi[i] + (S(1) - beta2) * gi * gi;
                    const S mhat = mi[i] / bc1;
                    const S vhat = vi[i] / bc2;
                    val[i] -= lr * mhat / (std::sqrt(vhat) + eps);
                }
            }
        }
        for (auto& p : params) p.zero_grad();
        ++step_count;
    }
};

using Optimizer = OptimizerT<float>;

}  // namespace ltx
