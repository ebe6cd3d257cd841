#pragma once
// Differentiable tensor operations. Forward kernels lean on Eigen maps for
// vectorization; each op records a closure with its local backward rule when a
// tape is active and some input wants gradients.
//
// Backward closures accumulate into an input's grad only while that input's
// requires_grad flag is set, which is how discriminator freezing during the
// autoencoder phase keeps the two parameter groups isolated.

#include "ltx/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>

namespace ltx {

template <class S>
using MatMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using CMatMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using ArrMap = Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>;
template <class S>
using CArrMap = Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>;

template <class S>
MatMap<S> mat(TensorT<S>& t) {
    return MatMap<S>(t.data(), t.rows(), t.cols());
}
template <class S>
CMatMap<S> mat(const TensorT<S>& t) {
    return CMatMap<S>(t.data(), t.rows(), t.cols());
}
template <class S>
MatMap<S> gmat(TensorT<S>& t) {
    return MatMap<S>(t.g().data(), t.rows(), t.cols());
}
template <class S>
ArrMap<S> arr(TensorT<S>& t) {
    return ArrMap<S>(t.data(), t.numel());
}
template <class S>
CArrMap<S> arr(const TensorT<S>& t) {
    return CArrMap<S>(t.data(), t.numel());
}
template <class S>
ArrMap<S> garr(TensorT<S>& t) {
    return ArrMap<S>(t.g().data(), t.numel());
}

template <class S>
void check_finite(const TensorT<S>& t, const char* op) {
    if (!arr(t).isFinite().all()) throw NumericError(std::string(op) + ": non-finite output");
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

namespace detail {

template <class S>
bool want_grad(TapeT<S>* tape, const TensorT<S>& a) {
    return tape && a.requires_grad();
}
template <class S>
bool want_grad(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b) {
    return tape && (a.requires_grad() || b.requires_grad());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <class S>
TensorT<S> matmul(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.cols() == b.rows(),
            "matmul: incompatible shapes " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    auto out = TensorT<S>::zeros({a.rows(), b.cols()});
    mat(out).noalias() = mat(a) * mat(b);
    check_finite(out, "matmul");
    if (detail::want_grad(tape, a, b)) {
        out.set_requires_grad(true);
        tape->record([a, b, out]() mutable {
            auto go = CMatMap<S>(out.g().data(), out.rows(), out.cols());
            if (a.requires_grad()) gmat(a).noalias() += go * mat(b).transpose();
            if (b.requires_grad()) gmat(b).noalias() += mat(a).transpose() * go;
        });
    }
    return out;
}

// Same-shape addition, or row-broadcast when b is a length-cols vector.
template <class S>
TensorT<S> add(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b) {
    bool broadcast = b.rank() <= 1 && a.rank() == 2 && b.numel() == a.cols();
    require(broadcast || a.shape() == b.shape(),
            "add: incompatible shapes " + shape_str(a.shape()) + " + " + shape_str(b.shape()));
    auto out = TensorT<S>::zeros(a.shape());
    if (broadcast) {
        mat(out) = mat(a);
        mat(out).rowwise() += Eigen::Map<const Eigen::RowVector<S, Eigen::Dynamic>>(b.data(), b.numel());
    } else {
        arr(out) = arr(a) + arr(b);
    }
    check_finite(out, "add");
    if (detail::want_grad(tape, a, b)) {
        out.set_requires_grad(true);
        tape->record([a, b, out, broadcast]() mutable {
            if (a.requires_grad()) garr(a) += CArrMap<S>(out.g().data(), out.numel());
            if (b.requires_grad()) {
                if (broadcast) {
                    auto go = CMatMap<S>(out.g().data(), out.rows(), out.cols());
                    Eigen::Map<Eigen::RowVector<S, Eigen::Dynamic>>(b.g().data(), b.numel()) +=
                        go.colwise().sum();
                } else {
                    garr(b) += CArrMap<S>(out.g().data(), out.numel());
                }
            }
        });
    }
    return out;
}

template <class S>
TensorT<S> sub(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b) {
    require(a.shape() == b.shape(),
            "sub: incompatible shapes " + shape_str(a.shape()) + " - " + shape_str(b.shape()));
    auto out = TensorT<S>::zeros(a.shape());
    arr(out) = arr(a) - arr(b);
    check_finite(out, "sub");
    if (detail::want_grad(tape, a, b)) {
        out.set_requires_grad(true);
        tape->record([a, b, out]() mutable {
            if (a.requires_grad()) garr(a) += CArrMap<S>(out.g().data(), out.numel());
            if (b.requires_grad()) garr(b) -= CArrMap<S>(out.g().data(), out.numel());
        });
    }
    return out;
}

// Elementwise product.
template <class S>
TensorT<S> mul(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b) {
    require(a.shape() == b.shape(),
            "mul: incompatible shapes " + shape_str(a.shape()) + " * " + shape_str(b.shape()));
    auto out = TensorT<S>::zeros(a.shape());
    arr(out) = arr(a) * arr(b);
    check_finite(out, "mul");
    if (detail::want_grad(tape, a, b)) {
        out.set_requires_grad(true);
        tape->record([a, b, out]() mutable {
            auto go = CArrMap<S>(out.g().data(), out.numel());
            if (a.requires_grad()) garr(a) += go * arr(b);
            if (b.requires_grad()) garr(b) += go * arr(a);
        });
    }
    return out;
}

template <class S>
TensorT<S> scale(TapeT<S>* tape, const TensorT<S>& a, S c) {
    auto out = TensorT<S>::zeros(a.shape());
    arr(out) = arr(a) * c;
    check_finite(out, "scale");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out, c]() mutable { garr(a) += c * CArrMap<S>(out.g().data(), out.numel()); });
    }
    return out;
}

template <class S>
TensorT<S> add_const(TapeT<S>* tape, const TensorT<S>& a, S c) {
    auto out = TensorT<S>::zeros(a.shape());
    arr(out) = arr(a) + c;
    check_finite(out, "add_const");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out]() mutable { garr(a) += CArrMap<S>(out.g().data(), out.numel()); });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

template <class S>
TensorT<S> tanh_op(TapeT<S>* tape, const TensorT<S>& a) {
    auto out = TensorT<S>::zeros(a.shape());
    arr(out) = arr(a).tanh();
    check_finite(out, "tanh");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out]() mutable {
            garr(a) += CArrMap<S>(out.g().data(), out.numel()) * (S(1) - arr(out).square());
        });
    }
    return out;
}

template <class S>
TensorT<S> sigmoid(TapeT<S>* tape, const TensorT<S>& a) {
    auto out = TensorT<S>::zeros(a.shape());
    arr(out) = arr(a).logistic();
    check_finite(out, "sigmoid");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out]() mutable {
            garr(a) += CArrMap<S>(out.g().data(), out.numel()) * arr(out) * (S(1) - arr(out));
        });
    }
    return out;
}

template <class S>
TensorT<S> exp_op(TapeT<S>* tape, const TensorT<S>& a) {
    auto out = TensorT<S>::zeros(a.shape());
    arr(out) = arr(a).exp();
    check_finite(out, "exp");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out]() mutable {
            garr(a) += CArrMap<S>(out.g().data(), out.numel()) * arr(out);
        });
    }
    return out;
}

template <class S>
TensorT<S> log_op(TapeT<S>* tape, const TensorT<S>& a) {
    auto out = TensorT<S>::zeros(a.shape());
    arr(out) = arr(a).log();
    check_finite(out, "log");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out]() mutable {
            garr(a) += CArrMap<S>(out.g().data(), out.numel()) / arr(a);
        });
    }
    return out;
}

// log(1 + e^x) without overflow for large |x|.
template <class S>
TensorT<S> softplus(TapeT<S>* tape, const TensorT<S>& a) {
    auto out = TensorT<S>::zeros(a.shape());
    auto x = arr(a);
    arr(out) = x.max(S(0)) + (S(1) + (-x.abs()).exp()).log();
    check_finite(out, "softplus");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out]() mutable {
            garr(a) += CArrMap<S>(out.g().data(), out.numel()) * arr(a).logistic();
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Row-wise softmax and friends

template <class S>
TensorT<S> softmax_rows(TapeT<S>* tape, const TensorT<S>& a) {
    require(a.rank() == 2, "softmax_rows: expected rank-2 input, got " + shape_str(a.shape()));
    auto out = TensorT<S>::zeros(a.shape());
    auto in = mat(a);
    auto o = mat(out);
    for (int64_t r = 0; r < a.rows(); ++r) {
        S m = in.row(r).maxCoeff();
        o.row(r) = (in.row(r).array() - m).exp();
        o.row(r) /= o.row(r).sum();
    }
    check_finite(out, "softmax_rows");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out]() mutable {
            auto go = CMatMap<S>(out.g().data(), out.rows(), out.cols());
            auto y = mat(out);
            auto ga = gmat(a);
            for (int64_t r = 0; r < out.rows(); ++r) {
                S dot = go.row(r).dot(y.row(r));
                ga.row(r).array() += (go.row(r).array() - dot) * y.row(r).array();
            }
        });
    }
    return out;
}

// Per-row negative log-likelihood of a target id under softmax(logits); the
// fused form keeps log-softmax stable and makes backward a single
// softmax-minus-onehot expression.
template <class S>
TensorT<S> cross_entropy_rows(TapeT<S>* tape, const TensorT<S>& logits, std::vector<int32_t> targets) {
    require(logits.rank() == 2, "cross_entropy_rows: logits must be rank-2");
    require(static_cast<int64_t>(targets.size()) == logits.rows(),
            "cross_entropy_rows: " + std::to_string(targets.size()) + " targets for " +
                std::to_string(logits.rows()) + " rows");
    const int64_t V = logits.cols();
    for (int32_t t : targets)
        if (t < 0 || t >= V) throw InputError("cross_entropy_rows: target id out of range");
    auto out = TensorT<S>::zeros({logits.rows()});
    auto probs = TensorT<S>::zeros(logits.shape());  // cached for backward
    auto in = mat(logits);
    auto p = mat(probs);
    for (int64_t r = 0; r < logits.rows(); ++r) {
        S m = in.row(r).maxCoeff();
        p.row(r) = (in.row(r).array() - m).exp();
        S z = p.row(r).sum();
        out.v()[static_cast<size_t>(r)] = std::log(z) + m - in(r, targets[static_cast<size_t>(r)]);
        p.row(r) /= z;
    }
    check_finite(out, "cross_entropy_rows");
    if (detail::want_grad(tape, logits)) {
        out.set_requires_grad(true);
        tape->record([logits, out, probs, targets = std::move(targets)]() mutable {
            auto go = out.g();
            auto gl = gmat(logits);
            auto p = mat(probs);
            for (int64_t r = 0; r < logits.rows(); ++r) {
                gl.row(r).array() += go[static_cast<size_t>(r)] * p.row(r).array();
                gl(r, targets[static_cast<size_t>(r)]) -= go[static_cast<size_t>(r)];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reductions

template <class S>
TensorT<S> sum(TapeT<S>* tape, const TensorT<S>& a) {
    auto out = TensorT<S>::scalar(arr(a).sum());
    check_finite(out, "sum");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out]() mutable { garr(a) += out.g()[0]; });
    }
    return out;
}

template <class S>
TensorT<S> mean(TapeT<S>* tape, const TensorT<S>& a) {
    const S inv = S(1) / static_cast<S>(a.numel());
    auto out = TensorT<S>::scalar(arr(a).sum() * inv);
    check_finite(out, "mean");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out, inv]() mutable { garr(a) += out.g()[0] * inv; });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape surgery (column-wise concat/slice on rank-2 tensors)

template <class S>
TensorT<S> concat_cols(TapeT<S>* tape, const TensorT<S>& a, const TensorT<S>& b) {
    require(a.rank() == 2 && b.rank() == 2 && a.rows() == b.rows(),
            "concat: incompatible shapes " + shape_str(a.shape()) + " | " + shape_str(b.shape()));
    auto out = TensorT<S>::zeros({a.rows(), a.cols() + b.cols()});
    mat(out).leftCols(a.cols()) = mat(a);
    mat(out).rightCols(b.cols()) = mat(b);
    if (detail::want_grad(tape, a, b)) {
        out.set_requires_grad(true);
        tape->record([a, b, out]() mutable {
            auto go = CMatMap<S>(out.g().data(), out.rows(), out.cols());
            if (a.requires_grad()) gmat(a) += go.leftCols(a.cols());
            if (b.requires_grad()) gmat(b) += go.rightCols(b.cols());
        });
    }
    return out;
}

template <class S>
TensorT<S> slice_cols(TapeT<S>* tape, const TensorT<S>& a, int64_t start, int64_t len) {
    require(a.rank() == 2 && start >= 0 && len > 0 && start + len <= a.cols(),
            "slice: cols [" + std::to_string(start) + "," + std::to_string(start + len) +
                ") out of range for " + shape_str(a.shape()));
    auto out = TensorT<S>::zeros({a.rows(), len});
    mat(out) = mat(a).middleCols(start, len);
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out, start, len]() mutable {
            gmat(a).middleCols(start, len) += CMatMap<S>(out.g().data(), out.rows(), out.cols());
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Row norms

template <class S>
TensorT<S> l2_norm_rows(TapeT<S>* tape, const TensorT<S>& a) {
    require(a.rank() == 2, "l2_norm_rows: expected rank-2 input");
    auto out = TensorT<S>::zeros({a.rows(), 1});
    auto in = mat(a);
    for (int64_t r = 0; r < a.rows(); ++r) out.v()[static_cast<size_t>(r)] = in.row(r).norm();
    check_finite(out, "l2_norm_rows");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out]() mutable {
            auto go = out.g();
            auto ga = gmat(a);
            auto in = mat(a);
            for (int64_t r = 0; r < a.rows(); ++r) {
                S n = out.v()[static_cast<size_t>(r)];
                if (n > S(0)) ga.row(r) += (go[static_cast<size_t>(r)] / n) * in.row(r);
            }
        });
    }
    return out;
}

// Rows rescaled to unit norm; rows with norm below eps stay zero-safe.
template <class S>
TensorT<S> l2_normalize_rows(TapeT<S>* tape, const TensorT<S>& a, S eps = S(1e-12)) {
    require(a.rank() == 2, "l2_normalize_rows: expected rank-2 input");
    auto out = TensorT<S>::zeros(a.shape());
    auto norms = TensorT<S>::zeros({a.rows()});
    auto in = mat(a);
    auto o = mat(out);
    for (int64_t r = 0; r < a.rows(); ++r) {
        S n = std::max(in.row(r).norm(), eps);
        norms.v()[static_cast<size_t>(r)] = n;
        o.row(r) = in.row(r) / n;
    }
    check_finite(out, "l2_normalize_rows");
    if (detail::want_grad(tape, a)) {
        out.set_requires_grad(true);
        tape->record([a, out, norms]() mutable {
            auto go = CMatMap<S>(out.g().data(), out.rows(), out.cols());
            auto y = mat(out);
            auto ga = gmat(a);
            for (int64_t r = 0; r < a.rows(); ++r) {
                S n = norms.v()[static_cast<size_t>(r)];
                S dot = go.row(r).dot(y.row(r));
                ga.row(r) += (go.row(r) - dot * y.row(r)) / n;
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gather (embedding lookup)

template <class S>
TensorT<S> gather_rows(TapeT<S>* tape, const TensorT<S>& table, std::vector<int32_t> ids) {
    require(table.rank() == 2, "gather_rows: table must be rank-2");
    const int64_t n = static_cast<int64_t>(ids.size());
    for (int32_t i : ids)
        if (i < 0 || i >= table.rows()) throw InputError("gather_rows: row id out of range");
    auto out = TensorT<S>::zeros({n, table.cols()});
    auto o = mat(out);
    auto t = mat(table);
    for (int64_t r = 0; r < n; ++r) o.row(r) = t.row(ids[static_cast<size_t>(r)]);
    if (detail::want_grad(tape, table)) {
        out.set_requires_grad(true);
        tape->record([table, out, ids = std::move(ids)]() mutable {
            auto go = CMatMap<S>(out.g().data(), out.rows(), out.cols());
            auto gt = gmat(table);
            for (int64_t r = 0; r < out.rows(); ++r) gt.row(ids[static_cast<size_t>(r)]) += go.row(r);
        });
    }
    return out;
}

}  // namespace ltx
