#pragma once
// Dense tensors with reverse-mode autodiff. Templated on the scalar so the
// training path runs in float while gradient checks instantiate double.

#include "ltx/common.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ltx {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Shared-handle tensor: copies alias the same storage, so closures recorded on
// a tape keep inputs/outputs alive for the backward sweep.
template <class S>
class TensorT {
public:
    using Scalar = S;

    TensorT() = default;

    static TensorT zeros(Shape shape, bool requires_grad = false) {
        TensorT t;
        t.d_ = std::make_shared<Data>();
        t.d_->shape = std::move(shape);
        validate_shape(t.d_->shape);
        t.d_->v.assign(static_cast<size_t>(shape_numel(t.d_->shape)), S(0));
        t.set_requires_grad(requires_grad);
        return t;
    }

    static TensorT full(Shape shape, S value) {
        TensorT t = zeros(std::move(shape));
        for (S& x : t.d_->v) x = value;
        return t;
    }

    static TensorT from(Shape shape, std::vector<S> values, bool requires_grad = false) {
        TensorT t;
        t.d_ = std::make_shared<Data>();
        t.d_->shape = std::move(shape);
        validate_shape(t.d_->shape);
        if (static_cast<int64_t>(values.size()) != shape_numel(t.d_->shape))
            throw ShapeError("tensor init: " + std::to_string(values.size()) + " values for shape " +
                             shape_str(t.d_->shape));
        t.d_->v = std::move(values);
        t.set_requires_grad(requires_grad);
        return t;
    }

    static TensorT scalar(S v) { return from({1}, {v}); }

    bool defined() const { return static_cast<bool>(d_); }
    const Shape& shape() const { return d_->shape; }
    int64_t numel() const { return static_cast<int64_t>(d_->v.size()); }
    int rank() const { return static_cast<int>(d_->shape.size()); }
    int64_t rows() const { return d_->shape.empty() ? 1 : d_->shape[0]; }
    int64_t cols() const { return d_->shape.size() < 2 ? numel() / rows() : d_->shape[1]; }
    bool is_scalar() const { return numel() == 1 && rank() <= 1; }

    std::span<S> v() { return {d_->v.data(), d_->v.size()}; }
    std::span<const S> v() const { return {d_->v.data(), d_->v.size()}; }
    S* data() { return d_->v.data(); }
    const S* data() const { return d_->v.data(); }

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool rg) {
        d_->requires_grad = rg;
        if (rg && d_->g.size() != d_->v.size()) d_->g.assign(d_->v.size(), S(0));
        if (!rg) d_->g.clear();
    }

    bool has_grad() const { return !d_->g.empty(); }

    // Gradient buffer, allocated (zeroed) on first touch.
    std::span<S> g() {
        if (d_->g.size() != d_->v.size()) d_->g.assign(d_->v.size(), S(0));
        return {d_->g.data(), d_->g.size()};
    }

    void zero_grad() {
        for (S& x : d_->g) x = S(0);
    }

    S item() const {
        if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
        return d_->v[0];
    }

    // Value copy that is cut off from the graph.
    TensorT detach() const {
        TensorT t;
        t.d_ = std::make_shared<Data>();
        t.d_->shape = d_->shape;
        t.d_->v = d_->v;
        return t;
    }

    template <class T>
    TensorT<T> cast() const {
        std::vector<T> vals(d_->v.begin(), d_->v.end());
        return TensorT<T>::from(d_->shape, std::move(vals));
    }

    const void* id() const { return d_.get(); }

    bool same_storage(const TensorT& other) const { return d_ == other.d_; }

private:
    struct Data {
        Shape shape;
        std::vector<S> v;
        std::vector<S> g;
        bool requires_grad = false;
    };

    static void validate_shape(const Shape& s) {
        for (int64_t e : s)
            if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_str(s));
    }

    std::shared_ptr<Data> d_;
};

// Records backward closures in forward order; backward() replays them in exact
// reverse order and then clears the tape.
template <class S>
class TapeT {
public:
    using BackFn = std::function<void()>;

    void record(BackFn fn) { steps_.push_back(std::move(fn)); }
    size_t size() const { return steps_.size(); }
    bool empty() const { return steps_.empty(); }
    void clear() { steps_.clear(); }

    void backward(TensorT<S>& loss) {
        if (!loss.defined() || loss.numel() != 1 || loss.rank() > 1)
            throw ContractError("backward: loss must be a scalar (shape [] or [1])");
        if (loss.requires_grad()) loss.g()[0] += S(1);
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
        clear();
    }

private:
    std::vector<BackFn> steps_;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace ltx
