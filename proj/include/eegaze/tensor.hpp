#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eegaze/rng.hpp"

namespace eegaze {

// Extents of a dense row-major array, last axis fastest. Feature maps use
// the layout [batch, depth, y-axis, x-axis]; the x extent is 1 throughout
// the model, so y-axis traversal is contiguous.
class Shape {
  public:
    Shape() = default;

    Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }

    explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

    std::size_t rank() const { return dims_.size(); }

    std::size_t operator[](std::size_t i) const { return dims_[i]; }

    const std::vector<std::size_t>& dims() const { return dims_; }

    std::size_t numel() const {
        std::size_t n = 1;
        for (std::size_t d : dims_) n *= d;
        return n;
    }

    bool operator==(const Shape& other) const { return dims_ == other.dims_; }
    bool operator!=(const Shape& other) const { return dims_ != other.dims_; }

    std::string str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) os << ',';
            os << dims_[i];
        }
        os << ']';
        return os.str();
    }

  private:
    void validate() const {
        if (dims_.empty()) throw std::invalid_argument("shape must have at least one axis");
        std::size_t n = 1;
        for (std::size_t d : dims_) {
            if (d == 0) throw std::invalid_argument("shape extents must be >= 1");
            if (d > std::numeric_limits<std::size_t>::max() / n)
                throw std::invalid_argument("shape element count overflows");
            n *= d;
        }
    }

    std::vector<std::size_t> dims_;
};

// Dense real array plus an optional gradient buffer of identical length.
// Values are float in normal operation; double instantiations exist so
// gradient checks are not drowned by roundoff.
template <typename T>
class Tensor {
  public:
    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)), values_(shape_.numel(), T(0)) {}

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, T value) {
        Tensor t(std::move(shape));
        std::fill(t.values_.begin(), t.values_.end(), value);
        return t;
    }

    static Tensor uniform(Shape shape, T lo, T hi, SplitMix64& rng) {
        Tensor t(std::move(shape));
        for (T& v : t.values_) v = static_cast<T>(rng.uniform(static_cast<double>(lo), static_cast<double>(hi)));
        return t;
    }

    static Tensor normal(Shape shape, T stddev, SplitMix64& rng) {
        Tensor t(std::move(shape));
        for (T& v : t.values_) v = static_cast<T>(static_cast<double>(stddev) * rng.normal());
        return t;
    }

    static Tensor from_values(Shape shape, std::vector<T> values) {
        if (values.size() != shape.numel())
            throw std::invalid_argument("from_values: got " + std::to_string(values.size()) +
                                        " values for shape " + shape.str());
        Tensor t;
        t.shape_ = std::move(shape);
        t.values_ = std::move(values);
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t numel() const { return values_.size(); }

    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }
    std::vector<T>& values() { return values_; }
    const std::vector<T>& values() const { return values_; }

    T operator[](std::size_t i) const { return values_[i]; }
    T& operator[](std::size_t i) { return values_[i]; }

    // Gradient buffer; absent until ensure_grad().
    bool has_grad() const { return !grad_.empty(); }

    void ensure_grad() {
        if (grad_.size() != values_.size()) grad_.assign(values_.size(), T(0));
    }

    void zero_grad() { std::fill(grad_.begin(), grad_.end(), T(0)); }

    void drop_grad() { grad_.clear(); }

    std::vector<T>& grad() { return grad_; }
    const std::vector<T>& grad() const { return grad_; }

    // Same buffer under a new shape; element count must be conserved.
    Tensor reshaped(Shape shape) const {
        if (shape.numel() != values_.size())
            throw std::invalid_argument("reshape from " + shape_.str() + " to " + shape.str() +
                                        " changes element count");
        Tensor t;
        t.shape_ = std::move(shape);
        t.values_ = values_;
        return t;
    }

    bool all_finite() const {
        for (T v : values_)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

  private:
    Shape shape_;
    std::vector<T> values_;
    std::vector<T> grad_;
};

namespace detail {
template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape().str() +
                                    " vs " + b.shape().str());
}
} // namespace detail

// Pointwise ops; evaluation order is index order, so results are
// bit-reproducible.

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "add");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] + b[i];
    return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "sub");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] - b[i];
    return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::check_same_shape(a, b, "mul");
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * b[i];
    return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a[i] * s;
    return out;
}

// Reductions accumulate in double in index order.

template <typename T>
T sum(const Tensor<T>& a) {
    if (a.numel() == 0) throw std::invalid_argument("sum: empty tensor");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += static_cast<double>(a[i]);
    return static_cast<T>(acc);
}

template <typename T>
T mean(const Tensor<T>& a) {
    if (a.numel() == 0) throw std::invalid_argument("mean: empty tensor");
    return static_cast<T>(static_cast<double>(sum(a)) / static_cast<double>(a.numel()));
}

template <typename T>
T max_abs(const Tensor<T>& a) {
    if (a.numel() == 0) throw std::invalid_argument("max_abs: empty tensor");
    T m = T(0);
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

} // namespace eegaze
