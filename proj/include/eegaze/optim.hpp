#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "eegaze/error.hpp"
#include "eegaze/layers.hpp"
#include "eegaze/tensor.hpp"

namespace eegaze {

// The paper's training recipe: Adam with first momentum 0.9, second momentum
// 0.999, weight decay 5e-4, initial learning rate 1e-4, constant for the
// whole run. Decay is L2-coupled (added to the gradient before the moment
// updates) and by default applies to convolution/linear weights only;
// `decoupled` switches to the decoupled rule, `decay_weights_only = false`
// extends decay to biases and batchnorm parameters.
template <typename T>
struct AdamConfig {
    T lr = T(1e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T weight_decay = T(5e-4);
    T epsilon = T(1e-8);
    bool decay_weights_only = true;
    bool decoupled = false;

    void validate() const {
        if (!(lr > T(0))) throw std::invalid_argument("adam: lr must be > 0");
        if (beta1 < T(0) || beta1 >= T(1) || beta2 < T(0) || beta2 >= T(1))
            throw std::invalid_argument("adam: betas must be in [0,1)");
        if (weight_decay < T(0)) throw std::invalid_argument("adam: weight_decay must be >= 0");
        if (!(epsilon > T(0))) throw std::invalid_argument("adam: epsilon must be > 0");
    }
};

template <typename T>
class Adam {
  public:
    explicit Adam(AdamConfig<T> cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const AdamConfig<T>& config() const { return cfg_; }
    std::uint64_t step_count() const { return t_; }

    void step(const std::vector<ParamRef<T>>& params) {
        if (m_.empty()) {
            m_.reserve(params.size());
            v_.reserve(params.size());
            for (const auto& p : params) {
                m_.emplace_back(Tensor<T>::zeros(p.tensor->shape()));
                v_.emplace_back(Tensor<T>::zeros(p.tensor->shape()));
            }
        }
        if (m_.size() != params.size())
            throw Error("adam: parameter list changed size between steps");

        ++t_;
        const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(cfg_.beta1), static_cast<double>(t_)));
        const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(cfg_.beta2), static_cast<double>(t_)));

        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            const ParamRef<T>& p = params[pi];
            Tensor<T>& value = *p.tensor;
            if (!value.has_grad())
                throw Error("adam: parameter '" + p.name + "' has no gradient");
            const bool decay = cfg_.weight_decay > T(0) &&
                               (!cfg_.decay_weights_only || is_weight(p.role));
            Tensor<T>& m = m_[pi];
            Tensor<T>& v = v_[pi];
            const std::vector<T>& grad = value.grad();

#pragma omp parallel for schedule(static)
            for (std::size_t i = 0; i < value.numel(); ++i) {
                T g = grad[i];
                if (decay && !cfg_.decoupled) g += cfg_.weight_decay * value[i];
                m[i] = cfg_.beta1 * m[i] + (T(1) - cfg_.beta1) * g;
                v[i] = cfg_.beta2 * v[i] + (T(1) - cfg_.beta2) * g * g;
                const T m_hat = m[i] / bc1;
                const T v_hat = v[i] / bc2;
                T next = value[i] - cfg_.lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
                if (decay && cfg_.decoupled) next -= cfg_.lr * cfg_.weight_decay * value[i];
                value[i] = next;
            }

            if (!value.all_finite())
                throw Error("adam: non-finite update on parameter '" + p.name + "'");
        }
    }

  private:
    AdamConfig<T> cfg_;
    std::vector<Tensor<T>> m_, v_;
    std::uint64_t t_ = 0;
};

// Mean squared error over all B*2 entries plus its gradient with respect to
// the predictions.
template <typename T>
std::pair<T, Tensor<T>> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
    detail::check_same_shape(pred, target, "mse_loss");
    const std::size_t n = pred.numel();
    if (n == 0) throw std::invalid_argument("mse_loss: empty tensors");
    Tensor<T> grad(pred.shape());
    double acc = 0.0;
    const T inv_n = T(1) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T d = pred[i] - target[i];
        acc += static_cast<double>(d) * static_cast<double>(d);
        grad[i] = T(2) * d * inv_n;
    }
    return {static_cast<T>(acc / static_cast<double>(n)), std::move(grad)};
}

} // namespace eegaze
