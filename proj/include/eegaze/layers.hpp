#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "eegaze/error.hpp"
#include "eegaze/rng.hpp"
#include "eegaze/tensor.hpp"

namespace eegaze {

enum class Mode { train, infer };

// Role of a learnable tensor; the optimizer uses it to restrict weight decay
// to convolution/linear weights.
enum class ParamRole {
    conv_kernel,
    conv_bias,
    bn_gamma,
    bn_beta,
    linear_weight,
    linear_bias,
};

template <typename T>
struct ParamRef {
    std::string name;
    ParamRole role;
    Tensor<T>* tensor;
};

template <typename T>
struct StatRef {
    std::string name;
    Tensor<T>* tensor;
};

inline bool is_weight(ParamRole r) {
    return r == ParamRole::conv_kernel || r == ParamRole::linear_weight;
}

namespace detail {

template <typename T>
void check_feature_map(const Tensor<T>& x, const char* who) {
    if (x.shape().rank() != 4)
        throw std::invalid_argument(std::string(who) + ": expected rank-4 [B,C,Y,1] input, got " +
                                    x.shape().str());
    if (x.shape()[3] != 1)
        throw std::invalid_argument(std::string(who) + ": x-axis extent must be 1, got " +
                                    x.shape().str());
}

} // namespace detail

// Convolution over the y-axis with stride 1 and a kernel of size
// in_channels x ky x 1. For ky == 1 this is the learnable spatial filter:
// per output channel one weight per input signal plus one shared bias,
// applied independently at every timestamp. Zero padding of pad_y rows on
// both ends; "same" output length needs ky odd and pad_y == (ky-1)/2.
template <typename T>
class Conv2d {
  public:
    Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_y,
           std::size_t pad_y, bool with_bias, SplitMix64& rng)
        : in_channels_(in_channels), out_channels_(out_channels), ky_(kernel_y), pad_y_(pad_y),
          with_bias_(with_bias) {
        if (in_channels == 0 || out_channels == 0 || kernel_y == 0)
            throw std::invalid_argument("Conv2d: extents must be >= 1");
        const double fan_in = static_cast<double>(in_channels * kernel_y);
        kernels_ = Tensor<T>::normal(Shape{out_channels, in_channels, kernel_y, 1},
                                     static_cast<T>(std::sqrt(2.0 / fan_in)), rng);
        if (with_bias_) bias_ = Tensor<T>::zeros(Shape{out_channels});
    }

    std::size_t out_len(std::size_t y_in) const { return y_in + 2 * pad_y_ - ky_ + 1; }

    Tensor<T> forward(const Tensor<T>& input, Mode mode) {
        detail::check_feature_map(input, "conv");
        const std::size_t batch = input.shape()[0];
        const std::size_t y_in = input.shape()[2];
        if (input.shape()[1] != in_channels_)
            throw std::invalid_argument("conv: input has " + std::to_string(input.shape()[1]) +
                                        " channels, layer expects " + std::to_string(in_channels_));
        if (y_in + 2 * pad_y_ < ky_)
            throw std::invalid_argument("conv: kernel taller than padded input");

        const std::size_t y_out = out_len(y_in);
        Tensor<T> out(Shape{batch, out_channels_, y_out, 1});
        const T* x = input.data();
        const T* k = kernels_.data();
        T* o = out.data();

#pragma omp parallel for collapse(2) schedule(static)
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t oc = 0; oc < out_channels_; ++oc) {
                T* orow = o + (b * out_channels_ + oc) * y_out;
                const T init = with_bias_ ? bias_[oc] : T(0);
                for (std::size_t y = 0; y < y_out; ++y) orow[y] = init;
                for (std::size_t c = 0; c < in_channels_; ++c) {
                    const T* xrow = x + (b * in_channels_ + c) * y_in;
                    const T* krow = k + (oc * in_channels_ + c) * ky_;
                    for (std::size_t y = 0; y < y_out; ++y) {
                        // input index y + dy - pad_y must land in [0, y_in)
                        const std::size_t dy_lo = pad_y_ > y ? pad_y_ - y : 0;
                        const std::size_t dy_hi = std::min(ky_, y_in + pad_y_ - y);
                        T acc = orow[y];
                        for (std::size_t dy = dy_lo; dy < dy_hi; ++dy)
                            acc += xrow[y + dy - pad_y_] * krow[dy];
                        orow[y] = acc;
                    }
                }
            }
        }

        if (mode == Mode::train)
            cached_input_ = input;
        else
            cached_input_ = Tensor<T>();
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (cached_input_.numel() == 0)
            throw Error("conv backward without a prior train-mode forward");
        const std::size_t batch = cached_input_.shape()[0];
        const std::size_t y_in = cached_input_.shape()[2];
        const std::size_t y_out = out_len(y_in);
        if (grad_out.shape() != Shape{batch, out_channels_, y_out, 1})
            throw std::invalid_argument("conv backward: grad shape " + grad_out.shape().str() +
                                        " does not match forward output");

        kernels_.ensure_grad();
        kernels_.zero_grad();
        if (with_bias_) {
            bias_.ensure_grad();
            bias_.zero_grad();
        }
        Tensor<T> grad_input(cached_input_.shape());

        const T* x = cached_input_.data();
        const T* g = grad_out.data();
        const T* k = kernels_.data();
        T* gk = kernels_.grad().data();
        T* gx = grad_input.data();

        if (with_bias_) {
            T* gb = bias_.grad().data();
            for (std::size_t b = 0; b < batch; ++b)
                for (std::size_t oc = 0; oc < out_channels_; ++oc) {
                    const T* grow = g + (b * out_channels_ + oc) * y_out;
                    T acc = T(0);
                    for (std::size_t y = 0; y < y_out; ++y) acc += grow[y];
                    gb[oc] += acc;
                }
        }

        // Both adjoints are indexed by the input channel, so parallelizing
        // over c is race-free and the accumulation order stays fixed.
#pragma omp parallel for schedule(static)
        for (std::size_t c = 0; c < in_channels_; ++c) {
            for (std::size_t b = 0; b < batch; ++b) {
                const T* xrow = x + (b * in_channels_ + c) * y_in;
                T* gxrow = gx + (b * in_channels_ + c) * y_in;
                for (std::size_t oc = 0; oc < out_channels_; ++oc) {
                    const T* grow = g + (b * out_channels_ + oc) * y_out;
                    const T* krow = k + (oc * in_channels_ + c) * ky_;
                    T* gkrow = gk + (oc * in_channels_ + c) * ky_;
                    for (std::size_t y = 0; y < y_out; ++y) {
                        const std::size_t dy_lo = pad_y_ > y ? pad_y_ - y : 0;
                        const std::size_t dy_hi = std::min(ky_, y_in + pad_y_ - y);
                        const T gy = grow[y];
                        for (std::size_t dy = dy_lo; dy < dy_hi; ++dy) {
                            gkrow[dy] += gy * xrow[y + dy - pad_y_];
                            gxrow[y + dy - pad_y_] += gy * krow[dy];
                        }
                    }
                }
            }
        }
        return grad_input;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".kernel", ParamRole::conv_kernel, &kernels_});
        if (with_bias_) out.push_back({prefix + ".bias", ParamRole::conv_bias, &bias_});
    }

    Tensor<T>& kernels() { return kernels_; }
    Tensor<T>& bias() { return bias_; }
    bool with_bias() const { return with_bias_; }
    std::size_t in_channels() const { return in_channels_; }
    std::size_t out_channels() const { return out_channels_; }
    std::size_t kernel_y() const { return ky_; }
    std::size_t pad_y() const { return pad_y_; }

  private:
    std::size_t in_channels_, out_channels_, ky_, pad_y_;
    bool with_bias_;
    Tensor<T> kernels_; // [out_channels, in_channels, ky, 1]
    Tensor<T> bias_;    // [out_channels], empty when !with_bias_
    Tensor<T> cached_input_;
};

// Per-channel batch normalization over (batch, y). Train mode normalizes
// with batch statistics and folds them into the running estimates as
// running <- (1-momentum)*running + momentum*batch_stat; infer mode applies
// the running estimates and never mutates them. Running variance stores the
// population (biased) batch variance, the same quantity used to normalize.
template <typename T>
class BatchNorm {
  public:
    explicit BatchNorm(std::size_t channels, T momentum = T(0.1), T epsilon = T(1e-5))
        : channels_(channels), momentum_(momentum), epsilon_(epsilon),
          gamma_(Tensor<T>::full(Shape{channels}, T(1))), beta_(Tensor<T>::zeros(Shape{channels})),
          running_mean_(Tensor<T>::zeros(Shape{channels})),
          running_var_(Tensor<T>::full(Shape{channels}, T(1))) {
        if (channels == 0) throw std::invalid_argument("BatchNorm: channels must be >= 1");
        if (!(momentum > T(0)) || momentum > T(1))
            throw std::invalid_argument("BatchNorm: momentum must be in (0,1]");
    }

    Tensor<T> forward(const Tensor<T>& input, Mode mode) {
        detail::check_feature_map(input, "batchnorm");
        if (input.shape()[1] != channels_)
            throw std::invalid_argument("batchnorm: channel mismatch");
        const std::size_t batch = input.shape()[0];
        const std::size_t y_len = input.shape()[2];
        const std::size_t m = batch * y_len;

        Tensor<T> out(input.shape());
        const T* x = input.data();
        T* o = out.data();

        if (mode == Mode::infer) {
            cached_ = false;
#pragma omp parallel for schedule(static)
            for (std::size_t c = 0; c < channels_; ++c) {
                const T istd = T(1) / std::sqrt(running_var_[c] + epsilon_);
                const T g = gamma_[c] * istd;
                const T b = beta_[c] - running_mean_[c] * g;
                for (std::size_t bb = 0; bb < batch; ++bb) {
                    const T* xrow = x + (bb * channels_ + c) * y_len;
                    T* orow = o + (bb * channels_ + c) * y_len;
                    for (std::size_t y = 0; y < y_len; ++y) orow[y] = g * xrow[y] + b;
                }
            }
            return out;
        }

        if (m < 2)
            throw std::invalid_argument("batchnorm train mode needs >= 2 elements per channel");

        xhat_ = Tensor<T>(input.shape());
        inv_std_.assign(channels_, T(0));
        T* xh = xhat_.data();

#pragma omp parallel for schedule(static)
        for (std::size_t c = 0; c < channels_; ++c) {
            double acc = 0.0;
            for (std::size_t bb = 0; bb < batch; ++bb) {
                const T* xrow = x + (bb * channels_ + c) * y_len;
                for (std::size_t y = 0; y < y_len; ++y) acc += static_cast<double>(xrow[y]);
            }
            const double mu = acc / static_cast<double>(m);
            double var_acc = 0.0;
            for (std::size_t bb = 0; bb < batch; ++bb) {
                const T* xrow = x + (bb * channels_ + c) * y_len;
                for (std::size_t y = 0; y < y_len; ++y) {
                    const double d = static_cast<double>(xrow[y]) - mu;
                    var_acc += d * d;
                }
            }
            const double var = var_acc / static_cast<double>(m);
            const T istd = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(epsilon_)));
            inv_std_[c] = istd;

            for (std::size_t bb = 0; bb < batch; ++bb) {
                const T* xrow = x + (bb * channels_ + c) * y_len;
                T* xhrow = xh + (bb * channels_ + c) * y_len;
                T* orow = o + (bb * channels_ + c) * y_len;
                for (std::size_t y = 0; y < y_len; ++y) {
                    const T v = (xrow[y] - static_cast<T>(mu)) * istd;
                    xhrow[y] = v;
                    orow[y] = gamma_[c] * v + beta_[c];
                }
            }

            running_mean_[c] =
                (T(1) - momentum_) * running_mean_[c] + momentum_ * static_cast<T>(mu);
            running_var_[c] =
                (T(1) - momentum_) * running_var_[c] + momentum_ * static_cast<T>(var);
        }
        cached_ = true;
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (!cached_) throw Error("batchnorm backward without a prior train-mode forward");
        if (grad_out.shape() != xhat_.shape())
            throw std::invalid_argument("batchnorm backward: grad shape mismatch");
        const std::size_t batch = grad_out.shape()[0];
        const std::size_t y_len = grad_out.shape()[2];
        const std::size_t m = batch * y_len;

        gamma_.ensure_grad();
        gamma_.zero_grad();
        beta_.ensure_grad();
        beta_.zero_grad();
        Tensor<T> grad_input(grad_out.shape());

        const T* g = grad_out.data();
        const T* xh = xhat_.data();
        T* gx = grad_input.data();
        T* ggamma = gamma_.grad().data();
        T* gbeta = beta_.grad().data();

#pragma omp parallel for schedule(static)
        for (std::size_t c = 0; c < channels_; ++c) {
            double s1 = 0.0, s2 = 0.0; // sum(g), sum(g * xhat)
            for (std::size_t bb = 0; bb < batch; ++bb) {
                const T* grow = g + (bb * channels_ + c) * y_len;
                const T* xhrow = xh + (bb * channels_ + c) * y_len;
                for (std::size_t y = 0; y < y_len; ++y) {
                    s1 += static_cast<double>(grow[y]);
                    s2 += static_cast<double>(grow[y]) * static_cast<double>(xhrow[y]);
                }
            }
            gbeta[c] = static_cast<T>(s1);
            ggamma[c] = static_cast<T>(s2);

            // dx = gamma*istd * (g - mean(g) - xhat * mean(g*xhat)); the two
            // mean terms carry the dependence of the batch statistics on x.
            const T a = gamma_[c] * inv_std_[c];
            const T m1 = static_cast<T>(s1 / static_cast<double>(m));
            const T m2 = static_cast<T>(s2 / static_cast<double>(m));
            for (std::size_t bb = 0; bb < batch; ++bb) {
                const T* grow = g + (bb * channels_ + c) * y_len;
                const T* xhrow = xh + (bb * channels_ + c) * y_len;
                T* gxrow = gx + (bb * channels_ + c) * y_len;
                for (std::size_t y = 0; y < y_len; ++y)
                    gxrow[y] = a * (grow[y] - m1 - xhrow[y] * m2);
            }
        }
        return grad_input;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".gamma", ParamRole::bn_gamma, &gamma_});
        out.push_back({prefix + ".beta", ParamRole::bn_beta, &beta_});
    }

    void collect_stats(const std::string& prefix, std::vector<StatRef<T>>& out) {
        out.push_back({prefix + ".running_mean", &running_mean_});
        out.push_back({prefix + ".running_var", &running_var_});
    }

    Tensor<T>& gamma() { return gamma_; }
    Tensor<T>& beta() { return beta_; }
    Tensor<T>& running_mean() { return running_mean_; }
    Tensor<T>& running_var() { return running_var_; }
    T epsilon() const { return epsilon_; }
    T momentum() const { return momentum_; }

  private:
    std::size_t channels_;
    T momentum_, epsilon_;
    Tensor<T> gamma_, beta_, running_mean_, running_var_;
    Tensor<T> xhat_;
    std::vector<T> inv_std_;
    bool cached_ = false;
};

// max(0, x); the subgradient at exactly 0 is taken as 0.
template <typename T>
class ReLU {
  public:
    Tensor<T> forward(const Tensor<T>& input, Mode mode) {
        Tensor<T> out(input.shape());
        for (std::size_t i = 0; i < input.numel(); ++i)
            out[i] = input[i] > T(0) ? input[i] : T(0);
        if (mode == Mode::train)
            cached_input_ = input;
        else
            cached_input_ = Tensor<T>();
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (cached_input_.numel() == 0)
            throw Error("relu backward without a prior train-mode forward");
        if (grad_out.shape() != cached_input_.shape())
            throw std::invalid_argument("relu backward: grad shape mismatch");
        Tensor<T> grad_input(grad_out.shape());
        for (std::size_t i = 0; i < grad_out.numel(); ++i)
            grad_input[i] = cached_input_[i] > T(0) ? grad_out[i] : T(0);
        return grad_input;
    }

  private:
    Tensor<T> cached_input_;
};

// Non-overlapping mean over windows of 2 along y; a trailing odd element is
// dropped. Backward routes grad/2 to both window members and nothing to a
// dropped element.
template <typename T>
class AvgPool2 {
  public:
    Tensor<T> forward(const Tensor<T>& input, Mode mode) {
        detail::check_feature_map(input, "avgpool");
        const std::size_t y_in = input.shape()[2];
        if (y_in < 2) throw std::invalid_argument("avgpool: y extent must be >= 2");
        const std::size_t batch = input.shape()[0];
        const std::size_t channels = input.shape()[1];
        const std::size_t y_out = y_in / 2;

        Tensor<T> out(Shape{batch, channels, y_out, 1});
        const T* x = input.data();
        T* o = out.data();
        for (std::size_t r = 0; r < batch * channels; ++r) {
            const T* xrow = x + r * y_in;
            T* orow = o + r * y_out;
            for (std::size_t y = 0; y < y_out; ++y)
                orow[y] = (xrow[2 * y] + xrow[2 * y + 1]) / T(2);
        }
        in_shape_ = input.shape();
        cached_ = (mode == Mode::train);
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (!cached_) throw Error("avgpool backward without a prior train-mode forward");
        const std::size_t batch = in_shape_[0];
        const std::size_t channels = in_shape_[1];
        const std::size_t y_in = in_shape_[2];
        const std::size_t y_out = y_in / 2;
        if (grad_out.shape() != Shape{batch, channels, y_out, 1})
            throw std::invalid_argument("avgpool backward: grad shape mismatch");

        Tensor<T> grad_input(in_shape_);
        const T* g = grad_out.data();
        T* gx = grad_input.data();
        for (std::size_t r = 0; r < batch * channels; ++r) {
            const T* grow = g + r * y_out;
            T* gxrow = gx + r * y_in;
            for (std::size_t y = 0; y < y_out; ++y) {
                const T half = grow[y] / T(2);
                gxrow[2 * y] = half;
                gxrow[2 * y + 1] = half;
            }
            // a dropped trailing element keeps its zero grad
        }
        return grad_input;
    }

  private:
    Shape in_shape_;
    bool cached_ = false;
};

// Fully connected layer: y = W x + b per batch row.
template <typename T>
class Linear {
  public:
    Linear(std::size_t in_features, std::size_t out_features, SplitMix64& rng)
        : in_features_(in_features), out_features_(out_features) {
        if (in_features == 0 || out_features == 0)
            throw std::invalid_argument("Linear: features must be >= 1");
        weight_ = Tensor<T>::normal(Shape{out_features, in_features},
                                    static_cast<T>(std::sqrt(2.0 / static_cast<double>(in_features))),
                                    rng);
        bias_ = Tensor<T>::zeros(Shape{out_features});
    }

    Tensor<T> forward(const Tensor<T>& input, Mode mode) {
        if (input.shape().rank() != 2)
            throw std::invalid_argument("linear: expected rank-2 [B,F] input, got " +
                                        input.shape().str());
        if (input.shape()[1] != in_features_)
            throw std::invalid_argument("linear: input has " + std::to_string(input.shape()[1]) +
                                        " features, layer expects " + std::to_string(in_features_));
        const std::size_t batch = input.shape()[0];
        Tensor<T> out(Shape{batch, out_features_});
        const T* x = input.data();
        const T* w = weight_.data();
        T* o = out.data();

#pragma omp parallel for collapse(2) schedule(static)
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t of = 0; of < out_features_; ++of) {
                const T* xrow = x + b * in_features_;
                const T* wrow = w + of * in_features_;
                T acc = bias_[of];
                for (std::size_t i = 0; i < in_features_; ++i) acc += xrow[i] * wrow[i];
                o[b * out_features_ + of] = acc;
            }
        }

        if (mode == Mode::train)
            cached_input_ = input;
        else
            cached_input_ = Tensor<T>();
        return out;
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        if (cached_input_.numel() == 0)
            throw Error("linear backward without a prior train-mode forward");
        const std::size_t batch = cached_input_.shape()[0];
        if (grad_out.shape() != Shape{batch, out_features_})
            throw std::invalid_argument("linear backward: grad shape mismatch");

        weight_.ensure_grad();
        weight_.zero_grad();
        bias_.ensure_grad();
        bias_.zero_grad();
        Tensor<T> grad_input(cached_input_.shape());

        const T* x = cached_input_.data();
        const T* g = grad_out.data();
        const T* w = weight_.data();
        T* gw = weight_.grad().data();
        T* gb = bias_.grad().data();
        T* gx = grad_input.data();

#pragma omp parallel for schedule(static)
        for (std::size_t of = 0; of < out_features_; ++of) {
            T* gwrow = gw + of * in_features_;
            T bacc = T(0);
            for (std::size_t b = 0; b < batch; ++b) {
                const T gy = g[b * out_features_ + of];
                bacc += gy;
                const T* xrow = x + b * in_features_;
                for (std::size_t i = 0; i < in_features_; ++i) gwrow[i] += gy * xrow[i];
            }
            gb[of] = bacc;
        }

#pragma omp parallel for schedule(static)
        for (std::size_t b = 0; b < batch; ++b) {
            T* gxrow = gx + b * in_features_;
            for (std::size_t of = 0; of < out_features_; ++of) {
                const T gy = g[b * out_features_ + of];
                const T* wrow = w + of * in_features_;
                for (std::size_t i = 0; i < in_features_; ++i) gxrow[i] += gy * wrow[i];
            }
        }
        return grad_input;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        out.push_back({prefix + ".weight", ParamRole::linear_weight, &weight_});
        out.push_back({prefix + ".bias", ParamRole::linear_bias, &bias_});
    }

    Tensor<T>& weight() { return weight_; }
    Tensor<T>& bias() { return bias_; }
    std::size_t in_features() const { return in_features_; }
    std::size_t out_features() const { return out_features_; }

  private:
    std::size_t in_features_, out_features_;
    Tensor<T> weight_; // [out_features, in_features]
    Tensor<T> bias_;   // [out_features]
    Tensor<T> cached_input_;
};

} // namespace eegaze
