#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eegaze/error.hpp"
#include "eegaze/layers.hpp"
#include "eegaze/rng.hpp"
#include "eegaze/tensor.hpp"

namespace eegaze {

// Architecture description: the paper's network is the default; the two
// flags select the ablation variants (spatial filtering layer removed,
// equally sized residual convolutions).
struct ModelConfig {
    std::size_t channels = 129;
    std::size_t timesteps = 500;
    std::size_t spatial_filters = 16;
    std::vector<std::size_t> block_widths = {32, 64};
    std::size_t fc_width = 256;
    std::size_t outputs = 2;
    bool use_spatial = true;
    bool equal_convs = false;
    bool conv_bias = false; // every conv is followed by batchnorm, so off by default

    void validate() const {
        if (channels == 0 || timesteps == 0 || spatial_filters == 0 || fc_width == 0)
            throw std::invalid_argument("ModelConfig: extents must be >= 1");
        if (outputs != 2)
            throw std::invalid_argument("ModelConfig: outputs must be 2 (gaze x, y)");
        if (block_widths.empty())
            throw std::invalid_argument("ModelConfig: need at least one residual block");
        for (std::size_t w : block_widths)
            if (w == 0) throw std::invalid_argument("ModelConfig: block widths must be >= 1");
        std::size_t y = timesteps;
        for (std::size_t i = 0; i < block_widths.size(); ++i) {
            if (y < 2) throw std::invalid_argument("ModelConfig: timesteps too short for pooling cascade");
            y /= 2;
        }
    }

    bool operator==(const ModelConfig&) const = default;
};

inline const char* kVariantNames[] = {"base", "no-spatial", "equal-convs", "no-spatial-equal-convs"};

// Variant flags by name; width fields keep their paper defaults.
inline ModelConfig variant_config(std::string_view name) {
    ModelConfig cfg;
    if (name == "base") {
    } else if (name == "no-spatial") {
        cfg.use_spatial = false;
    } else if (name == "equal-convs") {
        cfg.equal_convs = true;
    } else if (name == "no-spatial-equal-convs") {
        cfg.use_spatial = false;
        cfg.equal_convs = true;
    } else {
        throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
    }
    return cfg;
}

// Closed-form count of learnable scalars (running statistics excluded).
// Cross-checked against the built model's tensors in the tests.
inline std::size_t param_count(const ModelConfig& cfg) {
    cfg.validate();
    std::size_t count = 0;
    std::size_t in_c = cfg.channels;
    std::size_t y = cfg.timesteps;

    if (cfg.use_spatial) {
        count += cfg.spatial_filters * cfg.channels; // 1x1 kernels
        if (cfg.conv_bias) count += cfg.spatial_filters;
        count += 2 * cfg.spatial_filters; // bn gamma/beta
        in_c = cfg.spatial_filters;
    }

    for (std::size_t n : cfg.block_widths) {
        const std::size_t ky2 = cfg.equal_convs ? 9 : 1;
        count += n * in_c * 9 + 2 * n;  // conv1 + bn1
        count += n * n * ky2 + 2 * n;   // conv2 + bn2
        if (cfg.conv_bias) count += 2 * n;
        if (in_c != n) {
            count += n * in_c + 2 * n; // 1x1 shortcut projection + bn
            if (cfg.conv_bias) count += n;
        }
        in_c = n;
        y /= 2;
    }

    count += cfg.fc_width * (in_c * y) + cfg.fc_width;
    count += cfg.outputs * cfg.fc_width + cfg.outputs;
    return count;
}

struct TraceEntry {
    std::string stage;
    Shape shape;
};
using ForwardTrace = std::vector<TraceEntry>;

// The residual block of the paper: a depth x 9 x 1 convolution (same
// padding), batchnorm, ReLU, then an N x 1 x 1 convolution (9 x 1 when
// equal_convs) and batchnorm; the block input is added back, ReLU is
// applied, and average pooling halves the y extent. When the input depth
// differs from N the skip path carries a 1x1 projection with its own
// batchnorm; the pooling never sits inside the shortcut.
template <typename T>
class ResidualBlock {
  public:
    ResidualBlock(std::size_t in_depth, std::size_t width, bool equal_convs, bool conv_bias,
                  SplitMix64& rng)
        : conv1_(in_depth, width, 9, 4, conv_bias, rng),
          bn1_(width),
          conv2_(width, width, equal_convs ? 9 : 1, equal_convs ? 4 : 0, conv_bias, rng),
          bn2_(width) {
        if (in_depth != width) {
            shortcut_conv_.emplace(in_depth, width, 1, 0, conv_bias, rng);
            shortcut_bn_.emplace(width);
        }
    }

    Tensor<T> forward(const Tensor<T>& input, Mode mode) {
        Tensor<T> h = relu1_.forward(bn1_.forward(conv1_.forward(input, mode), mode), mode);
        h = bn2_.forward(conv2_.forward(h, mode), mode);
        Tensor<T> skip = shortcut_conv_
                             ? shortcut_bn_->forward(shortcut_conv_->forward(input, mode), mode)
                             : input;
        return pool_.forward(relu2_.forward(add(h, skip), mode), mode);
    }

    Tensor<T> backward(const Tensor<T>& grad_out) {
        Tensor<T> g = relu2_.backward(pool_.backward(grad_out));
        // the add fans the gradient out to both branches
        Tensor<T> g_main = conv1_.backward(
            bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(g)))));
        Tensor<T> g_skip =
            shortcut_conv_ ? shortcut_conv_->backward(shortcut_bn_->backward(g)) : g;
        return add(g_main, g_skip);
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) {
        conv1_.collect_params(prefix + ".conv1", out);
        bn1_.collect_params(prefix + ".bn1", out);
        conv2_.collect_params(prefix + ".conv2", out);
        bn2_.collect_params(prefix + ".bn2", out);
        if (shortcut_conv_) {
            shortcut_conv_->collect_params(prefix + ".shortcut", out);
            shortcut_bn_->collect_params(prefix + ".shortcut_bn", out);
        }
    }

    void collect_stats(const std::string& prefix, std::vector<StatRef<T>>& out) {
        bn1_.collect_stats(prefix + ".bn1", out);
        bn2_.collect_stats(prefix + ".bn2", out);
        if (shortcut_bn_) shortcut_bn_->collect_stats(prefix + ".shortcut_bn", out);
    }

    bool has_shortcut() const { return shortcut_conv_.has_value(); }
    Conv2d<T>& conv1() { return conv1_; }
    Conv2d<T>& conv2() { return conv2_; }
    BatchNorm<T>& bn1() { return bn1_; }
    BatchNorm<T>& bn2() { return bn2_; }
    Conv2d<T>& shortcut_conv() { return *shortcut_conv_; }
    BatchNorm<T>& shortcut_bn() { return *shortcut_bn_; }

  private:
    Conv2d<T> conv1_;
    BatchNorm<T> bn1_;
    ReLU<T> relu1_;
    Conv2d<T> conv2_;
    BatchNorm<T> bn2_;
    std::optional<Conv2d<T>> shortcut_conv_;
    std::optional<BatchNorm<T>> shortcut_bn_;
    ReLU<T> relu2_;
    AvgPool2<T> pool_;
};

// The full network: [16 spatial-filter 1x1 convolutions + batchnorm + ReLU]
// -> residual block N=32 -> residual block N=64 -> flatten (depth-major,
// then y) -> fully connected 256 + ReLU -> fully connected 2. Holds the
// parameters, batchnorm running statistics, and the activation caches of
// the last train-mode forward; single writer. Infer-mode forward touches
// neither parameters nor caches and may be shared read-only.
template <typename T>
class Model {
  public:
    Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)), seed_(seed) {
        cfg_.validate();
        SplitMix64 rng(mix64(seed, 0x4545474Dull)); // independent of other streams
        std::size_t in_c = cfg_.channels;
        std::size_t y = cfg_.timesteps;
        if (cfg_.use_spatial) {
            spatial_conv_.emplace(cfg_.channels, cfg_.spatial_filters, 1, 0, cfg_.conv_bias, rng);
            spatial_bn_.emplace(cfg_.spatial_filters);
            in_c = cfg_.spatial_filters;
        }
        blocks_.reserve(cfg_.block_widths.size());
        for (std::size_t n : cfg_.block_widths) {
            blocks_.emplace_back(in_c, n, cfg_.equal_convs, cfg_.conv_bias, rng);
            in_c = n;
            y /= 2;
        }
        flat_features_ = in_c * y;
        fc1_.emplace(flat_features_, cfg_.fc_width, rng);
        fc2_.emplace(cfg_.fc_width, cfg_.outputs, rng);
    }

    const ModelConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t flat_features() const { return flat_features_; }

    Tensor<T> forward(const Tensor<T>& batch, Mode mode, ForwardTrace* trace = nullptr) {
        detail::check_feature_map(batch, "model");
        if (batch.shape()[1] != cfg_.channels || batch.shape()[2] != cfg_.timesteps)
            throw std::invalid_argument("model: input " + batch.shape().str() +
                                        " does not match config [B," +
                                        std::to_string(cfg_.channels) + "," +
                                        std::to_string(cfg_.timesteps) + ",1]");
        if (trace) trace->push_back({"input", batch.shape()});

        Tensor<T> h = batch;
        if (spatial_conv_) {
            h = spatial_relu_.forward(
                spatial_bn_->forward(spatial_conv_->forward(h, mode), mode), mode);
            if (trace) trace->push_back({"spatial", h.shape()});
        }
        for (std::size_t i = 0; i < blocks_.size(); ++i) {
            h = blocks_[i].forward(h, mode);
            if (trace) trace->push_back({"block" + std::to_string(i + 1), h.shape()});
        }

        pre_flatten_shape_ = h.shape();
        h = h.reshaped(Shape{h.shape()[0], flat_features_});
        if (trace) trace->push_back({"flatten", h.shape()});

        h = fc2_->forward(fc_relu_.forward(fc1_->forward(h, mode), mode), mode);
        if (trace) trace->push_back({"output", h.shape()});

        if (!h.all_finite())
            throw Error("model forward produced non-finite outputs");
        return h;
    }

    // Fills every parameter's grad buffer (overwriting, not accumulating)
    // and returns the gradient with respect to the input batch.
    Tensor<T> backward(const Tensor<T>& grad_out) {
        Tensor<T> g = fc1_->backward(fc_relu_.backward(fc2_->backward(grad_out)));
        g = g.reshaped(pre_flatten_shape_);
        for (std::size_t i = blocks_.size(); i-- > 0;) g = blocks_[i].backward(g);
        if (spatial_conv_)
            g = spatial_conv_->backward(spatial_bn_->backward(spatial_relu_.backward(g)));
        return g;
    }

    // Deterministic parameter order; the checkpoint format depends on it.
    std::vector<ParamRef<T>> params() {
        std::vector<ParamRef<T>> out;
        if (spatial_conv_) {
            spatial_conv_->collect_params("spatial.conv", out);
            spatial_bn_->collect_params("spatial.bn", out);
        }
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i].collect_params("block" + std::to_string(i + 1), out);
        fc1_->collect_params("fc1", out);
        fc2_->collect_params("fc2", out);
        return out;
    }

    std::vector<StatRef<T>> running_stats() {
        std::vector<StatRef<T>> out;
        if (spatial_bn_) spatial_bn_->collect_stats("spatial.bn", out);
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i].collect_stats("block" + std::to_string(i + 1), out);
        return out;
    }

    std::size_t param_count() {
        std::size_t n = 0;
        for (const auto& p : params()) n += p.tensor->numel();
        return n;
    }

    bool has_spatial() const { return spatial_conv_.has_value(); }
    ResidualBlock<T>& block(std::size_t i) { return blocks_[i]; }
    std::size_t n_blocks() const { return blocks_.size(); }
    Conv2d<T>& spatial_conv() { return *spatial_conv_; }
    BatchNorm<T>& spatial_bn() { return *spatial_bn_; }
    Linear<T>& fc1() { return *fc1_; }
    Linear<T>& fc2() { return *fc2_; }

  private:
    ModelConfig cfg_;
    std::uint64_t seed_;
    std::size_t flat_features_ = 0;
    Shape pre_flatten_shape_;

    std::optional<Conv2d<T>> spatial_conv_;
    std::optional<BatchNorm<T>> spatial_bn_;
    ReLU<T> spatial_relu_;
    std::vector<ResidualBlock<T>> blocks_;
    std::optional<Linear<T>> fc1_;
    ReLU<T> fc_relu_;
    std::optional<Linear<T>> fc2_;
};

} // namespace eegaze
