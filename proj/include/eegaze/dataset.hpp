#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "eegaze/error.hpp"
#include "eegaze/rng.hpp"
#include "eegaze/serial.hpp"
#include "eegaze/tensor.hpp"

namespace eegaze {

struct Provenance {
    enum class Kind { synthetic, file };
    Kind kind = Kind::synthetic;
    std::uint64_t seed = 0;
    float noise_sigma = 0.0f;
    std::string path;
};

// N samples of [channels x timesteps x 1] signals paired with 2-D gaze
// labels. Labels live in a single declared unit (mm-convention, matching
// the 800x600 recording screen geometry); no unit conversion happens here.
// Immutable after construction; safe for concurrent readers.
struct EegDataset {
    Tensor<float> signals; // [N, channels, timesteps, 1]
    Tensor<float> labels;  // [N, 2]
    Provenance provenance;

    std::size_t n() const { return signals.shape()[0]; }
    std::size_t channels() const { return signals.shape()[1]; }
    std::size_t timesteps() const { return signals.shape()[2]; }

    // Materializes a batch in index order.
    std::pair<Tensor<float>, Tensor<float>> gather(const std::vector<std::size_t>& indices) const {
        const std::size_t c = channels(), t = timesteps();
        const std::size_t row = c * t;
        Tensor<float> x(Shape{indices.size(), c, t, 1});
        Tensor<float> y(Shape{indices.size(), 2});
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const std::size_t s = indices[i];
            if (s >= n()) throw std::invalid_argument("gather: index out of range");
            std::memcpy(x.data() + i * row, signals.data() + s * row, row * sizeof(float));
            y[2 * i] = labels[2 * s];
            y[2 * i + 1] = labels[2 * s + 1];
        }
        return {std::move(x), std::move(y)};
    }
};

inline constexpr double kLabelRangeX = 800.0;
inline constexpr double kLabelRangeY = 600.0;

// Synthetic stand-in for the recording data: gaze labels drawn uniformly
// over the 800x600 screen geometry, encoded into the signals by a fixed
// seeded linear map from (x, y) to per-channel amplitude. Each channel
// modulates its amplitude with a low-frequency sinusoid (offset so the
// temporal mean stays nonzero), giving the 9x1 temporal convolutions
// structure to exploit, plus i.i.d. Gaussian noise of scale noise_sigma.
// With noise_sigma = 0 the labels are an exact affine function of the
// per-channel signal means, so a linear decode recovers them.
inline EegDataset generate_synthetic(std::size_t n, std::size_t channels, std::size_t timesteps,
                                     std::uint64_t seed, double noise_sigma) {
    if (n == 0) throw std::invalid_argument("generate_synthetic: need n >= 1");
    if (channels == 0 || timesteps == 0)
        throw std::invalid_argument("generate_synthetic: extents must be >= 1");
    if (noise_sigma < 0.0) throw std::invalid_argument("generate_synthetic: noise_sigma must be >= 0");

    SplitMix64 rng(seed);

    // per-channel encoding: amplitude coefficients and temporal profile
    std::vector<double> ax(channels), ay(channels), offset(channels), freq(channels), phase(channels);
    for (std::size_t c = 0; c < channels; ++c) {
        ax[c] = rng.uniform(-1.0, 1.0);
        ay[c] = rng.uniform(-1.0, 1.0);
        offset[c] = rng.uniform(0.5, 1.5);
        freq[c] = rng.uniform(1.0, 4.0);
        phase[c] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }

    std::vector<std::vector<double>> profile(channels, std::vector<double>(timesteps));
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t t = 0; t < timesteps; ++t)
            profile[c][t] = offset[c] + std::sin(2.0 * std::numbers::pi * freq[c] *
                                                     static_cast<double>(t) /
                                                     static_cast<double>(timesteps) +
                                                 phase[c]);

    EegDataset ds;
    ds.signals = Tensor<float>(Shape{n, channels, timesteps, 1});
    ds.labels = Tensor<float>(Shape{n, 2});
    ds.provenance = {Provenance::Kind::synthetic, seed, static_cast<float>(noise_sigma), ""};

    float* sig = ds.signals.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform(0.0, kLabelRangeX);
        const double y = rng.uniform(0.0, kLabelRangeY);
        ds.labels[2 * i] = static_cast<float>(x);
        ds.labels[2 * i + 1] = static_cast<float>(y);
        const double xn = (x - kLabelRangeX / 2) / (kLabelRangeX / 2);
        const double yn = (y - kLabelRangeY / 2) / (kLabelRangeY / 2);
        for (std::size_t c = 0; c < channels; ++c) {
            const double amp = ax[c] * xn + ay[c] * yn;
            float* row = sig + (i * channels + c) * timesteps;
            if (noise_sigma > 0.0) {
                for (std::size_t t = 0; t < timesteps; ++t)
                    row[t] = static_cast<float>(amp * profile[c][t] + noise_sigma * rng.normal());
            } else {
                for (std::size_t t = 0; t < timesteps; ++t)
                    row[t] = static_cast<float>(amp * profile[c][t]);
            }
        }
    }
    return ds;
}

// EEGR dataset file, little-endian:
//   magic "EEGR" | u32 version=1 | u32 n_samples | u32 channels | u32 timesteps
//   signals as f32, sample-major, channel-major within sample, time-major
//   within channel; then labels as n_samples x 2 f32 (x, y).

inline constexpr char kDatasetMagic[4] = {'E', 'E', 'G', 'R'};
inline constexpr std::uint32_t kDatasetVersion = 1;

inline void save_dataset(const EegDataset& ds, std::ostream& out) {
    write_magic(out, kDatasetMagic);
    write_u32le(out, kDatasetVersion);
    write_u32le(out, static_cast<std::uint32_t>(ds.n()));
    write_u32le(out, static_cast<std::uint32_t>(ds.channels()));
    write_u32le(out, static_cast<std::uint32_t>(ds.timesteps()));
    write_f32le_array(out, ds.signals.data(), ds.signals.numel());
    write_f32le_array(out, ds.labels.data(), ds.labels.numel());
}

inline void save_dataset(const EegDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    save_dataset(ds, out);
    if (!out) throw Error("write to '" + path + "' failed");
}

inline EegDataset load_dataset(std::istream& in) {
    expect_magic(in, kDatasetMagic, "EEGR dataset");
    const std::uint32_t version = read_u32le(in);
    if (version != kDatasetVersion)
        throw FormatError(FormatError::Kind::bad_version,
                          "unsupported dataset version " + std::to_string(version));
    const std::uint32_t n = read_u32le(in);
    const std::uint32_t channels = read_u32le(in);
    const std::uint32_t timesteps = read_u32le(in);
    if (n == 0 || channels == 0 || timesteps == 0)
        throw FormatError(FormatError::Kind::count_mismatch, "dataset header declares zero extent");

    EegDataset ds;
    ds.signals = Tensor<float>(Shape{n, channels, timesteps, 1});
    ds.labels = Tensor<float>(Shape{n, 2});
    read_f32le_array(in, ds.signals.data(), ds.signals.numel());
    read_f32le_array(in, ds.labels.data(), ds.labels.numel());
    in.peek();
    if (!in.eof())
        throw FormatError(FormatError::Kind::count_mismatch,
                          "trailing bytes after declared payload");
    ds.provenance = {Provenance::Kind::file, 0, 0.0f, ""};
    return ds;
}

inline EegDataset load_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    EegDataset ds = load_dataset(in);
    ds.provenance.path = path;
    return ds;
}

// Optional per-channel standardization (off by default everywhere): shifts
// and scales each channel to zero mean and unit variance over the whole
// dataset. Signals are otherwise consumed exactly as generated or loaded.
inline EegDataset standardize_per_channel(const EegDataset& ds) {
    const std::size_t n = ds.n(), c = ds.channels(), t = ds.timesteps();
    EegDataset out;
    out.signals = Tensor<float>(ds.signals.shape());
    out.labels = ds.labels;
    out.provenance = ds.provenance;
    const float* x = ds.signals.data();
    float* o = out.signals.data();
    for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* row = x + (i * c + ch) * t;
            for (std::size_t k = 0; k < t; ++k) acc += row[k];
        }
        const double mu = acc / static_cast<double>(n * t);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const float* row = x + (i * c + ch) * t;
            for (std::size_t k = 0; k < t; ++k) {
                const double d = row[k] - mu;
                var += d * d;
            }
        }
        const double istd = 1.0 / std::sqrt(var / static_cast<double>(n * t) + 1e-12);
        for (std::size_t i = 0; i < n; ++i) {
            const float* row = x + (i * c + ch) * t;
            float* orow = o + (i * c + ch) * t;
            for (std::size_t k = 0; k < t; ++k)
                orow[k] = static_cast<float>((row[k] - mu) * istd);
        }
    }
    return out;
}

// Split protocols. The test partition depends only on (seed, fractions) and
// is identical across epochs and across both modes. Fixed mode freezes
// train/val as well; per-epoch-random mode redraws train/val from the
// pooled non-test indices using (seed, epoch). Counts: floor for train and
// val, remainder to test.
struct SplitSpec {
    enum class Mode { fixed, per_epoch_random };
    Mode mode = Mode::fixed;
    double train_frac = 0.7;
    double val_frac = 0.15;
    double test_frac = 0.15;
    std::uint64_t seed = 1;

    void validate() const {
        for (double f : {train_frac, val_frac, test_frac})
            if (!(f > 0.0) || !(f < 1.0))
                throw std::invalid_argument("split fractions must lie in (0,1)");
        if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
            throw std::invalid_argument("split fractions must sum to 1");
    }
};

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};

inline SplitIndices split(std::size_t n, const SplitSpec& spec, std::uint64_t epoch) {
    spec.validate();
    const std::size_t n_train = static_cast<std::size_t>(std::floor(spec.train_frac * static_cast<double>(n)));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(spec.val_frac * static_cast<double>(n)));
    const std::size_t n_test = n - n_train - n_val;
    if (n_train == 0 || n_val == 0 || n_test == 0)
        throw std::invalid_argument("split: dataset too small, a partition is empty");

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    SplitMix64 base_rng(mix64(spec.seed, 0x5EED0001ull));
    base_rng.shuffle(perm);

    SplitIndices out;
    out.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());

    std::vector<std::size_t> pool(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    if (spec.mode == SplitSpec::Mode::per_epoch_random) {
        SplitMix64 epoch_rng(mix64(spec.seed, mix64(0x5EED0002ull, epoch)));
        epoch_rng.shuffle(pool);
    }
    out.train.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_train), pool.end());
    return out;
}

// Epoch-seeded shuffle of the given indices, chunked into batches; the final
// partial batch is retained.
inline std::vector<std::vector<std::size_t>> batches(const std::vector<std::size_t>& indices,
                                                     std::size_t batch_size, std::uint64_t seed,
                                                     std::uint64_t epoch) {
    if (batch_size == 0) throw std::invalid_argument("batches: batch_size must be >= 1");
    std::vector<std::size_t> order = indices;
    SplitMix64 rng(mix64(seed, mix64(0xBA7C4000ull, epoch)));
    rng.shuffle(order);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

} // namespace eegaze
