#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "eegaze/error.hpp"
#include "eegaze/model.hpp"
#include "eegaze/serial.hpp"
#include "eegaze/tensor.hpp"

namespace eegaze {

// EEGM checkpoint, little-endian:
//   magic "EEGM" | u32 version=1
//   config: u32 channels, timesteps, spatial_filters, n_blocks,
//           width per block, fc_width, outputs,
//           flags (bit0 use_spatial, bit1 equal_convs, bit2 conv_bias)
//   each parameter tensor in model order: u32 rank, u32 dims[rank], f32 values
//   batchnorm running statistics after the parameters, same per-layer order
// Values are stored as f32, so float models round-trip bit-exactly.

inline constexpr char kCheckpointMagic[4] = {'E', 'E', 'G', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void write_tensor_f32(std::ostream& out, const Tensor<float>& t) {
    write_u32le(out, static_cast<std::uint32_t>(t.shape().rank()));
    for (std::size_t d : t.shape().dims()) write_u32le(out, static_cast<std::uint32_t>(d));
    write_f32le_array(out, t.data(), t.numel());
}

inline void read_tensor_f32_into(std::istream& in, Tensor<float>& t, const std::string& name) {
    const std::uint32_t rank = read_u32le(in);
    if (rank != t.shape().rank())
        throw FormatError(FormatError::Kind::config_mismatch,
                          "checkpoint tensor " + name + " has rank " + std::to_string(rank) +
                              ", config implies " + std::to_string(t.shape().rank()));
    for (std::size_t i = 0; i < rank; ++i) {
        const std::uint32_t d = read_u32le(in);
        if (d != t.shape()[i])
            throw FormatError(FormatError::Kind::config_mismatch,
                              "checkpoint tensor " + name + " dim " + std::to_string(i) + " is " +
                                  std::to_string(d) + ", config implies " +
                                  std::to_string(t.shape()[i]));
    }
    read_f32le_array(in, t.data(), t.numel());
}

} // namespace detail

inline void save_checkpoint(Model<float>& model, std::ostream& out) {
    const ModelConfig& cfg = model.config();
    write_magic(out, kCheckpointMagic);
    write_u32le(out, kCheckpointVersion);
    write_u32le(out, static_cast<std::uint32_t>(cfg.channels));
    write_u32le(out, static_cast<std::uint32_t>(cfg.timesteps));
    write_u32le(out, static_cast<std::uint32_t>(cfg.spatial_filters));
    write_u32le(out, static_cast<std::uint32_t>(cfg.block_widths.size()));
    for (std::size_t w : cfg.block_widths) write_u32le(out, static_cast<std::uint32_t>(w));
    write_u32le(out, static_cast<std::uint32_t>(cfg.fc_width));
    write_u32le(out, static_cast<std::uint32_t>(cfg.outputs));
    std::uint32_t flags = 0;
    if (cfg.use_spatial) flags |= 1u;
    if (cfg.equal_convs) flags |= 2u;
    if (cfg.conv_bias) flags |= 4u;
    write_u32le(out, flags);

    for (const auto& p : model.params()) detail::write_tensor_f32(out, *p.tensor);
    for (const auto& s : model.running_stats()) detail::write_tensor_f32(out, *s.tensor);
}

inline void save_checkpoint(Model<float>& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    save_checkpoint(model, out);
    if (!out) throw Error("write to '" + path + "' failed");
}

inline Model<float> load_checkpoint(std::istream& in) {
    expect_magic(in, kCheckpointMagic, "EEGM checkpoint");
    const std::uint32_t version = read_u32le(in);
    if (version != kCheckpointVersion)
        throw FormatError(FormatError::Kind::bad_version,
                          "unsupported checkpoint version " + std::to_string(version));

    ModelConfig cfg;
    cfg.channels = read_u32le(in);
    cfg.timesteps = read_u32le(in);
    cfg.spatial_filters = read_u32le(in);
    const std::uint32_t n_blocks = read_u32le(in);
    if (n_blocks == 0 || n_blocks > 64)
        throw FormatError(FormatError::Kind::config_mismatch,
                          "implausible block count " + std::to_string(n_blocks));
    cfg.block_widths.clear();
    for (std::uint32_t i = 0; i < n_blocks; ++i) cfg.block_widths.push_back(read_u32le(in));
    cfg.fc_width = read_u32le(in);
    cfg.outputs = read_u32le(in);
    const std::uint32_t flags = read_u32le(in);
    cfg.use_spatial = (flags & 1u) != 0;
    cfg.equal_convs = (flags & 2u) != 0;
    cfg.conv_bias = (flags & 4u) != 0;

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw FormatError(FormatError::Kind::config_mismatch,
                          std::string("invalid embedded config: ") + e.what());
    }

    Model<float> model(cfg, 0);
    for (const auto& p : model.params()) detail::read_tensor_f32_into(in, *p.tensor, p.name);
    for (const auto& s : model.running_stats()) detail::read_tensor_f32_into(in, *s.tensor, s.name);
    return model;
}

inline Model<float> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    return load_checkpoint(in);
}

} // namespace eegaze
