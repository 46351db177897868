#pragma once

#include <filesystem>
#include <iosfwd>

#include "dax/nn/network.hpp"

namespace dax::nn {

// Binary checkpoint container, all integers and floats little-endian:
//
//   magic      8 bytes  "DAXNET01"
//   version    u32      kCheckpointVersion
//   role       u32      NetRole
//   rank       u32      per-sample input rank (1..3), then rank x u32 dims
//   layers     u32      layer count, then per layer:
//     spec     8 x u32  kind, kernel, in_channels, out_channels, stride,
//                       padding, in_features, out_features
//     count    u64      number of parameter values
//     values   count x f64, each parameter tensor flattened in declaration
//                       order (weight then bias)
//
// Values are stored as raw IEEE-754 doubles, so save/load round trips are
// bit-exact.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(std::ostream& out, const Network& net);
Network read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Network& net);
Network load_checkpoint(const std::filesystem::path& path);

}  // namespace dax::nn
