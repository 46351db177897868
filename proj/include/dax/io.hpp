#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "dax/image.hpp"
#include "dax/segmentation.hpp"

namespace dax::io {

// Netpbm images (P1-P6). 8-bit samples map to [0, 1] by v / maxval, so 255
// reads as exactly 1.0. Bitmaps read black (1) as 1.0. Throws IoError on
// unsupported or corrupt input.
Image read_netpbm(const std::filesystem::path& path);
Image parse_netpbm(const std::string& bytes, const std::string& name = "<memory>");

// Binary P6 (3 channels) or P5 (1 channel); values are clamped to [0, 1] and
// rounded to the nearest of 0..255.
std::string encode_netpbm(const Image& image);
void write_netpbm(const std::filesystem::path& path, const Image& image);

// Binary P4, set pixels written as black.
std::string encode_pbm(const BinaryMask& mask);
void write_pbm(const std::filesystem::path& path, const BinaryMask& mask);

// Float container: ASCII header "DXT1 <H> <W> <C>\n" followed by H*W*C
// little-endian IEEE-754 doubles in HWC order. Round trips are bit-exact.
std::string encode_dxt(const Image& tensor);
Image decode_dxt(const std::string& bytes, const std::string& name = "<memory>");
void write_dxt(const std::filesystem::path& path, const Image& tensor);
void write_dxt(const std::filesystem::path& path, const Grid& grid);
Image read_dxt(const std::filesystem::path& path);
Grid read_dxt_grid(const std::filesystem::path& path);

// Dispatch on the extension: .dxt for the float container, anything else is
// parsed as Netpbm.
Image load_input(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& bytes);

// Heatmap colormap: 9 RGB stops at t = 0, 1/8, ..., 1, linearly interpolated.
// Dark blue through teal and green to yellow; luminance increases
// monotonically.
inline constexpr std::array<std::array<double, 3>, 9> kColormap = {{
    {0.000, 0.000, 0.300},
    {0.100, 0.050, 0.550},
    {0.150, 0.200, 0.650},
    {0.100, 0.400, 0.600},
    {0.100, 0.550, 0.500},
    {0.300, 0.680, 0.350},
    {0.600, 0.780, 0.200},
    {0.850, 0.870, 0.150},
    {1.000, 1.000, 0.400},
}};

std::array<double, 3> colormap(double t);

// Min-max normalizes the saliency, maps it through the colormap and blends it
// over the grayscale of the input: out = (1 - alpha) * gray + alpha * color.
Image heatmap_overlay(const Image& x, const Grid& saliency, double alpha = 0.6);

// Segment labels as a P5 graymap spread over 1..255.
Image segment_image(const seg::SegmentMap& map);

// 64-bit FNV-1a, printed as 16 hex digits in manifests.
std::uint64_t fnv1a(const std::string& bytes);
std::string hex64(std::uint64_t v);

}  // namespace dax::io
