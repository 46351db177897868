#include "dax/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dax/errors.hpp"

namespace dax::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'D', 'A', 'X', 'N', 'E', 'T', '0', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<unsigned char, sizeof(T)> bytes{};
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw IoError("checkpoint truncated");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void put_u32(std::ostream& out, int v) { put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v)); }
int get_u32(std::istream& in) { return static_cast<int>(get_le<std::uint32_t>(in)); }

}  // namespace

void write_checkpoint(std::ostream& out, const Network& net) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_u32(out, static_cast<int>(net.role()));
  put_u32(out, static_cast<int>(net.input_shape().size()));
  for (int d : net.input_shape()) put_u32(out, d);
  put_u32(out, static_cast<int>(net.num_layers()));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const Layer& layer = net.layer(l);
    const LayerSpec& s = layer.spec();
    for (int v : {static_cast<int>(s.kind), s.kernel, s.in_channels, s.out_channels, s.stride, s.padding,
                  s.in_features, s.out_features}) {
      put_u32(out, v);
    }
    std::uint64_t count = 0;
    for (const Parameter* p : layer.parameters()) count += p->value.size();
    put_le<std::uint64_t>(out, count);
    for (const Parameter* p : layer.parameters()) {
      for (double v : p->value.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  if (!out) throw IoError("failed writing checkpoint");
}

Network read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw IoError("not a network checkpoint (bad magic)");
  const auto version = get_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const int role = get_u32(in);
  if (role < 0 || role > static_cast<int>(NetRole::kGeneric)) throw IoError("bad checkpoint role");
  const int rank = get_u32(in);
  if (rank < 1 || rank > 3) throw IoError("bad checkpoint input rank");
  Shape input(static_cast<std::size_t>(rank));
  for (int& d : input) d = get_u32(in);
  const int n_layers = get_u32(in);
  if (n_layers < 0 || n_layers > 1024) throw IoError("bad checkpoint layer count");

  std::vector<LayerSpec> specs;
  std::vector<std::vector<double>> values;
  for (int l = 0; l < n_layers; ++l) {
    LayerSpec s;
    const int kind = get_u32(in);
    if (kind < 0 || kind > static_cast<int>(LayerKind::kSigmoid)) throw IoError("bad layer kind in checkpoint");
    s.kind = static_cast<LayerKind>(kind);
    s.kernel = get_u32(in);
    s.in_channels = get_u32(in);
    s.out_channels = get_u32(in);
    s.stride = get_u32(in);
    s.padding = get_u32(in);
    s.in_features = get_u32(in);
    s.out_features = get_u32(in);
    const auto count = get_le<std::uint64_t>(in);
    if (count > (1ULL << 32)) throw IoError("implausible parameter count in checkpoint");
    std::vector<double> v(count);
    for (double& x : v) x = std::bit_cast<double>(get_le<std::uint64_t>(in));
    specs.push_back(s);
    values.push_back(std::move(v));
  }

  Network net(input, specs, static_cast<NetRole>(role));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    std::size_t expected = 0;
    for (Parameter* p : net.layer(l).parameters()) expected += p->value.size();
    if (expected != values[l].size()) {
      throw IoError("layer " + std::to_string(l) + " stores " + std::to_string(values[l].size()) +
                    " values, spec needs " + std::to_string(expected));
    }
    std::size_t k = 0;
    for (Parameter* p : net.layer(l).parameters()) {
      for (double& x : p->value.values()) x = values[l][k++];
    }
  }
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, net);
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace dax::nn
