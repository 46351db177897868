#include "dax/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dax/errors.hpp"

namespace dax::io {

namespace {

static_assert(std::endian::native == std::endian::little, "float container assumes a little-endian host");

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& name) : bytes_(bytes), name_(name) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long number() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) fail("expected a number");
    if (pos_ - start > 9) fail("number too large");
    return std::stol(bytes_.substr(start, pos_ - start));
  }

  // Exactly one whitespace byte separates the header from raster data.
  void single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(static_cast<unsigned char>(bytes_[pos_]))) {
      fail("missing separator before raster data");
    }
    ++pos_;
  }

  unsigned char byte() {
    if (pos_ >= bytes_.size()) fail("truncated raster data");
    return static_cast<unsigned char>(bytes_[pos_++]);
  }

  char ascii_bit() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) fail("truncated raster data");
    const char ch = bytes_[pos_++];
    if (ch != '0' && ch != '1') fail("bitmap sample must be 0 or 1");
    return ch;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw IoError(name_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  const std::string& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

Image parse_netpbm(const std::string& bytes, const std::string& name) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] < '1' || bytes[1] > '6') {
    throw IoError(name + ": not a Netpbm file");
  }
  const int kind = bytes[1] - '0';
  const std::string body = bytes.substr(2);
  Reader rd(body, name);
  const long width = rd.number();
  const long height = rd.number();
  if (width < 1 || height < 1) rd.fail("non-positive dimensions");
  const bool bitmap = kind == 1 || kind == 4;
  const long maxval = bitmap ? 1 : rd.number();
  if (maxval < 1 || maxval > 255) rd.fail("only 8-bit maxval is supported");
  const bool binary = kind >= 4;
  if (binary) rd.single_space();

  const int channels = (kind == 3 || kind == 6) ? 3 : 1;
  Image img(ImageShape{static_cast<int>(height), static_cast<int>(width), channels});
  auto out = img.data();
  if (kind == 4) {
    const long row_bytes = (width + 7) / 8;
    for (long r = 0; r < height; ++r) {
      for (long b = 0; b < row_bytes; ++b) {
        const unsigned char v = rd.byte();
        for (int bit = 0; bit < 8; ++bit) {
          const long c = b * 8 + bit;
          if (c < width) out[static_cast<std::size_t>(r * width + c)] = (v >> (7 - bit)) & 1 ? 1.0 : 0.0;
        }
      }
    }
  } else if (kind == 1) {
    for (double& v : out) v = rd.ascii_bit() == '1' ? 1.0 : 0.0;
  } else {
    for (double& v : out) {
      const long s = binary ? rd.byte() : rd.number();
      if (s > maxval) rd.fail("sample exceeds maxval");
      v = static_cast<double>(s) / static_cast<double>(maxval);
    }
  }
  return img;
}

Image read_netpbm(const std::filesystem::path& path) { return parse_netpbm(read_file(path), path.string()); }

std::string encode_netpbm(const Image& image) {
  if (image.channels() != 1 && image.channels() != 3) {
    throw IoError("Netpbm output needs 1 or 3 channels, got " + std::to_string(image.channels()));
  }
  std::string out = (image.channels() == 3 ? "P6\n" : "P5\n") + std::to_string(image.width()) + " " +
                    std::to_string(image.height()) + "\n255\n";
  out.reserve(out.size() + image.data().size());
  for (double v : image.data()) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

void write_netpbm(const std::filesystem::path& path, const Image& image) { write_file(path, encode_netpbm(image)); }

std::string encode_pbm(const BinaryMask& mask) {
  std::string out = "P4\n" + std::to_string(mask.width()) + " " + std::to_string(mask.height()) + "\n";
  for (int r = 0; r < mask.height(); ++r) {
    unsigned char acc = 0;
    int filled = 0;
    for (int c = 0; c < mask.width(); ++c) {
      acc = static_cast<unsigned char>((acc << 1) | (mask.at(r, c) ? 1 : 0));
      if (++filled == 8) {
        out.push_back(static_cast<char>(acc));
        acc = 0;
        filled = 0;
      }
    }
    if (filled > 0) out.push_back(static_cast<char>(acc << (8 - filled)));
  }
  return out;
}

void write_pbm(const std::filesystem::path& path, const BinaryMask& mask) { write_file(path, encode_pbm(mask)); }

std::string encode_dxt(const Image& tensor) {
  std::string out = "DXT1 " + std::to_string(tensor.height()) + " " + std::to_string(tensor.width()) + " " +
                    std::to_string(tensor.channels()) + "\n";
  const std::size_t header = out.size();
  out.resize(header + tensor.data().size() * sizeof(double));
  std::memcpy(out.data() + header, tensor.data().data(), tensor.data().size() * sizeof(double));
  return out;
}

Image decode_dxt(const std::string& bytes, const std::string& name) {
  const std::size_t eol = bytes.find('\n');
  if (bytes.rfind("DXT1 ", 0) != 0 || eol == std::string::npos) throw IoError(name + ": not a DXT1 container");
  std::istringstream header(bytes.substr(5, eol - 5));
  long h = 0, w = 0, c = 0;
  std::string rest;
  if (!(header >> h >> w >> c) || (header >> rest) || h < 1 || w < 1 || c < 1) {
    throw IoError(name + ": malformed DXT1 header");
  }
  const auto count = static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c);
  if (bytes.size() - eol - 1 != count * sizeof(double)) {
    throw IoError(name + ": expected " + std::to_string(count * sizeof(double)) + " payload bytes, found " +
                  std::to_string(bytes.size() - eol - 1));
  }
  std::vector<double> data(count);
  std::memcpy(data.data(), bytes.data() + eol + 1, count * sizeof(double));
  return Image(ImageShape{static_cast<int>(h), static_cast<int>(w), static_cast<int>(c)}, std::move(data));
}

void write_dxt(const std::filesystem::path& path, const Image& tensor) { write_file(path, encode_dxt(tensor)); }

void write_dxt(const std::filesystem::path& path, const Grid& grid) {
  const auto d = grid.data();
  write_dxt(path, Image(ImageShape{grid.height(), grid.width(), 1}, std::vector<double>(d.begin(), d.end())));
}

Image read_dxt(const std::filesystem::path& path) { return decode_dxt(read_file(path), path.string()); }

Grid read_dxt_grid(const std::filesystem::path& path) {
  const Image t = read_dxt(path);
  if (t.channels() != 1) throw IoError(path.string() + ": expected a single-channel grid");
  const auto d = t.data();
  return Grid(t.height(), t.width(), std::vector<double>(d.begin(), d.end()));
}

Image load_input(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("input not found: " + path.string());
  if (path.extension() == ".dxt") return read_dxt(path);
  return read_netpbm(path);
}

std::array<double, 3> colormap(double t) {
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0) * (kColormap.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(t), kColormap.size() - 2);
  const double f = t - static_cast<double>(i);
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) out[k] = (1 - f) * kColormap[i][k] + f * kColormap[i + 1][k];
  return out;
}

Image heatmap_overlay(const Image& x, const Grid& saliency, double alpha) {
  if (saliency.height() != x.height() || saliency.width() != x.width()) {
    throw ConfigError("saliency does not match the image");
  }
  const Grid s = normalized(saliency);
  Image out(ImageShape{x.height(), x.width(), 3});
  const int nc = x.channels();
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) {
    double gray = 0.0;
    for (int k = 0; k < nc; ++k) gray += x.data()[p * nc + k];
    gray = std::clamp(gray / nc, 0.0, 1.0);
    const auto color = colormap(s[p]);
    for (int k = 0; k < 3; ++k) out.data()[p * 3 + k] = (1 - alpha) * gray + alpha * color[k];
  }
  return out;
}

Image segment_image(const seg::SegmentMap& map) {
  Image out(ImageShape{map.height(), map.width(), 1});
  const double span = std::max(1, map.count());
  for (std::size_t p = 0; p < out.data().size(); ++p) {
    out.data()[p] = std::round(1.0 + 254.0 * (map[p] - 1) / std::max(1.0, span - 1)) / 255.0;
  }
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace dax::io
