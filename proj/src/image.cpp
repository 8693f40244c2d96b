#include "gsf/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gsf {

RasterImage::RasterImage(int w, int h, double fill)
    : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

BinaryMask::BinaryMask(int w, int h, std::uint8_t fill)
    : width(w), height(h), bits(static_cast<std::size_t>(w) * h, fill) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

namespace {

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
  std::streamoff data_offset = 0;
};

PnmHeader read_header(std::ifstream& in, const std::string& path) {
  PnmHeader h;
  auto next_token = [&]() {
    std::string tok;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        continue;
      }
      tok += c;
    }
    if (tok.empty()) throw std::runtime_error("'" + path + "': truncated PNM header at byte offset " + std::to_string(in.tellg()));
    return tok;
  };
  h.magic = next_token();
  try {
    h.width = std::stoi(next_token());
    h.height = std::stoi(next_token());
    h.maxval = std::stoi(next_token());
  } catch (const std::logic_error&) {
    throw std::runtime_error("'" + path + "': malformed PNM header");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval != 255)
    throw std::runtime_error("'" + path + "': unsupported PNM geometry or maxval (need maxval 255)");
  h.data_offset = in.tellg();
  return h;
}

std::vector<unsigned char> read_payload(std::ifstream& in, const PnmHeader& h, std::size_t n, const std::string& path) {
  std::vector<unsigned char> buf(n);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw std::runtime_error("'" + path + "': truncated pixel data at byte offset " +
                             std::to_string(h.data_offset + in.gcount()) + ", expected " + std::to_string(n) +
                             " bytes");
  return buf;
}

}  // namespace

void write_ppm(const std::string& path, const RasterImage& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "P6\n" << image.width << " " << image.height << "\n255\n";
  std::vector<unsigned char> buf(image.rgb.size());
  std::transform(image.rgb.begin(), image.rgb.end(), buf.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

RasterImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  const PnmHeader h = read_header(in, path);
  if (h.magic != "P6") throw std::runtime_error("'" + path + "': expected P6, got " + h.magic);
  RasterImage img(h.width, h.height);
  const auto buf = read_payload(in, h, img.rgb.size(), path);
  for (std::size_t i = 0; i < buf.size(); ++i) img.rgb[i] = buf[i] / 255.0;
  return img;
}

void write_pgm(const std::string& path, const BinaryMask& mask) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<unsigned char> buf(mask.bits.size());
  std::transform(mask.bits.begin(), mask.bits.end(), buf.begin(), [](std::uint8_t b) { return b ? 255 : 0; });
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

BinaryMask read_pgm_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  const PnmHeader h = read_header(in, path);
  if (h.magic != "P5") throw std::runtime_error("'" + path + "': expected P5, got " + h.magic);
  BinaryMask m(h.width, h.height);
  const auto buf = read_payload(in, h, m.bits.size(), path);
  for (std::size_t i = 0; i < buf.size(); ++i) m.bits[i] = buf[i] >= 128 ? 1 : 0;
  return m;
}

void write_pgm_field(const std::string& path, int width, int height, const std::vector<double>& values) {
  double lo = INFINITY, hi = -INFINITY;
  for (double v : values)
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  std::vector<unsigned char> buf(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) continue;
    const double t = hi > lo ? (values[i] - lo) / (hi - lo) : 0.0;
    buf[i] = static_cast<unsigned char>(std::lround(255.0 - 254.0 * t));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

RasterImage quantize8(const RasterImage& image) {
  RasterImage out = image;
  for (auto& v : out.rgb) v = to_byte(v) / 255.0;
  return out;
}

}  // namespace gsf
