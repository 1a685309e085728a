#include "ptdet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace ptdet {

namespace {

// Next header integer, skipping whitespace and '#' comments.
int read_header_int(std::istream& in, const std::string& path) {
  int c = in.peek();
  while (in && (std::isspace(c) || c == '#')) {
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
    } else {
      in.get();
    }
    c = in.peek();
  }
  int v = 0;
  if (!(in >> v) || v < 0) throw std::runtime_error(path + ": malformed PNM header");
  return v;
}

std::uint16_t quantize(double v, int maxval) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint16_t>(std::lround(c * maxval));
}

}  // namespace

Grid read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char magic[2];
  if (!in.read(magic, 2) || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6')) {
    throw std::runtime_error(path + ": only binary P5/P6 images are supported");
  }
  const int channels = magic[1] == '6' ? 3 : 1;
  const int width = read_header_int(in, path);
  const int height = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw std::runtime_error(path + ": invalid PNM dimensions or maxval");
  }
  in.get();  // single whitespace before raster
  const int bytes = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raster(static_cast<std::size_t>(width) * height * channels * bytes);
  if (!in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()))) {
    throw std::runtime_error(path + ": truncated raster");
  }
  Grid out(height, width, channels);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const unsigned v = bytes == 2 ? (unsigned{raster[2 * i]} << 8) | raster[2 * i + 1] : raster[i];
    out.data()[i] = static_cast<double>(v) / maxval;
  }
  return out;
}

void write_ppm(const std::string& path, const Grid& rgb) {
  if (rgb.channels() != 3) throw ShapeError("write_ppm: expected 3 channels, got " + rgb.shape_string());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P6\n" << rgb.width() << " " << rgb.height() << "\n255\n";
  std::vector<unsigned char> raster(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) raster[i] = static_cast<unsigned char>(quantize(rgb.data()[i], 255));
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_pgm(const std::string& path, const Grid& gray, int maxval) {
  if (gray.channels() != 1) throw ShapeError("write_pgm: expected 1 channel, got " + gray.shape_string());
  if (maxval != 255 && maxval != 65535) throw std::invalid_argument("write_pgm: maxval must be 255 or 65535");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "P5\n" << gray.width() << " " << gray.height() << "\n" << maxval << "\n";
  std::vector<unsigned char> raster;
  raster.reserve(gray.size() * 2);
  for (double v : gray.values()) {
    const auto q = quantize(v, maxval);
    if (maxval > 255) raster.push_back(static_cast<unsigned char>(q >> 8));
    raster.push_back(static_cast<unsigned char>(q & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace ptdet
