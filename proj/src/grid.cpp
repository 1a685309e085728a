#include "ptdet/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace ptdet {

Grid::Grid(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0 || channels < 0) {
    throw ShapeError("grid dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width) + "x" + std::to_string(channels));
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Grid::Grid(int height, int width, int channels, std::vector<double> values)
    : Grid(height, width, channels) {
  if (values.size() != data_.size()) {
    throw ShapeError("grid " + shape_string() + " needs " + std::to_string(data_.size()) +
                     " values, got " + std::to_string(values.size()));
  }
  data_.assign(values.begin(), values.end());
}

std::string Grid::shape_string() const {
  std::ostringstream s;
  s << height_ << "x" << width_ << "x" << channels_;
  return s.str();
}

void Grid::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double Grid::sum() const {
  double s = 0.0;
  for (double v : data_) s += v;
  return s;
}

double Grid::max() const {
  return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

double Grid::min() const {
  return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

bool Grid::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Grid Grid::channel(int c) const {
  if (c < 0 || c >= channels_) throw ShapeError("channel index out of range");
  Grid out(height_, width_, 1);
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x) out(y, x) = (*this)(y, x, c);
  return out;
}

void require_same_shape(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

namespace le {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("unexpected end of stream");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("unexpected end of stream");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace le

void write_hm01(std::ostream& out, const Grid& g) {
  out.write("HM01", 4);
  le::put_u32(out, static_cast<std::uint32_t>(g.height()));
  le::put_u32(out, static_cast<std::uint32_t>(g.width()));
  le::put_u32(out, static_cast<std::uint32_t>(g.channels()));
  for (double v : g.values()) le::put_f64(out, v);
}

Grid read_hm01(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "HM01") {
    throw std::runtime_error("not an HM01 grid (bad magic)");
  }
  const auto h = le::get_u32(in);
  const auto w = le::get_u32(in);
  const auto c = le::get_u32(in);
  constexpr std::uint32_t kMaxDim = 1u << 16;
  if (h == 0 || w == 0 || h > kMaxDim || w > kMaxDim || c > kMaxDim) {
    throw std::runtime_error("HM01 header has invalid dimensions");
  }
  std::vector<double> values(static_cast<std::size_t>(h) * w * c);
  for (auto& v : values) v = le::get_f64(in);
  return Grid(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c), std::move(values));
}

void save_hm01(const std::string& path, const Grid& g) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_hm01(out, g);
  if (!out) throw std::runtime_error("write failed: " + path);
}

Grid load_hm01(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_hm01(in);
}

}  // namespace ptdet
