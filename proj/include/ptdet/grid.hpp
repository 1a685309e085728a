#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <new>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ptdet {

/// Raised when grid shapes do not satisfy an operation's contract.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 64-byte aligned storage; vectorised reductions then round the same way on every buffer.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) { ::operator delete(p, alignment); }

  template <typename U>
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) {
    return true;
  }
};

/**
 * Dense H x W x C grid of doubles, row-major with the channel index fastest.
 *
 * Images, heatmaps, feature maps and convolution kernels all use this type.
 * A grid with zero channels is allowed so that channel concatenation has an
 * identity element.
 */
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels = 1, double fill = 0.0);
  Grid(int height, int width, int channels, std::vector<double> values);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  double operator()(int y, int x, int c = 0) const { return data_[index(y, x, c)]; }

  std::size_t index(int y, int x, int c = 0) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }
  std::string shape_string() const;

  void fill(double v);
  double sum() const;
  double max() const;
  double min() const;
  bool all_finite() const;

  /// Single channel `c` as an H x W x 1 grid.
  Grid channel(int c) const;

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double, AlignedAllocator<double>> data_;
};

void require_same_shape(const Grid& a, const Grid& b, const char* what);

// HM01 binary format: "HM01", u32 LE height, width, channels, then f64 LE values.
void write_hm01(std::ostream& out, const Grid& g);
Grid read_hm01(std::istream& in);
void save_hm01(const std::string& path, const Grid& g);
Grid load_hm01(const std::string& path);

namespace le {
void put_u32(std::ostream& out, std::uint32_t v);
void put_f64(std::ostream& out, double v);
std::uint32_t get_u32(std::istream& in);
double get_f64(std::istream& in);
}  // namespace le

}  // namespace ptdet
