#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "behav/errors.hpp"

namespace behav {

// Row-major H x W grid.
template <typename T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, T fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw InvalidArgument("raster: negative dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int x, int y) { return data_[index(x, y)]; }
  const T& at(int x, int y) const { return data_[index(x, y)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool same_shape(const Raster& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using ProbRaster = Raster<double>;

inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0)) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur, replicate border.
inline ProbRaster gaussian_blur(const ProbRaster& in, double sigma) {
  if (!(sigma > 0) || in.empty()) return in;
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = in.width(), h = in.height();
  ProbRaster tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * in.at(std::clamp(x + i, 0, w - 1), y);
      tmp.at(x, y) = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp.at(x, std::clamp(y + i, 0, h - 1));
      out.at(x, y) = acc;
    }
  return out;
}

namespace detail {

inline void put_u32le(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline std::uint32_t get_u32le(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw InvalidArgument("raster: truncated input");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

}  // namespace detail

// Binary P5 PGM, maxval 255, value = round(255 * c).
inline void write_pgm(std::ostream& os, const ProbRaster& r) {
  os << "P5\n" << r.width() << ' ' << r.height() << "\n255\n";
  for (double v : r.values()) {
    const auto b = static_cast<unsigned char>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    os.put(static_cast<char>(b));
  }
}

// width, height as uint32 LE, then float32 LE values row-major.
inline void write_f32(std::ostream& os, const ProbRaster& r) {
  detail::put_u32le(os, static_cast<std::uint32_t>(r.width()));
  detail::put_u32le(os, static_cast<std::uint32_t>(r.height()));
  for (double v : r.values()) detail::put_u32le(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

inline ProbRaster read_f32(std::istream& is) {
  const auto w = detail::get_u32le(is);
  const auto h = detail::get_u32le(is);
  if (w > 1u << 15 || h > 1u << 15) throw InvalidArgument("raster: implausible dimensions");
  ProbRaster r(static_cast<int>(w), static_cast<int>(h));
  for (auto& v : r.values()) v = std::bit_cast<float>(detail::get_u32le(is));
  return r;
}

}  // namespace behav
