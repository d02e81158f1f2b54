#pragma once

#include <cmath>
#include <cstddef>

#include "vps/tensor.hpp"

namespace vps {

// H x W x 3 RGB image with values in [0,1].
using Image = RealTensor;

// H x W x 2 displacement field (dx, dy) in pixels, mapping coordinates of
// one frame into a later frame.
struct FlowField {
  RealTensor data;

  FlowField() = default;
  FlowField(std::size_t height, std::size_t width) : data({height, width, 2}) {}

  std::size_t height() const { return data.dim(0); }
  std::size_t width() const { return data.dim(1); }
  double dx(std::size_t y, std::size_t x) const { return data(y, x, 0); }
  double dy(std::size_t y, std::size_t x) const { return data(y, x, 1); }

  bool operator==(const FlowField&) const = default;
};

// Four-neighbour bilinear footprint of a real-valued sample position.
// Positions outside [0, w-1] x [0, h-1] are invalid.
struct BilinearTap {
  bool valid = false;
  std::size_t y0 = 0, x0 = 0, y1 = 0, x1 = 0;
  double w00 = 0, w01 = 0, w10 = 0, w11 = 0;

  template <class Fn>
  void for_each(Fn&& fn) const {
    fn(y0, x0, w00);
    fn(y0, x1, w01);
    fn(y1, x0, w10);
    fn(y1, x1, w11);
  }
};

inline BilinearTap bilinear_tap(double y, double x, std::size_t h, std::size_t w) {
  BilinearTap t;
  if (!(x >= 0.0 && y >= 0.0 && x <= static_cast<double>(w - 1) &&
        y <= static_cast<double>(h - 1))) {
    return t;
  }
  t.valid = true;
  t.x0 = static_cast<std::size_t>(std::floor(x));
  t.y0 = static_cast<std::size_t>(std::floor(y));
  t.x1 = t.x0 + 1 < w ? t.x0 + 1 : t.x0;
  t.y1 = t.y0 + 1 < h ? t.y0 + 1 : t.y0;
  const double fx = x - static_cast<double>(t.x0);
  const double fy = y - static_cast<double>(t.y0);
  t.w00 = (1 - fy) * (1 - fx);
  t.w01 = (1 - fy) * fx;
  t.w10 = fy * (1 - fx);
  t.w11 = fy * fx;
  return t;
}

}  // namespace vps
