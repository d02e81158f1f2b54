#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "vps/panoptic.hpp"
#include "vps/flow.hpp"

namespace vps::testing {

// Registry with stuff classes 0..stuff-1 and things 1000.. of class `stuff`.
inline SegmentRegistry small_registry(int stuff, int things) {
  std::vector<RegistryEntry> e;
  for (int c = 0; c < stuff; ++c) e.push_back({c, c, false});
  for (int k = 0; k < things; ++k) e.push_back({1000 + k, stuff, true});
  return SegmentRegistry(std::move(e));
}

// Panoptic map from a row-major grid of track ids, classes looked up in `reg`.
inline PanopticMap map_from_ids(std::size_t h, std::size_t w, const std::vector<std::int32_t>& ids,
                                const SegmentRegistry& reg) {
  PanopticMap m(h, w);
  for (std::size_t p = 0; p < h * w; ++p) {
    m.instance[p] = ids[p];
    m.semantic[p] = reg.find(ids[p])->class_id;
  }
  return m;
}

inline FlowField constant_flow(std::size_t h, std::size_t w, double dx, double dy) {
  FlowField f(h, w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      f.data(y, x, 0) = dx;
      f.data(y, x, 1) = dy;
    }
  return f;
}

inline RealTensor random_tensor(const std::vector<std::size_t>& shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  RealTensor t(shape);
  for (double& v : t.values()) v = n(rng);
  return t;
}

inline Mask mask_from(std::size_t h, std::size_t w, const std::vector<int>& bits) {
  Mask m({h, w});
  for (std::size_t p = 0; p < h * w; ++p) m[p] = static_cast<std::uint8_t>(bits[p]);
  return m;
}

}  // namespace vps::testing
