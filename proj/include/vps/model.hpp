#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vps/flow.hpp"
#include "vps/panoptic.hpp"

namespace vps {

// Per-pixel segmenter: RGB + normalized (x, y) input, 3x3 conv -> ReLU ->
// 3x3 conv producing D features, and a 1x1 head producing one logit per
// registry entry. All parameters live in one flat vector.
class ToyModel {
 public:
  static constexpr std::size_t kInputChannels = 5;

  ToyModel() = default;
  ToyModel(std::size_t feature_dim, SegmentRegistry binding);

  // Uniform [-0.1, 0.1] initialization from `seed`.
  static ToyModel initialize(std::size_t feature_dim, SegmentRegistry binding, std::uint64_t seed);

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t num_segments() const { return binding_.size(); }
  const SegmentRegistry& binding() const { return binding_; }

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  struct Activations {
    RealTensor input;       // 5 x H x W
    RealTensor pre_hidden;  // D x H x W, before the rectifier
    RealTensor hidden;      // D x H x W
    FeatureMap features;    // D x H x W
    LogitVolume logits;     // N x H x W
  };

  Activations forward(const Image& image, int frame_index = 0) const;

  // Parameter gradient given upstream gradients w.r.t. features and logits.
  std::vector<double> backward(const Activations& act, const RealTensor& grad_features,
                               const RealTensor& grad_logits) const;

 private:
  struct Layout {
    std::size_t w1, b1, w2, b2, wh, bh, total;
  };
  Layout layout() const;

  std::size_t feature_dim_ = 0;
  SegmentRegistry binding_;
  std::vector<double> params_;
};

RealTensor encode_input(const Image& image);

}  // namespace vps
