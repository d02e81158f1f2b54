#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vps/tensor.hpp"

namespace vps {

struct RegistryEntry {
  std::int32_t track_id = 0;
  std::int32_t class_id = 0;
  bool is_thing = false;

  bool operator==(const RegistryEntry&) const = default;
};

// Ordered list of every segment a clip can contain. The order fixes the
// logit channel of each segment.
class SegmentRegistry {
 public:
  SegmentRegistry() = default;
  explicit SegmentRegistry(std::vector<RegistryEntry> entries);

  const std::vector<RegistryEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::optional<std::size_t> channel_of(std::int32_t track_id) const;
  const RegistryEntry* find(std::int32_t track_id) const;
  bool is_thing_class(std::int32_t class_id) const;

  bool operator==(const SegmentRegistry&) const = default;

 private:
  std::vector<RegistryEntry> entries_;
};

struct PanopticMap {
  LabelTensor semantic;  // H x W class ids
  LabelTensor instance;  // H x W track ids

  PanopticMap() = default;
  PanopticMap(std::size_t height, std::size_t width)
      : semantic({height, width}), instance({height, width}) {}

  std::size_t height() const { return semantic.dim(0); }
  std::size_t width() const { return semantic.dim(1); }

  bool operator==(const PanopticMap&) const = default;
};

// N x H x W, channel c bound to registry entry c.
struct LogitVolume {
  RealTensor data;
  int frame_index = 0;

  std::size_t channels() const { return data.dim(0); }
  std::size_t height() const { return data.dim(1); }
  std::size_t width() const { return data.dim(2); }
};

struct SoftMaskVolume {
  RealTensor data;

  std::size_t channels() const { return data.dim(0); }
  std::size_t height() const { return data.dim(1); }
  std::size_t width() const { return data.dim(2); }
};

// D x H x W per-pixel features.
struct FeatureMap {
  RealTensor data;

  std::size_t depth() const { return data.dim(0); }
  std::size_t height() const { return data.dim(1); }
  std::size_t width() const { return data.dim(2); }
};

struct SegmentEmbedding {
  std::vector<double> vector;
  std::int32_t track_id = 0;
  int frame_index = 0;
};

struct SegmentMask {
  std::int32_t track_id = 0;
  Mask mask;
};

// Scalar loss plus gradients keyed by the name of the input they belong to.
struct LossResult {
  double value = 0.0;
  std::map<std::string, RealTensor> gradients;

  const RealTensor& gradient(const std::string& id) const;
};

// Adds `other` into `into`: values summed, gradients with equal ids summed.
void accumulate(LossResult& into, const LossResult& other, double weight = 1.0);

SoftMaskVolume softmax_channels(const LogitVolume& logits);

// Backward of softmax_channels: maps d(loss)/d(soft) to d(loss)/d(logits).
RealTensor softmax_channels_backward(const SoftMaskVolume& soft, const RealTensor& grad_soft);

// Mean feature vector over the set pixels of `mask`.
std::vector<double> mask_pool(const FeatureMap& features, const Mask& mask);

std::vector<double> l2_normalize(std::span<const double> v);

// Given v and d(loss)/d(v/|v|), returns d(loss)/d(v).
std::vector<double> l2_normalize_backward(std::span<const double> v,
                                          std::span<const double> grad_unit);

// Normalizes each pixel's feature vector, pools over the mask and normalizes
// the pooled vector again.
SegmentEmbedding embed_segment(const FeatureMap& features, const Mask& mask,
                               std::int32_t track_id, int frame_index);

// Adds d(loss)/d(features) for one embed_segment call into `grad_features`.
void embed_segment_backward(const FeatureMap& features, const Mask& mask,
                            std::span<const double> grad_embedding, RealTensor& grad_features);

double dice(std::span<const double> p, std::span<const double> q);

enum class EmptyUnion { Zero, Error };

double binary_iou(const Mask& a, const Mask& b, EmptyUnion policy = EmptyUnion::Zero);

// One mask per registry entry present in the frame, in registry order.
std::vector<SegmentMask> extract_masks(const PanopticMap& panoptic,
                                       const SegmentRegistry& registry);

// Throws ConsistencyError when an instance id is missing from the registry
// or maps to a different class than the registry records.
void check_consistency(const PanopticMap& panoptic, const SegmentRegistry& registry);

Mask class_mask(const PanopticMap& panoptic, std::int32_t class_id);
Mask track_mask(const PanopticMap& panoptic, std::int32_t track_id);
std::size_t count_set(const Mask& mask);

}  // namespace vps
