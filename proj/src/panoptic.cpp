#include "vps/panoptic.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace vps {

SegmentRegistry::SegmentRegistry(std::vector<RegistryEntry> entries)
    : entries_(std::move(entries)) {
  std::set<std::int32_t> seen;
  for (const auto& e : entries_) {
    if (!seen.insert(e.track_id).second) {
      throw ConsistencyError("registry: duplicate track id " + std::to_string(e.track_id));
    }
    if (!e.is_thing && e.track_id != e.class_id) {
      throw ConsistencyError("registry: stuff entry track id " + std::to_string(e.track_id) +
                             " differs from its class id " + std::to_string(e.class_id));
    }
  }
  for (const auto& a : entries_) {
    for (const auto& b : entries_) {
      if (a.class_id == b.class_id && a.is_thing != b.is_thing) {
        throw ConsistencyError("registry: class " + std::to_string(a.class_id) +
                               " used for both things and stuff");
      }
    }
  }
}

std::optional<std::size_t> SegmentRegistry::channel_of(std::int32_t track_id) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].track_id == track_id) return i;
  }
  return std::nullopt;
}

const RegistryEntry* SegmentRegistry::find(std::int32_t track_id) const {
  for (const auto& e : entries_) {
    if (e.track_id == track_id) return &e;
  }
  return nullptr;
}

bool SegmentRegistry::is_thing_class(std::int32_t class_id) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const RegistryEntry& e) { return e.class_id == class_id && e.is_thing; });
}

const RealTensor& LossResult::gradient(const std::string& id) const {
  auto it = gradients.find(id);
  if (it == gradients.end()) throw ArgumentError("no gradient for input '" + id + "'");
  return it->second;
}

void accumulate(LossResult& into, const LossResult& other, double weight) {
  into.value += weight * other.value;
  for (const auto& [id, grad] : other.gradients) {
    auto it = into.gradients.find(id);
    if (it == into.gradients.end()) {
      RealTensor scaled = grad;
      for (double& g : scaled.values()) g *= weight;
      into.gradients.emplace(id, std::move(scaled));
    } else {
      require_same_shape(it->second, grad, "accumulate");
      for (std::size_t i = 0; i < grad.size(); ++i) it->second[i] += weight * grad[i];
    }
  }
}

SoftMaskVolume softmax_channels(const LogitVolume& logits) {
  const auto& in = logits.data;
  if (in.rank() != 3) throw ArgumentError("softmax_channels: expected N x H x W logits");
  const std::size_t n = in.dim(0), plane = in.dim(1) * in.dim(2);
  for (double v : in.values()) {
    if (!std::isfinite(v)) throw NumericError("softmax_channels: non-finite logit");
  }
  SoftMaskVolume out{RealTensor(in.shape())};
  for (std::size_t p = 0; p < plane; ++p) {
    double peak = in[p];
    for (std::size_t c = 1; c < n; ++c) peak = std::max(peak, in[c * plane + p]);
    double norm = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double e = std::exp(in[c * plane + p] - peak);
      out.data[c * plane + p] = e;
      norm += e;
    }
    for (std::size_t c = 0; c < n; ++c) out.data[c * plane + p] /= norm;
  }
  return out;
}

RealTensor softmax_channels_backward(const SoftMaskVolume& soft, const RealTensor& grad_soft) {
  require_same_shape(soft.data, grad_soft, "softmax_channels_backward");
  const std::size_t n = soft.channels(), plane = soft.height() * soft.width();
  RealTensor grad(soft.data.shape());
  for (std::size_t p = 0; p < plane; ++p) {
    double inner = 0.0;
    for (std::size_t c = 0; c < n; ++c) inner += grad_soft[c * plane + p] * soft.data[c * plane + p];
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t i = c * plane + p;
      grad[i] = soft.data[i] * (grad_soft[i] - inner);
    }
  }
  return grad;
}

namespace {

void require_mask_shape(const FeatureMap& features, const Mask& mask, const char* what) {
  if (mask.rank() != 2 || features.data.rank() != 3 || mask.dim(0) != features.height() ||
      mask.dim(1) != features.width()) {
    throw ArgumentError(std::string(what) + ": mask " + shape_string(mask.shape()) +
                        " does not match features " + shape_string(features.data.shape()));
  }
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

std::vector<double> mask_pool(const FeatureMap& features, const Mask& mask) {
  require_mask_shape(features, mask, "mask_pool");
  const std::size_t d = features.depth(), plane = features.height() * features.width();
  std::vector<double> sum(d, 0.0);
  std::size_t count = 0;
  for (std::size_t p = 0; p < plane; ++p) {
    if (!mask[p]) continue;
    ++count;
    for (std::size_t k = 0; k < d; ++k) sum[k] += features.data[k * plane + p];
  }
  if (count == 0) throw EmptySegmentError("mask_pool: empty mask");
  for (double& s : sum) s /= static_cast<double>(count);
  return sum;
}

std::vector<double> l2_normalize(std::span<const double> v) {
  const double n = norm2(v);
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw DegenerateEmbeddingError("l2_normalize: vector has zero or non-finite norm");
  }
  std::vector<double> out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

std::vector<double> l2_normalize_backward(std::span<const double> v,
                                          std::span<const double> grad_unit) {
  if (v.size() != grad_unit.size()) throw ArgumentError("l2_normalize_backward: size mismatch");
  const double n = norm2(v);
  if (!(n > 0.0)) throw DegenerateEmbeddingError("l2_normalize_backward: zero vector");
  double dot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) dot += v[i] * grad_unit[i];
  dot /= n;
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (grad_unit[i] - (v[i] / n) * dot) / n;
  return out;
}

namespace {

// Per-pixel unit features restricted to the mask: returns pooled mean and
// the number of pixels.
std::vector<double> pooled_unit_mean(const FeatureMap& features, const Mask& mask,
                                     std::size_t& count) {
  const std::size_t d = features.depth(), plane = features.height() * features.width();
  std::vector<double> sum(d, 0.0), pixel(d);
  count = 0;
  for (std::size_t p = 0; p < plane; ++p) {
    if (!mask[p]) continue;
    ++count;
    for (std::size_t k = 0; k < d; ++k) pixel[k] = features.data[k * plane + p];
    const double n = norm2(pixel);
    if (!(n > 0.0)) throw DegenerateEmbeddingError("embed_segment: zero feature vector in mask");
    for (std::size_t k = 0; k < d; ++k) sum[k] += pixel[k] / n;
  }
  if (count == 0) throw EmptySegmentError("embed_segment: empty mask");
  for (double& s : sum) s /= static_cast<double>(count);
  return sum;
}

}  // namespace

SegmentEmbedding embed_segment(const FeatureMap& features, const Mask& mask,
                               std::int32_t track_id, int frame_index) {
  require_mask_shape(features, mask, "embed_segment");
  std::size_t count = 0;
  const auto pooled = pooled_unit_mean(features, mask, count);
  return SegmentEmbedding{l2_normalize(pooled), track_id, frame_index};
}

void embed_segment_backward(const FeatureMap& features, const Mask& mask,
                            std::span<const double> grad_embedding, RealTensor& grad_features) {
  require_mask_shape(features, mask, "embed_segment_backward");
  require_same_shape(features.data, grad_features, "embed_segment_backward");
  std::size_t count = 0;
  const auto pooled = pooled_unit_mean(features, mask, count);
  auto grad_pooled = l2_normalize_backward(pooled, grad_embedding);
  for (double& g : grad_pooled) g /= static_cast<double>(count);

  const std::size_t d = features.depth(), plane = features.height() * features.width();
  std::vector<double> pixel(d);
  for (std::size_t p = 0; p < plane; ++p) {
    if (!mask[p]) continue;
    for (std::size_t k = 0; k < d; ++k) pixel[k] = features.data[k * plane + p];
    const auto g = l2_normalize_backward(pixel, grad_pooled);
    for (std::size_t k = 0; k < d; ++k) grad_features[k * plane + p] += g[k];
  }
}

double dice(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ArgumentError("dice: size mismatch");
  double pq = 0.0, pp = 0.0, qq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || p[i] > 1.0 || q[i] < 0.0 || q[i] > 1.0) {
      throw ArgumentError("dice: entries must lie in [0,1]");
    }
    pq += p[i] * q[i];
    pp += p[i] * p[i];
    qq += q[i] * q[i];
  }
  if (pp + qq == 0.0) throw UndefinedDiceError("dice: both inputs are all-zero");
  return 2.0 * pq / (pp + qq);
}

double binary_iou(const Mask& a, const Mask& b, EmptyUnion policy) {
  require_same_shape(a, b, "binary_iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += (x && y);
    uni += (x || y);
  }
  if (uni == 0) {
    if (policy == EmptyUnion::Error) throw ArgumentError("binary_iou: both masks empty");
    return 0.0;
  }
  return static_cast<double>(inter) / static_cast<double>(uni);
}

void check_consistency(const PanopticMap& panoptic, const SegmentRegistry& registry) {
  require_same_shape(panoptic.semantic, panoptic.instance, "panoptic map");
  std::unordered_map<std::int32_t, std::int32_t> seen;
  for (std::size_t i = 0; i < panoptic.instance.size(); ++i) {
    const auto id = panoptic.instance[i];
    const auto cls = panoptic.semantic[i];
    auto [it, inserted] = seen.emplace(id, cls);
    if (!inserted) {
      if (it->second != cls) {
        throw ConsistencyError("instance " + std::to_string(id) + " carries two class ids");
      }
      continue;
    }
    const auto* entry = registry.find(id);
    if (!entry) throw ConsistencyError("instance " + std::to_string(id) + " not in registry");
    if (entry->class_id != cls) {
      throw ConsistencyError("instance " + std::to_string(id) + " has class " +
                             std::to_string(cls) + ", registry says " +
                             std::to_string(entry->class_id));
    }
  }
}

std::vector<SegmentMask> extract_masks(const PanopticMap& panoptic,
                                       const SegmentRegistry& registry) {
  check_consistency(panoptic, registry);
  std::vector<SegmentMask> out;
  for (const auto& entry : registry.entries()) {
    Mask m = track_mask(panoptic, entry.track_id);
    if (count_set(m) > 0) out.push_back({entry.track_id, std::move(m)});
  }
  return out;
}

Mask class_mask(const PanopticMap& panoptic, std::int32_t class_id) {
  Mask m(panoptic.semantic.shape());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = panoptic.semantic[i] == class_id;
  return m;
}

Mask track_mask(const PanopticMap& panoptic, std::int32_t track_id) {
  Mask m(panoptic.instance.shape());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = panoptic.instance[i] == track_id;
  return m;
}

std::size_t count_set(const Mask& mask) {
  std::size_t n = 0;
  for (auto v : mask.values()) n += v != 0;
  return n;
}

}  // namespace vps
