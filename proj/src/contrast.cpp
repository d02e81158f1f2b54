#include "vps/contrast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace vps {

void ContrastBatch::validate() const {
  if (!(temperature > 0.0)) throw ArgumentError("contrast batch: temperature must be > 0");
  std::set<std::size_t> used_t, used_t2;
  for (const auto& [i, j] : pairing) {
    if (i >= embeddings_t.size() || j >= embeddings_t2.size()) {
      throw ArgumentError("contrast batch: pairing index out of range");
    }
    if (!used_t.insert(i).second || !used_t2.insert(j).second) {
      throw ArgumentError("contrast batch: embedding used in more than one positive pair");
    }
  }
  if (pairing.size() < 2) {
    throw InsufficientBatchError("contrast batch: need at least 2 positive pairs, got " +
                                 std::to_string(pairing.size()));
  }
  std::size_t dim = 0;
  for (const auto* list : {&embeddings_t, &embeddings_t2}) {
    for (const auto& e : *list) {
      if (dim == 0) dim = e.vector.size();
      if (e.vector.size() != dim || dim == 0) {
        throw ArgumentError("contrast batch: embeddings differ in dimension");
      }
    }
  }
}

std::string embedding_grad_id(Frame frame, std::size_t index) {
  return (frame == Frame::Current ? "t." : "t2.") + std::to_string(index);
}

namespace {

struct Node {
  std::int32_t key;
  Mask mask_t, mask_t2;
};

}  // namespace

ContrastBatch build_contrast_batch(const PanopticMap& panoptic_t, const PanopticMap& panoptic_t2,
                                   const FeatureMap& features_t, const FeatureMap& features_t2,
                                   const SegmentRegistry& registry, GraphView view,
                                   double temperature, ContrastMode mode) {
  require_same_shape(panoptic_t.semantic, panoptic_t2.semantic, "build_contrast_batch");
  check_consistency(panoptic_t, registry);
  check_consistency(panoptic_t2, registry);

  std::vector<Node> nodes;
  if (view == GraphView::Instance) {
    for (const auto& e : registry.entries()) {
      nodes.push_back({e.track_id, track_mask(panoptic_t, e.track_id),
                       track_mask(panoptic_t2, e.track_id)});
    }
  } else {
    std::set<std::int32_t> classes;
    for (const auto& e : registry.entries()) classes.insert(e.class_id);
    for (auto c : classes) {
      nodes.push_back({c, class_mask(panoptic_t, c), class_mask(panoptic_t2, c)});
    }
  }

  ContrastBatch batch;
  batch.temperature = temperature;
  batch.mode = mode;
  const int frame_t = 0, frame_t2 = 1;
  for (const auto& node : nodes) {
    const bool in_t = count_set(node.mask_t) > 0;
    const bool in_t2 = count_set(node.mask_t2) > 0;
    if (in_t) batch.embeddings_t.push_back(embed_segment(features_t, node.mask_t, node.key, frame_t));
    if (in_t2) {
      batch.embeddings_t2.push_back(embed_segment(features_t2, node.mask_t2, node.key, frame_t2));
    }
    if (in_t && in_t2) {
      batch.pairing.emplace_back(batch.embeddings_t.size() - 1, batch.embeddings_t2.size() - 1);
    }
  }
  if (batch.pairing.size() < 2) {
    throw InsufficientBatchError(std::string("build_contrast_batch: ") +
                                 (view == GraphView::Instance ? "instance" : "semantic") +
                                 " view has " + std::to_string(batch.pairing.size()) +
                                 " traceable nodes, need 2");
  }
  return batch;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("cosine_similarity: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

namespace {

struct Ref {
  Frame frame;
  std::size_t index;
};

const SegmentEmbedding& at(const ContrastBatch& b, Ref r) {
  return r.frame == Frame::Current ? b.embeddings_t[r.index] : b.embeddings_t2[r.index];
}

std::vector<Ref> denominator_refs(const ContrastBatch& b, Ref anchor) {
  std::vector<Ref> refs;
  auto add_frame = [&](Frame f, std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (f == anchor.frame && k == anchor.index) continue;
      refs.push_back({f, k});
    }
  };
  const bool strict = b.mode == ContrastMode::StrictEq2;
  if (!strict || anchor.frame == Frame::Reference) add_frame(Frame::Current, b.embeddings_t.size());
  if (!strict || anchor.frame == Frame::Current) add_frame(Frame::Reference, b.embeddings_t2.size());
  return refs;
}

std::optional<Ref> positive_of(const ContrastBatch& b, Ref anchor) {
  for (const auto& [i, j] : b.pairing) {
    if (anchor.frame == Frame::Current && i == anchor.index) return Ref{Frame::Reference, j};
    if (anchor.frame == Frame::Reference && j == anchor.index) return Ref{Frame::Current, i};
  }
  return std::nullopt;
}

// Evaluates one anchor term and, when `grad` is given, adds scale * d/dz.
double anchor_term(const ContrastBatch& b, Ref anchor, Ref positive, double scale,
                   std::map<std::string, RealTensor>* grad) {
  const auto& a = at(b, anchor).vector;
  const auto refs = denominator_refs(b, anchor);
  std::vector<double> logits(refs.size());
  double peak = -std::numeric_limits<double>::infinity();
  double positive_logit = 0.0;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    logits[k] = cosine_similarity(a, at(b, refs[k]).vector) / b.temperature;
    peak = std::max(peak, logits[k]);
    if (refs[k].frame == positive.frame && refs[k].index == positive.index) {
      positive_logit = logits[k];
    }
  }
  // Summed in ascending order so the value does not depend on node order.
  std::vector<double> shifted(logits.size());
  for (std::size_t k = 0; k < logits.size(); ++k) shifted[k] = std::exp(logits[k] - peak);
  std::sort(shifted.begin(), shifted.end());
  double sum = 0.0;
  for (double e : shifted) sum += e;
  const double lse = peak + std::log(sum);
  const double term = lse - positive_logit;

  if (grad) {
    auto& ga = (*grad)[embedding_grad_id(anchor.frame, anchor.index)];
    for (std::size_t k = 0; k < refs.size(); ++k) {
      const double p = std::exp(logits[k] - lse);
      const bool is_pos = refs[k].frame == positive.frame && refs[k].index == positive.index;
      const double coeff = (p - (is_pos ? 1.0 : 0.0)) * scale / b.temperature;
      const auto& z = at(b, refs[k]).vector;
      auto& gz = (*grad)[embedding_grad_id(refs[k].frame, refs[k].index)];
      for (std::size_t d = 0; d < a.size(); ++d) {
        ga[d] += coeff * z[d];
        gz[d] += coeff * a[d];
      }
    }
  }
  return term;
}

}  // namespace

double pairwise_nt_xent(const ContrastBatch& batch, Frame frame, std::size_t index) {
  batch.validate();
  const Ref anchor{frame, index};
  const auto pos = positive_of(batch, anchor);
  if (!pos) {
    throw ArgumentError("pairwise_nt_xent: anchor " + embedding_grad_id(frame, index) +
                        " has no positive");
  }
  return anchor_term(batch, anchor, *pos, 1.0, nullptr);
}

LossResult contrastive_loss(const ContrastBatch& batch) {
  batch.validate();
  LossResult out;
  const std::size_t dim = batch.embeddings_t.front().vector.size();
  for (std::size_t i = 0; i < batch.embeddings_t.size(); ++i) {
    out.gradients.emplace(embedding_grad_id(Frame::Current, i), RealTensor({dim}));
  }
  for (std::size_t j = 0; j < batch.embeddings_t2.size(); ++j) {
    out.gradients.emplace(embedding_grad_id(Frame::Reference, j), RealTensor({dim}));
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(batch.pairing.size()));
  std::vector<double> terms;
  for (const auto& [i, j] : batch.pairing) {
    terms.push_back(anchor_term(batch, {Frame::Current, i}, {Frame::Reference, j}, scale, &out.gradients));
    terms.push_back(anchor_term(batch, {Frame::Reference, j}, {Frame::Current, i}, scale, &out.gradients));
  }
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  out.value = total * scale;
  return out;
}

SegmentLossOutput segment_level_loss(const std::optional<ContrastBatch>& semantic,
                                     const std::optional<ContrastBatch>& instance) {
  if (!semantic && !instance) {
    throw InsufficientBatchError("segment_level_loss: both graph views are insufficient");
  }
  SegmentLossOutput out;
  auto add = [&](const std::optional<ContrastBatch>& batch, LossResult& slot, const char* name) {
    if (!batch) {
      out.diagnostics.push_back(std::string(name) + " view skipped: fewer than 2 traceable nodes");
      return;
    }
    slot = contrastive_loss(*batch);
    out.total.value += slot.value;
    for (const auto& [id, g] : slot.gradients) out.total.gradients.emplace(std::string(name) + "/" + id, g);
  };
  add(semantic, out.semantic, "semantic");
  add(instance, out.instance, "instance");
  return out;
}

}  // namespace vps
