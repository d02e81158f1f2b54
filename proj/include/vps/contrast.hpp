#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vps/panoptic.hpp"

namespace vps {

enum class GraphView { Instance, Semantic };

// Which embeddings enter the denominator of each anchor term.
//   SimClr:    every embedding of both frames except the anchor.
//   StrictEq2: only the embeddings of the other frame (positive included).
enum class ContrastMode { SimClr, StrictEq2 };

inline constexpr double kDefaultTemperature = 0.5;

struct ContrastBatch {
  std::vector<SegmentEmbedding> embeddings_t;
  std::vector<SegmentEmbedding> embeddings_t2;
  std::vector<std::pair<std::size_t, std::size_t>> pairing;
  double temperature = kDefaultTemperature;
  ContrastMode mode = ContrastMode::SimClr;

  // Throws ArgumentError / InsufficientBatchError when invariants fail.
  void validate() const;
};

enum class Frame { Current, Reference };

// Gradient ids used in contrastive LossResults: "t.<i>" and "t2.<i>".
std::string embedding_grad_id(Frame frame, std::size_t index);

// Builds one graph view from a frame pair. Node vectors are computed with
// embed_segment. Nodes present only in one frame stay in the batch as
// negatives.
ContrastBatch build_contrast_batch(const PanopticMap& panoptic_t, const PanopticMap& panoptic_t2,
                                   const FeatureMap& features_t, const FeatureMap& features_t2,
                                   const SegmentRegistry& registry, GraphView view,
                                   double temperature = kDefaultTemperature,
                                   ContrastMode mode = ContrastMode::SimClr);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Single NT-Xent term for the anchor at (frame, index).
double pairwise_nt_xent(const ContrastBatch& batch, Frame frame, std::size_t index);

// Mean of both anchor directions over all positive pairs, with analytic
// gradients w.r.t. every embedding vector.
LossResult contrastive_loss(const ContrastBatch& batch);

struct SegmentLossOutput {
  LossResult semantic;
  LossResult instance;
  LossResult total;
  std::vector<std::string> diagnostics;
};

// Sum of the semantic and instance contrastive losses. A missing view is
// skipped with a diagnostic; both missing raises InsufficientBatchError.
SegmentLossOutput segment_level_loss(const std::optional<ContrastBatch>& semantic,
                                     const std::optional<ContrastBatch>& instance);

}  // namespace vps
