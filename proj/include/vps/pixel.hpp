#pragma once

#include <cstdint>
#include <vector>

#include "vps/flow.hpp"
#include "vps/panoptic.hpp"

namespace vps {

inline constexpr double kDefaultOcclusionAlpha = 50.0;

// H x W weights in (0,1]; 0 marks pixels whose warp fell outside the frame.
struct OcclusionMap {
  RealTensor data;
};

// 2 x H x W soft mask of one segment at both frames of a pair.
struct Tube {
  RealTensor data;
  std::int32_t track_id = 0;
};

// Binary ground-truth tube together with the logit channel it supervises.
struct GtTube {
  std::int32_t track_id = 0;
  std::size_t channel = 0;
  RealTensor data;
};

enum class Reduction { Sum, Mean };

struct WarpResult {
  RealTensor output;  // C x H x W
  Mask valid;         // H x W
};

// Backward sampling: output(p) = source(p + flow(p)), bilinear, channel-first.
WarpResult bilinear_warp(const RealTensor& source, const FlowField& flow);

// Adjoint of bilinear_warp: scatters grad_output back onto the source grid.
RealTensor bilinear_warp_backward(const RealTensor& grad_output, const FlowField& flow);

// exp(-alpha * |I_t - warp(I_t2)|_2) per pixel; zero where the warp (or the
// optional flow validity mask) is invalid.
OcclusionMap occlusion_map(const Image& frame_t, const Image& frame_t2, const FlowField& flow,
                           double alpha = kDefaultOcclusionAlpha,
                           const Mask* flow_valid = nullptr);

// Block-average the flow and divide displacements by `factor`.
FlowField downsample_flow(const FlowField& flow, int factor);
OcclusionMap downsample_occlusion(const OcclusionMap& occ, int factor);

// Additive Gaussian perturbation of a flow field, for robustness studies.
FlowField perturb_flow(const FlowField& flow, double stddev, std::uint64_t seed);

// Sum (or mean over valid pixels) of O(p) * |s_t(p) - warp(s_t2)(p)|_2.
// Gradient ids: "logits_t", "logits_t2".
LossResult warp_loss(const LogitVolume& logits_t, const LogitVolume& logits_t2,
                     const FlowField& flow_ds, const OcclusionMap& occ_ds,
                     Reduction reduction = Reduction::Mean);

Tube build_tube(const SoftMaskVolume& soft_t, const SoftMaskVolume& soft_t2, std::size_t channel,
                std::int32_t track_id = 0);

// Ground-truth tubes of every segment present in both frames, ordered by
// ascending track id.
std::vector<GtTube> ground_truth_tubes(const PanopticMap& panoptic_t,
                                       const PanopticMap& panoptic_t2,
                                       const SegmentRegistry& registry);

// Mean of (1 - dice) over the tubes. Gradient ids: "logits_t", "logits_t2".
LossResult tube_loss(const LogitVolume& logits_t, const LogitVolume& logits_t2,
                     const std::vector<GtTube>& gt_tubes);

struct PixelLossOptions {
  bool warp = true;
  bool tube = true;
  Reduction reduction = Reduction::Mean;
};

struct PixelLossOutput {
  LossResult warp;
  LossResult tube;
  LossResult total;
};

PixelLossOutput pixel_level_loss(const LogitVolume& logits_t, const LogitVolume& logits_t2,
                                 const FlowField& flow_ds, const OcclusionMap& occ_ds,
                                 const std::vector<GtTube>& gt_tubes,
                                 const PixelLossOptions& options = {});

}  // namespace vps
