#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "vps/flow.hpp"
#include "vps/panoptic.hpp"
#include "vps/scene.hpp"

namespace vps {

// Scores in [0,1]. A component is empty when its class subset never
// occurs (e.g. the thing score of a scene without things).
struct ScoreTriple {
  std::optional<double> vpq;
  std::optional<double> thing;
  std::optional<double> stuff;

  bool operator==(const ScoreTriple&) const = default;
};

struct VpqReport {
  std::vector<int> window_set;
  std::map<int, ScoreTriple> per_window;
  ScoreTriple average;

  bool operator==(const VpqReport&) const = default;
};

struct PredictionSequence {
  std::vector<PanopticMap> panoptic;
  SegmentRegistry registry;
};

struct VpqOptions {
  // Evaluate only every `stride`-th frame, emulating sparse annotation.
  int stride = 1;
  // Ground-truth class whose pixels are ignored everywhere.
  std::optional<std::int32_t> void_class;
};

inline const std::vector<int> kDefaultWindows{0, 5, 10, 15};

PredictionSequence as_prediction(const VideoSample& sample);

// Greedy tube matching (IoU > 0.5, same class), PQ-style per-class score,
// averaged over classes per window and over windows.
ScoreTriple vpq_window(const PredictionSequence& pred, const PredictionSequence& gt, int k,
                       const VpqOptions& options = {});
ScoreTriple vpq_window(const PredictionSequence& pred, const VideoSample& gt, int k,
                       const VpqOptions& options = {});

VpqReport vpq_report(const PredictionSequence& pred, const PredictionSequence& gt,
                     const std::vector<int>& windows = kDefaultWindows,
                     const VpqOptions& options = {});
VpqReport vpq_report(const PredictionSequence& pred, const VideoSample& gt,
                     const std::vector<int>& windows = kDefaultWindows,
                     const VpqOptions& options = {});

// Exhaustive-matching reference for vpq_window. Limited to at most
// kOracleMaxTubes tubes per class and side in every window.
inline constexpr std::size_t kOracleMaxTubes = 6;
ScoreTriple vpq_oracle(const PredictionSequence& pred, const PredictionSequence& gt, int k,
                       const VpqOptions& options = {});

// Temporal consistency (implemented variant): mean dice between each
// predicted segment mask at t and the flow-warped mask at t+1, over valid
// pixels.
double tc_metric(const PredictionSequence& pred, const std::vector<FlowField>& gt_flows);

}  // namespace vps
