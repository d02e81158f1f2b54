#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vps/flow.hpp"
#include "vps/panoptic.hpp"

namespace vps {

// Thing track ids start here so they never collide with stuff ids, which
// equal their class ids.
inline constexpr std::int32_t kFirstThingTrack = 1000;

struct SceneConfig {
  int width = 64;
  int height = 64;
  int num_frames = 20;
  int num_things = 4;
  int num_stuff_classes = 2;
  int num_thing_classes = 2;
  double max_speed = 2.0;
  std::uint64_t seed = 0;
  double noise_std = 0.01;

  // Throws ConfigError naming the first violated bound.
  void validate() const;

  bool operator==(const SceneConfig&) const = default;
};

struct FrameVisibility {
  std::vector<std::int32_t> visible_tracks;
  // Flat indices (y * width + x) of pixels of this frame whose surface is
  // hidden or outside the frame at the next frame.
  std::vector<std::uint32_t> vanishing_pixels;

  bool operator==(const FrameVisibility&) const = default;
};

struct VideoSample {
  SceneConfig config;
  std::vector<Image> frames;
  std::vector<PanopticMap> panoptic;
  std::vector<FlowField> flows;  // flows[t]: frame t -> t+1
  SegmentRegistry registry;
  std::vector<FrameVisibility> visibility;

  std::size_t num_frames() const { return frames.size(); }

  bool operator==(const VideoSample&) const = default;
};

VideoSample generate_scene(const SceneConfig& config);

struct ComposedFlow {
  FlowField flow;
  Mask valid;
};

// Displacement from frame `from` to frame `to` obtained by chaining the
// one-step flows with bilinear sampling.
ComposedFlow compose_flow(std::span<const FlowField> flows, int from, int to);

}  // namespace vps
