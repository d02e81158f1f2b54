#include "vps/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <string>

namespace vps {

void SceneConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("scene config: " + msg); };
  if (width < 16) fail("width must be >= 16 (got " + std::to_string(width) + ")");
  if (height < 16) fail("height must be >= 16 (got " + std::to_string(height) + ")");
  if (num_frames < 2) fail("num_frames must be >= 2 (got " + std::to_string(num_frames) + ")");
  if (num_things < 0) fail("num_things must be >= 0");
  if (num_thing_classes < 1) fail("num_thing_classes must be >= 1");
  if (num_stuff_classes < 1) fail("num_stuff_classes must be >= 1");
  if (num_stuff_classes + num_thing_classes >= kFirstThingTrack) {
    fail("num_stuff_classes + num_thing_classes must be < " + std::to_string(kFirstThingTrack));
  }
  if (!(max_speed >= 0.0) || !std::isfinite(max_speed)) fail("max_speed must be >= 0");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) fail("noise_std must be >= 0");
}

namespace {

using Rgb = std::array<double, 3>;

constexpr std::array<Rgb, 6> kStuffPalette{{{0.35, 0.55, 0.85},
                                            {0.45, 0.42, 0.38},
                                            {0.30, 0.60, 0.30},
                                            {0.75, 0.70, 0.55},
                                            {0.55, 0.35, 0.55},
                                            {0.25, 0.30, 0.35}}};

constexpr std::array<Rgb, 8> kThingPalette{{{0.95, 0.15, 0.10},
                                            {0.95, 0.85, 0.10},
                                            {0.10, 0.90, 0.85},
                                            {0.95, 0.45, 0.90},
                                            {0.55, 0.95, 0.20},
                                            {0.20, 0.25, 0.95},
                                            {1.00, 0.60, 0.15},
                                            {0.70, 0.70, 0.70}}};

struct StuffBoundary {
  double offset, amplitude, frequency, phase;
};

struct Thing {
  std::int32_t track_id;
  std::int32_t class_id;
  bool ellipse;
  double cx, cy, rx, ry;
  int vx, vy;
  Rgb color;

  // Normalized squared radius of (x, y) at frame t; inside when <= 1.
  double radius2(double x, double y, int t) const {
    const double u = (x - (cx + t * vx)) / rx;
    const double v = (y - (cy + t * vy)) / ry;
    return ellipse ? u * u + v * v : std::max(u * u, v * v);
  }
};

std::vector<std::pair<int, int>> velocity_choices(double max_speed) {
  std::vector<std::pair<int, int>> out;
  const int r = static_cast<int>(std::floor(max_speed));
  for (int vy = -r; vy <= r; ++vy) {
    for (int vx = -r; vx <= r; ++vx) {
      if ((vx != 0 || vy != 0) && vx * vx + vy * vy <= max_speed * max_speed) {
        out.emplace_back(vx, vy);
      }
    }
  }
  if (out.empty()) out.emplace_back(0, 0);
  return out;
}

}  // namespace

VideoSample generate_scene(const SceneConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  const int w = config.width, h = config.height, s = config.num_stuff_classes;

  std::vector<RegistryEntry> entries;
  for (int c = 0; c < s; ++c) entries.push_back({c, c, false});

  std::vector<StuffBoundary> bounds;
  for (int j = 1; j < s; ++j) {
    const double spacing = static_cast<double>(h) / s;
    bounds.push_back({spacing * j, uniform(0.0, spacing / 3.0), uniform(0.5, 2.0),
                      uniform(0.0, 2.0 * std::numbers::pi)});
  }
  std::vector<std::array<double, 3>> textures;  // per stuff class: kx, ky, phase
  for (int c = 0; c < s; ++c) {
    textures.push_back({uniform(0.2, 0.7), uniform(0.2, 0.7), uniform(0.0, 2.0 * std::numbers::pi)});
  }

  const auto velocities = velocity_choices(config.max_speed);
  std::vector<Thing> things;
  for (int k = 0; k < config.num_things; ++k) {
    Thing t;
    t.track_id = kFirstThingTrack + k;
    t.class_id = s + (k % config.num_thing_classes);
    t.ellipse = unit(rng) < 0.5;
    t.rx = uniform(w / 12.0, w / 6.0);
    t.ry = uniform(h / 12.0, h / 6.0);
    t.cx = uniform(t.rx, w - 1 - t.rx);
    t.cy = uniform(t.ry, h - 1 - t.ry);
    const auto [vx, vy] = velocities[static_cast<std::size_t>(unit(rng) * velocities.size()) %
                                     velocities.size()];
    t.vx = vx;
    t.vy = vy;
    const Rgb& base = kThingPalette[static_cast<std::size_t>(k) % kThingPalette.size()];
    for (int ch = 0; ch < 3; ++ch) t.color[ch] = std::clamp(base[ch] + uniform(-0.05, 0.05), 0.0, 1.0);
    things.push_back(t);
    entries.push_back({t.track_id, t.class_id, true});
  }

  VideoSample out;
  out.config = config;
  out.registry = SegmentRegistry(std::move(entries));

  std::normal_distribution<double> noise(0.0, config.noise_std > 0 ? config.noise_std : 1.0);
  for (int t = 0; t < config.num_frames; ++t) {
    PanopticMap pan(h, w);
    Image img({static_cast<std::size_t>(h), static_cast<std::size_t>(w), 3});
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        int cls = 0;
        for (const auto& b : bounds) {
          const double edge = b.offset + b.amplitude * std::sin(2.0 * std::numbers::pi * b.frequency * x / w + b.phase);
          if (y >= edge) ++cls;
        }
        std::int32_t track = cls;
        const auto& tex = textures[cls];
        const double shade = 0.08 * std::sin(tex[0] * x + tex[1] * y + tex[2]);
        Rgb color = kStuffPalette[static_cast<std::size_t>(cls) % kStuffPalette.size()];
        for (double& c : color) c = c + shade;

        for (const auto& th : things) {
          const double r2 = th.radius2(x, y, t);
          if (r2 <= 1.0) {
            cls = th.class_id;
            track = th.track_id;
            for (int ch = 0; ch < 3; ++ch) color[ch] = th.color[ch] * (1.0 - 0.15 * r2);
          }
        }
        pan.semantic(y, x) = cls;
        pan.instance(y, x) = track;
        for (int ch = 0; ch < 3; ++ch) {
          double v = color[ch];
          if (config.noise_std > 0) v += noise(rng);
          img(y, x, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
    }
    out.frames.push_back(std::move(img));
    out.panoptic.push_back(std::move(pan));
  }

  for (int t = 0; t + 1 < config.num_frames; ++t) {
    FlowField flow(h, w);
    const auto& pan = out.panoptic[t];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const auto id = pan.instance(y, x);
        if (id >= kFirstThingTrack) {
          const auto& th = things[static_cast<std::size_t>(id - kFirstThingTrack)];
          flow.data(y, x, 0) = th.vx;
          flow.data(y, x, 1) = th.vy;
        }
      }
    }
    out.flows.push_back(std::move(flow));
  }

  for (int t = 0; t < config.num_frames; ++t) {
    FrameVisibility vis;
    const auto& pan = out.panoptic[t];
    std::set<std::int32_t> present(pan.instance.values().begin(), pan.instance.values().end());
    vis.visible_tracks.assign(present.begin(), present.end());
    if (t + 1 < config.num_frames) {
      const auto& next = out.panoptic[t + 1];
      const auto& flow = out.flows[t];
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const int tx = x + static_cast<int>(flow.dx(y, x));
          const int ty = y + static_cast<int>(flow.dy(y, x));
          const bool inside = tx >= 0 && ty >= 0 && tx < w && ty < h;
          if (!inside || next.instance(ty, tx) != pan.instance(y, x)) {
            vis.vanishing_pixels.push_back(static_cast<std::uint32_t>(y * w + x));
          }
        }
      }
    }
    out.visibility.push_back(std::move(vis));
  }
  return out;
}

ComposedFlow compose_flow(std::span<const FlowField> flows, int from, int to) {
  if (from < 0 || from >= to) {
    throw ArgumentError("compose_flow: need 0 <= from < to (got from=" + std::to_string(from) +
                        ", to=" + std::to_string(to) + ")");
  }
  if (static_cast<std::size_t>(to) > flows.size()) {
    throw ArgumentError("compose_flow: to=" + std::to_string(to) + " exceeds available flows");
  }
  const std::size_t h = flows[from].height(), w = flows[from].width();
  ComposedFlow out{FlowField(h, w), Mask({h, w}, 1)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double px = static_cast<double>(x) + flows[from].dx(y, x);
      double py = static_cast<double>(y) + flows[from].dy(y, x);
      bool valid = true;
      for (int s = from + 1; s < to && valid; ++s) {
        const auto tap = bilinear_tap(py, px, h, w);
        if (!tap.valid) {
          valid = false;
          break;
        }
        double dx = 0.0, dy = 0.0;
        tap.for_each([&](std::size_t yy, std::size_t xx, double wt) {
          dx += wt * flows[s].dx(yy, xx);
          dy += wt * flows[s].dy(yy, xx);
        });
        px += dx;
        py += dy;
      }
      if (valid && !bilinear_tap(py, px, h, w).valid) valid = false;
      out.flow.data(y, x, 0) = px - static_cast<double>(x);
      out.flow.data(y, x, 1) = py - static_cast<double>(y);
      out.valid(y, x) = valid ? 1 : 0;
    }
  }
  return out;
}

}  // namespace vps
