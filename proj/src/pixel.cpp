#include "vps/pixel.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace vps {

namespace {

void require_flow_matches(const FlowField& flow, std::size_t h, std::size_t w, const char* what) {
  if (flow.data.rank() != 3 || flow.height() != h || flow.width() != w) {
    throw ArgumentError(std::string(what) + ": flow " + shape_string(flow.data.shape()) +
                        " does not match spatial size " + std::to_string(h) + "x" +
                        std::to_string(w));
  }
}

}  // namespace

WarpResult bilinear_warp(const RealTensor& source, const FlowField& flow) {
  if (source.rank() != 3) throw ArgumentError("bilinear_warp: expected C x H x W source");
  const std::size_t c = source.dim(0), h = source.dim(1), w = source.dim(2), plane = h * w;
  require_flow_matches(flow, h, w, "bilinear_warp");
  WarpResult out{RealTensor(source.shape()), Mask({h, w})};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto tap = bilinear_tap(static_cast<double>(y) + flow.dy(y, x),
                                    static_cast<double>(x) + flow.dx(y, x), h, w);
      if (!tap.valid) continue;
      out.valid(y, x) = 1;
      const std::size_t p = y * w + x;
      for (std::size_t k = 0; k < c; ++k) {
        double v = 0.0;
        tap.for_each([&](std::size_t yy, std::size_t xx, double wt) {
          v += wt * source[k * plane + yy * w + xx];
        });
        out.output[k * plane + p] = v;
      }
    }
  }
  return out;
}

RealTensor bilinear_warp_backward(const RealTensor& grad_output, const FlowField& flow) {
  if (grad_output.rank() != 3) throw ArgumentError("bilinear_warp_backward: expected C x H x W");
  const std::size_t c = grad_output.dim(0), h = grad_output.dim(1), w = grad_output.dim(2);
  const std::size_t plane = h * w;
  require_flow_matches(flow, h, w, "bilinear_warp_backward");
  RealTensor grad(grad_output.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const auto tap = bilinear_tap(static_cast<double>(y) + flow.dy(y, x),
                                    static_cast<double>(x) + flow.dx(y, x), h, w);
      if (!tap.valid) continue;
      const std::size_t p = y * w + x;
      for (std::size_t k = 0; k < c; ++k) {
        const double g = grad_output[k * plane + p];
        tap.for_each([&](std::size_t yy, std::size_t xx, double wt) {
          grad[k * plane + yy * w + xx] += wt * g;
        });
      }
    }
  }
  return grad;
}

OcclusionMap occlusion_map(const Image& frame_t, const Image& frame_t2, const FlowField& flow,
                           double alpha, const Mask* flow_valid) {
  require_same_shape(frame_t, frame_t2, "occlusion_map");
  if (frame_t.rank() != 3 || frame_t.dim(2) != 3) {
    throw ArgumentError("occlusion_map: expected H x W x 3 images");
  }
  if (!(alpha >= 0.0)) throw ArgumentError("occlusion_map: alpha must be >= 0");
  const std::size_t h = frame_t.dim(0), w = frame_t.dim(1);
  require_flow_matches(flow, h, w, "occlusion_map");
  if (flow_valid && (flow_valid->rank() != 2 || flow_valid->dim(0) != h || flow_valid->dim(1) != w)) {
    throw ArgumentError("occlusion_map: validity mask shape mismatch");
  }
  OcclusionMap occ{RealTensor({h, w})};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (flow_valid && !(*flow_valid)(y, x)) continue;
      const auto tap = bilinear_tap(static_cast<double>(y) + flow.dy(y, x),
                                    static_cast<double>(x) + flow.dx(y, x), h, w);
      if (!tap.valid) continue;
      double sq = 0.0;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double warped = 0.0;
        tap.for_each([&](std::size_t yy, std::size_t xx, double wt) {
          warped += wt * frame_t2(yy, xx, ch);
        });
        const double d = frame_t(y, x, ch) - warped;
        sq += d * d;
      }
      occ.data(y, x) = std::exp(-alpha * std::sqrt(sq));
    }
  }
  return occ;
}

FlowField downsample_flow(const FlowField& flow, int factor) {
  if (factor < 1) throw ArgumentError("downsample_flow: factor must be >= 1");
  const std::size_t f = static_cast<std::size_t>(factor);
  if (flow.height() % f || flow.width() % f) {
    throw ArgumentError("downsample_flow: size not divisible by factor " + std::to_string(factor));
  }
  if (f == 1) return flow;
  FlowField out(flow.height() / f, flow.width() / f);
  const double area = static_cast<double>(f * f);
  for (std::size_t y = 0; y < out.height(); ++y) {
    for (std::size_t x = 0; x < out.width(); ++x) {
      for (std::size_t k = 0; k < 2; ++k) {
        double s = 0.0;
        for (std::size_t dy = 0; dy < f; ++dy) {
          for (std::size_t dx = 0; dx < f; ++dx) s += flow.data(y * f + dy, x * f + dx, k);
        }
        out.data(y, x, k) = s / area / static_cast<double>(f);
      }
    }
  }
  return out;
}

OcclusionMap downsample_occlusion(const OcclusionMap& occ, int factor) {
  if (factor < 1) throw ArgumentError("downsample_occlusion: factor must be >= 1");
  const std::size_t f = static_cast<std::size_t>(factor);
  const std::size_t h = occ.data.dim(0), w = occ.data.dim(1);
  if (h % f || w % f) {
    throw ArgumentError("downsample_occlusion: size not divisible by factor " +
                        std::to_string(factor));
  }
  if (f == 1) return occ;
  OcclusionMap out{RealTensor({h / f, w / f})};
  for (std::size_t y = 0; y < h / f; ++y) {
    for (std::size_t x = 0; x < w / f; ++x) {
      double s = 0.0;
      for (std::size_t dy = 0; dy < f; ++dy) {
        for (std::size_t dx = 0; dx < f; ++dx) s += occ.data(y * f + dy, x * f + dx);
      }
      out.data(y, x) = s / static_cast<double>(f * f);
    }
  }
  return out;
}

FlowField perturb_flow(const FlowField& flow, double stddev, std::uint64_t seed) {
  if (!(stddev >= 0.0)) throw ArgumentError("perturb_flow: stddev must be >= 0");
  FlowField out = flow;
  if (stddev == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, stddev);
  for (double& v : out.data.values()) v += noise(rng);
  return out;
}

LossResult warp_loss(const LogitVolume& logits_t, const LogitVolume& logits_t2,
                     const FlowField& flow_ds, const OcclusionMap& occ_ds, Reduction reduction) {
  require_same_shape(logits_t.data, logits_t2.data, "warp_loss");
  if (logits_t.data.rank() != 3) throw ArgumentError("warp_loss: expected N x H x W logits");
  const std::size_t n = logits_t.channels(), h = logits_t.height(), w = logits_t.width();
  const std::size_t plane = h * w;
  require_flow_matches(flow_ds, h, w, "warp_loss");
  if (occ_ds.data.rank() != 2 || occ_ds.data.dim(0) != h || occ_ds.data.dim(1) != w) {
    throw ArgumentError("warp_loss: occlusion map " + shape_string(occ_ds.data.shape()) +
                        " is not at logit resolution " + std::to_string(h) + "x" +
                        std::to_string(w));
  }

  const auto warped = bilinear_warp(logits_t2.data, flow_ds);
  LossResult out;
  RealTensor grad_t(logits_t.data.shape()), grad_warped(logits_t.data.shape());
  std::size_t valid_count = 0;
  double total = 0.0;
  std::vector<double> r(n);
  for (std::size_t p = 0; p < plane; ++p) {
    if (!warped.valid[p]) continue;
    ++valid_count;
    double sq = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      r[c] = logits_t.data[c * plane + p] - warped.output[c * plane + p];
      sq += r[c] * r[c];
    }
    const double norm = std::sqrt(sq);
    const double o = occ_ds.data[p];
    total += o * norm;
    if (norm > 0.0) {
      for (std::size_t c = 0; c < n; ++c) {
        const double g = o * r[c] / norm;
        grad_t[c * plane + p] = g;
        grad_warped[c * plane + p] = -g;
      }
    }
  }
  double scale = 1.0;
  if (reduction == Reduction::Mean) scale = valid_count ? 1.0 / static_cast<double>(valid_count) : 0.0;
  out.value = total * scale;
  auto grad_t2 = bilinear_warp_backward(grad_warped, flow_ds);
  for (double& g : grad_t.values()) g *= scale;
  for (double& g : grad_t2.values()) g *= scale;
  out.gradients.emplace("logits_t", std::move(grad_t));
  out.gradients.emplace("logits_t2", std::move(grad_t2));
  return out;
}

Tube build_tube(const SoftMaskVolume& soft_t, const SoftMaskVolume& soft_t2, std::size_t channel,
                std::int32_t track_id) {
  require_same_shape(soft_t.data, soft_t2.data, "build_tube");
  if (channel >= soft_t.channels()) {
    throw ArgumentError("build_tube: channel " + std::to_string(channel) + " out of range (" +
                        std::to_string(soft_t.channels()) + " channels)");
  }
  const std::size_t plane = soft_t.height() * soft_t.width();
  Tube tube{RealTensor({2, soft_t.height(), soft_t.width()}), track_id};
  for (std::size_t p = 0; p < plane; ++p) {
    tube.data[p] = soft_t.data[channel * plane + p];
    tube.data[plane + p] = soft_t2.data[channel * plane + p];
  }
  return tube;
}

std::vector<GtTube> ground_truth_tubes(const PanopticMap& panoptic_t,
                                       const PanopticMap& panoptic_t2,
                                       const SegmentRegistry& registry) {
  require_same_shape(panoptic_t.instance, panoptic_t2.instance, "ground_truth_tubes");
  check_consistency(panoptic_t, registry);
  check_consistency(panoptic_t2, registry);
  const std::size_t h = panoptic_t.height(), w = panoptic_t.width(), plane = h * w;
  std::vector<GtTube> out;
  for (std::size_t c = 0; c < registry.size(); ++c) {
    const auto id = registry.entries()[c].track_id;
    GtTube tube{id, c, RealTensor({2, h, w})};
    std::size_t in_t = 0, in_t2 = 0;
    for (std::size_t p = 0; p < plane; ++p) {
      if (panoptic_t.instance[p] == id) {
        tube.data[p] = 1.0;
        ++in_t;
      }
      if (panoptic_t2.instance[p] == id) {
        tube.data[plane + p] = 1.0;
        ++in_t2;
      }
    }
    if (in_t && in_t2) out.push_back(std::move(tube));
  }
  std::sort(out.begin(), out.end(),
            [](const GtTube& a, const GtTube& b) { return a.track_id < b.track_id; });
  return out;
}

LossResult tube_loss(const LogitVolume& logits_t, const LogitVolume& logits_t2,
                     const std::vector<GtTube>& gt_tubes) {
  require_same_shape(logits_t.data, logits_t2.data, "tube_loss");
  if (gt_tubes.empty()) throw ArgumentError("tube_loss: no ground-truth tubes");
  const auto soft_t = softmax_channels(logits_t);
  const auto soft_t2 = softmax_channels(logits_t2);
  const std::size_t plane = soft_t.height() * soft_t.width();
  const double inv_n = 1.0 / static_cast<double>(gt_tubes.size());

  RealTensor grad_soft_t(soft_t.data.shape()), grad_soft_t2(soft_t.data.shape());
  double total = 0.0;
  for (const auto& gt : gt_tubes) {
    if (gt.data.shape() != std::vector<std::size_t>{2, soft_t.height(), soft_t.width()}) {
      throw ArgumentError("tube_loss: gt tube " + std::to_string(gt.track_id) + " has shape " +
                          shape_string(gt.data.shape()));
    }
    const bool any = std::any_of(gt.data.values().begin(), gt.data.values().end(),
                                 [](double v) { return v != 0.0; });
    if (!any) {
      throw ConsistencyError("tube_loss: gt tube of track " + std::to_string(gt.track_id) +
                             " is empty (untraceable segment)");
    }
    const auto pred = build_tube(soft_t, soft_t2, gt.channel, gt.track_id);
    const double d = dice(pred.data.values(), gt.data.values());
    total += 1.0 - d;

    double pq = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      pq += pred.data[i] * gt.data[i];
      sum_sq += pred.data[i] * pred.data[i] + gt.data[i] * gt.data[i];
    }
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
      const double dd = 2.0 * gt.data[i] / sum_sq - 4.0 * pq * pred.data[i] / (sum_sq * sum_sq);
      const double g = -inv_n * dd;
      if (i < plane) {
        grad_soft_t[gt.channel * plane + i] += g;
      } else {
        grad_soft_t2[gt.channel * plane + (i - plane)] += g;
      }
    }
  }
  LossResult out;
  out.value = total * inv_n;
  out.gradients.emplace("logits_t", softmax_channels_backward(soft_t, grad_soft_t));
  out.gradients.emplace("logits_t2", softmax_channels_backward(soft_t2, grad_soft_t2));
  return out;
}

PixelLossOutput pixel_level_loss(const LogitVolume& logits_t, const LogitVolume& logits_t2,
                                 const FlowField& flow_ds, const OcclusionMap& occ_ds,
                                 const std::vector<GtTube>& gt_tubes,
                                 const PixelLossOptions& options) {
  PixelLossOutput out;
  if (options.warp) {
    out.warp = warp_loss(logits_t, logits_t2, flow_ds, occ_ds, options.reduction);
    accumulate(out.total, out.warp);
  }
  if (options.tube) {
    out.tube = tube_loss(logits_t, logits_t2, gt_tubes);
    accumulate(out.total, out.tube);
  }
  return out;
}

}  // namespace vps
