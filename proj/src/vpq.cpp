#include "vps/vpq.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>

#include "vps/pixel.hpp"

namespace vps {

PredictionSequence as_prediction(const VideoSample& sample) {
  return PredictionSequence{sample.panoptic, sample.registry};
}

namespace {

using Id = std::int32_t;

struct FrameStats {
  std::map<std::pair<Id, Id>, std::int64_t> overlap;  // (gt, pred) -> pixels
  std::map<Id, std::int64_t> gt_area, pred_area;
  std::map<Id, Id> gt_class, pred_class;
};

struct ClassTally {
  std::int64_t tp = 0, fp = 0, fn = 0;
  double iou_sum = 0.0;

  double score() const {
    return iou_sum / (static_cast<double>(tp) + 0.5 * static_cast<double>(fp) +
                      0.5 * static_cast<double>(fn));
  }
};

void validate_inputs(const PredictionSequence& pred, const PredictionSequence& gt, int k,
                     const VpqOptions& options, std::vector<std::size_t>& frames) {
  if (pred.panoptic.size() != gt.panoptic.size()) {
    throw ArgumentError("vpq: prediction has " + std::to_string(pred.panoptic.size()) +
                        " frames, ground truth " + std::to_string(gt.panoptic.size()));
  }
  if (k < 0) throw ArgumentError("vpq: window size must be >= 0");
  if (options.stride < 1) throw ArgumentError("vpq: stride must be >= 1");
  frames.clear();
  for (std::size_t f = 0; f < gt.panoptic.size(); f += static_cast<std::size_t>(options.stride)) {
    frames.push_back(f);
  }
  if (static_cast<std::size_t>(k) + 1 > frames.size()) {
    throw WindowError("vpq: window k=" + std::to_string(k) + " needs " + std::to_string(k + 1) +
                      " annotated frames, sequence has " + std::to_string(frames.size()));
  }
  for (std::size_t f : frames) {
    require_same_shape(pred.panoptic[f].instance, gt.panoptic[f].instance, "vpq frame");
  }
}

bool is_thing(Id cls, const PredictionSequence& gt, const PredictionSequence& pred) {
  if (gt.registry.is_thing_class(cls)) return true;
  for (const auto& e : gt.registry.entries()) {
    if (e.class_id == cls) return false;
  }
  return pred.registry.is_thing_class(cls);
}

FrameStats frame_stats(const PanopticMap& pred, const PanopticMap& gt,
                       const std::optional<Id>& void_class) {
  FrameStats s;
  for (std::size_t i = 0; i < gt.instance.size(); ++i) {
    if (void_class && gt.semantic[i] == *void_class) continue;
    const Id g = gt.instance[i], p = pred.instance[i];
    ++s.overlap[{g, p}];
    ++s.gt_area[g];
    ++s.pred_area[p];
    s.gt_class[g] = gt.semantic[i];
    s.pred_class[p] = pred.semantic[i];
  }
  return s;
}

// Reduces per-class tallies to a window score triple.
ScoreTriple window_score(const std::map<Id, ClassTally>& tallies, const PredictionSequence& gt,
                         const PredictionSequence& pred) {
  double all = 0, thing = 0, stuff = 0;
  int n_all = 0, n_thing = 0, n_stuff = 0;
  for (const auto& [cls, tally] : tallies) {
    const double s = tally.score();
    all += s;
    ++n_all;
    if (is_thing(cls, gt, pred)) {
      thing += s;
      ++n_thing;
    } else {
      stuff += s;
      ++n_stuff;
    }
  }
  ScoreTriple out;
  if (n_all) out.vpq = all / n_all;
  if (n_thing) out.thing = thing / n_thing;
  if (n_stuff) out.stuff = stuff / n_stuff;
  return out;
}

struct Mean {
  double sum = 0;
  int n = 0;
  void add(const std::optional<double>& v) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  std::optional<double> get() const {
    return n ? std::optional<double>(sum / n) : std::nullopt;
  }
};

ScoreTriple mean_of(const std::vector<ScoreTriple>& items) {
  Mean a, t, s;
  for (const auto& item : items) {
    a.add(item.vpq);
    t.add(item.thing);
    s.add(item.stuff);
  }
  return {a.get(), t.get(), s.get()};
}

}  // namespace

ScoreTriple vpq_window(const PredictionSequence& pred, const PredictionSequence& gt, int k,
                       const VpqOptions& options) {
  std::vector<std::size_t> frames;
  validate_inputs(pred, gt, k, options, frames);

  std::vector<FrameStats> stats;
  stats.reserve(frames.size());
  for (std::size_t f : frames) {
    stats.push_back(frame_stats(pred.panoptic[f], gt.panoptic[f], options.void_class));
  }

  std::vector<ScoreTriple> windows;
  for (std::size_t start = 0; start + static_cast<std::size_t>(k) < frames.size(); ++start) {
    FrameStats tube;
    for (std::size_t f = start; f <= start + static_cast<std::size_t>(k); ++f) {
      for (const auto& [key, n] : stats[f].overlap) tube.overlap[key] += n;
      for (const auto& [id, n] : stats[f].gt_area) tube.gt_area[id] += n;
      for (const auto& [id, n] : stats[f].pred_area) tube.pred_area[id] += n;
      for (const auto& [id, c] : stats[f].gt_class) tube.gt_class[id] = c;
      for (const auto& [id, c] : stats[f].pred_class) tube.pred_class[id] = c;
    }

    struct Candidate {
      double iou;
      Id gt, pred;
    };
    std::vector<Candidate> candidates;
    for (const auto& [key, inter] : tube.overlap) {
      const auto [g, p] = key;
      if (tube.gt_class[g] != tube.pred_class[p]) continue;
      const auto uni = tube.gt_area[g] + tube.pred_area[p] - inter;
      const double iou = static_cast<double>(inter) / static_cast<double>(uni);
      if (iou > 0.5) candidates.push_back({iou, g, p});
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.iou != b.iou) return a.iou > b.iou;
      return std::pair(a.gt, a.pred) < std::pair(b.gt, b.pred);
    });
    std::map<Id, std::pair<Id, double>> matched_gt;  // gt -> (pred, iou)
    std::set<Id> matched_pred;
    for (const auto& c : candidates) {
      if (matched_gt.count(c.gt) || matched_pred.count(c.pred)) continue;
      matched_gt[c.gt] = {c.pred, c.iou};
      matched_pred.insert(c.pred);
    }

    std::map<Id, ClassTally> tallies;
    for (const auto& [g, area] : tube.gt_area) {
      auto& t = tallies[tube.gt_class[g]];
      auto it = matched_gt.find(g);
      if (it == matched_gt.end()) {
        ++t.fn;
      } else {
        ++t.tp;
        t.iou_sum += it->second.second;
      }
    }
    for (const auto& [p, area] : tube.pred_area) {
      if (!matched_pred.count(p)) ++tallies[tube.pred_class[p]].fp;
    }
    windows.push_back(window_score(tallies, gt, pred));
  }
  return mean_of(windows);
}

ScoreTriple vpq_window(const PredictionSequence& pred, const VideoSample& gt, int k,
                       const VpqOptions& options) {
  return vpq_window(pred, as_prediction(gt), k, options);
}

VpqReport vpq_report(const PredictionSequence& pred, const PredictionSequence& gt,
                     const std::vector<int>& windows, const VpqOptions& options) {
  if (windows.empty()) throw ArgumentError("vpq_report: empty window set");
  VpqReport report;
  report.window_set = windows;
  std::vector<ScoreTriple> scores;
  for (int k : windows) {
    auto s = vpq_window(pred, gt, k, options);
    report.per_window[k] = s;
    scores.push_back(s);
  }
  report.average = mean_of(scores);
  return report;
}

VpqReport vpq_report(const PredictionSequence& pred, const VideoSample& gt,
                     const std::vector<int>& windows, const VpqOptions& options) {
  return vpq_report(pred, as_prediction(gt), windows, options);
}

ScoreTriple vpq_oracle(const PredictionSequence& pred, const PredictionSequence& gt, int k,
                       const VpqOptions& options) {
  std::vector<std::size_t> frames;
  validate_inputs(pred, gt, k, options, frames);

  auto keep = [&](std::size_t f, std::size_t i) {
    return !(options.void_class && gt.panoptic[f].semantic[i] == *options.void_class);
  };

  std::vector<ScoreTriple> windows;
  for (std::size_t start = 0; start + static_cast<std::size_t>(k) < frames.size(); ++start) {
    const std::vector<std::size_t> window(frames.begin() + static_cast<std::ptrdiff_t>(start),
                                          frames.begin() + static_cast<std::ptrdiff_t>(start + k + 1));
    // Tube inventory: id -> class, per side.
    std::map<Id, Id> gt_tubes, pred_tubes;
    for (std::size_t f : window) {
      for (std::size_t i = 0; i < gt.panoptic[f].instance.size(); ++i) {
        if (!keep(f, i)) continue;
        gt_tubes[gt.panoptic[f].instance[i]] = gt.panoptic[f].semantic[i];
        pred_tubes[pred.panoptic[f].instance[i]] = pred.panoptic[f].semantic[i];
      }
    }
    // Pixel-by-pixel tube IoU.
    auto tube_iou = [&](Id g, Id p) {
      std::int64_t inter = 0, uni = 0;
      for (std::size_t f : window) {
        for (std::size_t i = 0; i < gt.panoptic[f].instance.size(); ++i) {
          if (!keep(f, i)) continue;
          const bool a = gt.panoptic[f].instance[i] == g;
          const bool b = pred.panoptic[f].instance[i] == p;
          inter += a && b;
          uni += a || b;
        }
      }
      return static_cast<double>(inter) / static_cast<double>(uni);
    };

    std::set<Id> classes;
    for (const auto& [id, c] : gt_tubes) classes.insert(c);
    for (const auto& [id, c] : pred_tubes) classes.insert(c);

    std::map<Id, ClassTally> tallies;
    for (Id cls : classes) {
      std::vector<Id> gs, ps;
      for (const auto& [id, c] : gt_tubes) if (c == cls) gs.push_back(id);
      for (const auto& [id, c] : pred_tubes) if (c == cls) ps.push_back(id);
      if (gs.size() > kOracleMaxTubes || ps.size() > kOracleMaxTubes) {
        throw SizeError("vpq_oracle: class " + std::to_string(cls) + " has " +
                        std::to_string(std::max(gs.size(), ps.size())) + " tubes in a window, limit " +
                        std::to_string(kOracleMaxTubes));
      }
      std::vector<std::vector<double>> iou(gs.size(), std::vector<double>(ps.size()));
      for (std::size_t a = 0; a < gs.size(); ++a)
        for (std::size_t b = 0; b < ps.size(); ++b) iou[a][b] = tube_iou(gs[a], ps[b]);

      // Enumerate every partial one-to-one assignment gt -> pred (or none).
      std::vector<int> assign(gs.size(), -1), best;
      std::vector<bool> used(ps.size(), false);
      double best_total = -1.0;
      std::function<void(std::size_t, double)> search = [&](std::size_t a, double total) {
        if (a == gs.size()) {
          if (total > best_total) {
            best_total = total;
            best = assign;
          }
          return;
        }
        assign[a] = -1;
        search(a + 1, total);
        for (std::size_t b = 0; b < ps.size(); ++b) {
          if (used[b] || !(iou[a][b] > 0.5)) continue;
          used[b] = true;
          assign[a] = static_cast<int>(b);
          search(a + 1, total + iou[a][b]);
          used[b] = false;
          assign[a] = -1;
        }
      };
      search(0, 0.0);

      ClassTally t;
      for (std::size_t a = 0; a < gs.size(); ++a) {
        if (best[a] >= 0) {
          ++t.tp;
          t.iou_sum += iou[a][static_cast<std::size_t>(best[a])];
        } else {
          ++t.fn;
        }
      }
      t.fp = static_cast<std::int64_t>(ps.size()) - t.tp;
      tallies[cls] = t;
    }
    windows.push_back(window_score(tallies, gt, pred));
  }
  return mean_of(windows);
}

double tc_metric(const PredictionSequence& pred, const std::vector<FlowField>& gt_flows) {
  if (pred.panoptic.size() < 2 || gt_flows.size() + 1 != pred.panoptic.size()) {
    throw ArgumentError("tc_metric: need one flow per consecutive frame pair (" +
                        std::to_string(pred.panoptic.size()) + " frames, " +
                        std::to_string(gt_flows.size()) + " flows)");
  }
  double total = 0.0;
  std::size_t terms = 0;
  for (std::size_t t = 0; t + 1 < pred.panoptic.size(); ++t) {
    const auto& a = pred.panoptic[t];
    const auto& b = pred.panoptic[t + 1];
    const std::size_t h = a.height(), w = a.width();
    std::set<Id> ids(a.instance.values().begin(), a.instance.values().end());
    ids.insert(b.instance.values().begin(), b.instance.values().end());
    for (Id id : ids) {
      RealTensor next({1, h, w});
      for (std::size_t i = 0; i < h * w; ++i) next[i] = b.instance[i] == id ? 1.0 : 0.0;
      const auto warped = bilinear_warp(next, gt_flows[t]);
      std::vector<double> p, q;
      for (std::size_t i = 0; i < h * w; ++i) {
        if (!warped.valid[i]) continue;
        p.push_back(a.instance[i] == id ? 1.0 : 0.0);
        q.push_back(warped.output[i]);
      }
      const bool any = std::any_of(p.begin(), p.end(), [](double v) { return v > 0; }) ||
                       std::any_of(q.begin(), q.end(), [](double v) { return v > 0; });
      if (!any) continue;
      total += dice(p, q);
      ++terms;
    }
  }
  if (terms == 0) throw ArgumentError("tc_metric: no segments to compare");
  return total / static_cast<double>(terms);
}

}  // namespace vps
