#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "helpers.hpp"
#include "vps/errors.hpp"
#include "vps/scene.hpp"
#include "vps/vpq.hpp"

using namespace vps;
using namespace vps::testing;

namespace {

PredictionSequence sequence(const SegmentRegistry& reg, std::size_t h, std::size_t w,
                            const std::vector<std::vector<std::int32_t>>& frames) {
  PredictionSequence s;
  s.registry = reg;
  for (const auto& ids : frames) s.panoptic.push_back(map_from_ids(h, w, ids, reg));
  return s;
}

// Exhaustive-matching VPQ written from the definition: for every window,
// every class and every one-to-one gt/pred assignment with IoU > 0.5, keep
// the best; score = sum IoU / (TP + FP/2 + FN/2); mean over classes, then
// over windows.
ScoreTriple brute_force_vpq(const PredictionSequence& pred, const PredictionSequence& gt, int k) {
  const std::size_t n = gt.panoptic.size();
  std::vector<double> all_w, thing_w, stuff_w;
  for (std::size_t s = 0; s + static_cast<std::size_t>(k) < n; ++s) {
    std::map<std::int32_t, std::int32_t> gcls, pcls;
    for (std::size_t f = s; f <= s + static_cast<std::size_t>(k); ++f)
      for (std::size_t i = 0; i < gt.panoptic[f].instance.size(); ++i) {
        gcls[gt.panoptic[f].instance[i]] = gt.panoptic[f].semantic[i];
        pcls[pred.panoptic[f].instance[i]] = pred.panoptic[f].semantic[i];
      }
    auto iou = [&](std::int32_t g, std::int32_t p) {
      long inter = 0, uni = 0;
      for (std::size_t f = s; f <= s + static_cast<std::size_t>(k); ++f)
        for (std::size_t i = 0; i < gt.panoptic[f].instance.size(); ++i) {
          const bool a = gt.panoptic[f].instance[i] == g, b = pred.panoptic[f].instance[i] == p;
          inter += a && b;
          uni += a || b;
        }
      return static_cast<double>(inter) / static_cast<double>(uni);
    };
    std::set<std::int32_t> classes;
    for (auto& [id, c] : gcls) classes.insert(c);
    for (auto& [id, c] : pcls) classes.insert(c);
    double a = 0, t = 0, st = 0;
    int na = 0, nt = 0, ns = 0;
    for (auto cls : classes) {
      std::vector<std::int32_t> gs, ps;
      for (auto& [id, c] : gcls)
        if (c == cls) gs.push_back(id);
      for (auto& [id, c] : pcls)
        if (c == cls) ps.push_back(id);
      double best_sum = 0;
      int best_tp = 0;
      std::vector<bool> used(ps.size());
      std::vector<double> chosen;
      std::function<void(std::size_t, std::vector<double>&)> rec = [&](std::size_t gi, std::vector<double>& cur) {
        if (gi == gs.size()) {
          double sum = 0;
          for (double v : cur) sum += v;
          if (static_cast<int>(cur.size()) > best_tp || (static_cast<int>(cur.size()) == best_tp && sum > best_sum)) {
            best_tp = static_cast<int>(cur.size());
            best_sum = sum;
          }
          return;
        }
        rec(gi + 1, cur);
        for (std::size_t pi = 0; pi < ps.size(); ++pi) {
          if (used[pi]) continue;
          const double v = iou(gs[gi], ps[pi]);
          if (!(v > 0.5)) continue;
          used[pi] = true;
          cur.push_back(v);
          rec(gi + 1, cur);
          cur.pop_back();
          used[pi] = false;
        }
      };
      std::vector<double> cur;
      rec(0, cur);
      const double fp = static_cast<double>(ps.size()) - best_tp, fn = static_cast<double>(gs.size()) - best_tp;
      const double score = best_sum / (best_tp + 0.5 * fp + 0.5 * fn);
      a += score;
      ++na;
      if (gt.registry.is_thing_class(cls)) {
        t += score;
        ++nt;
      } else {
        st += score;
        ++ns;
      }
    }
    all_w.push_back(a / na);
    if (nt) thing_w.push_back(t / nt);
    if (ns) stuff_w.push_back(st / ns);
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? std::nullopt : std::optional<double>(std::accumulate(v.begin(), v.end(), 0.0) / v.size());
  };
  return {mean(all_w), mean(thing_w), mean(stuff_w)};
}

bool close(const std::optional<double>& a, const std::optional<double>& b, double tol) {
  if (a.has_value() != b.has_value()) return false;
  return !a || std::abs(*a - *b) <= tol;
}

}  // namespace

TEST_CASE("perfect prediction scores one") {
  SceneConfig c;
  c.width = 24;
  c.height = 24;
  c.num_frames = 16;
  c.seed = 3;
  const auto s = generate_scene(c);
  const auto rep = vpq_report(as_prediction(s), s);
  for (const auto& [k, t] : rep.per_window) {
    CHECK(t.vpq == 1.0);
    CHECK(t.thing == 1.0);
    CHECK(t.stuff == 1.0);
  }
  CHECK(rep.average.vpq == 1.0);
  const auto only0 = vpq_report(as_prediction(s), s, {0});
  CHECK(only0.average == only0.per_window.at(0));
}

TEST_CASE("single matched tube with IoU 0.6") {
  // Thing class 1 covers pixels 0..5; the prediction puts the whole frame in
  // one class-1 segment, so the thing class has one TP with IoU 6/10.
  const SegmentRegistry reg({{0, 0, false}, {1000, 1, true}});
  const auto gt = sequence(reg, 1, 10, {{1000, 1000, 1000, 1000, 1000, 1000, 0, 0, 0, 0}});
  const auto pred = sequence(reg, 1, 10, {std::vector<std::int32_t>(10, 1000)});
  const auto s = vpq_window(pred, gt, 0);
  CHECK(s.thing == 0.6);
  CHECK(s.stuff == 0.0);
  CHECK(s.vpq == 0.3);
}

TEST_CASE("id swap inside a window zeroes the class") {
  // Two equal things of one class exchange predicted ids between the frames.
  const SegmentRegistry reg({{0, 0, false}, {1000, 1, true}, {1001, 1, true}});
  const std::vector<std::int32_t> f{1000, 1000, 0, 1001, 1001, 0};
  const std::vector<std::int32_t> swapped{1001, 1001, 0, 1000, 1000, 0};
  const auto gt = sequence(reg, 1, 6, {f, f});
  const auto pred = sequence(reg, 1, 6, {f, swapped});
  const auto k1 = vpq_window(pred, gt, 1);
  CHECK(k1.thing == 0.0);
  CHECK(k1.stuff == 1.0);
  CHECK(k1.vpq == 0.5);
  CHECK(brute_force_vpq(pred, gt, 1) == k1);
  // Per-frame windows are unaffected.
  CHECK(vpq_window(pred, gt, 0).vpq == 1.0);
}

TEST_CASE("greedy matching equals exhaustive matching") {
  std::mt19937_64 rng(97);
  const SegmentRegistry reg({{0, 0, false}, {1, 1, false}, {1000, 2, true}, {1001, 2, true}, {1002, 2, true},
                             {1003, 3, true}});
  const std::vector<std::int32_t> ids{0, 1, 1000, 1001, 1002, 1003};
  std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
  std::bernoulli_distribution flip(0.2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t h = 3, w = 4, n = 3;
    std::vector<std::vector<std::int32_t>> g(n, std::vector<std::int32_t>(h * w)), p = g;
    // Blocky ground truth that drifts between frames.
    for (std::size_t f = 0; f < n; ++f)
      for (std::size_t i = 0; i < h * w; ++i) {
        g[f][i] = f == 0 || flip(rng) ? ids[pick(rng)] : g[f - 1][i];
        p[f][i] = flip(rng) ? ids[pick(rng)] : g[f][i];
      }
    // Random relabeling of predicted thing ids within class 2.
    if (trial % 2) {
      for (auto& fr : p)
        for (auto& v : fr)
          if (v == 1000) v = 1001;
          else if (v == 1001) v = 1000;
    }
    const auto gt = sequence(reg, h, w, g), pred = sequence(reg, h, w, p);
    for (int k = 0; k < static_cast<int>(n); ++k) {
      const auto greedy = vpq_window(pred, gt, k);
      CHECK(greedy == vpq_oracle(pred, gt, k));
      const auto brute = brute_force_vpq(pred, gt, k);
      CHECK(close(greedy.vpq, brute.vpq, 1e-15));
      CHECK(close(greedy.thing, brute.thing, 1e-15));
      CHECK(close(greedy.stuff, brute.stuff, 1e-15));
    }
  }
}

TEST_CASE("oracle edge cases") {
  const SegmentRegistry reg({{0, 0, false}, {1000, 1, true}});
  const auto gt = sequence(reg, 1, 4, {{0, 1000, 1000, 0}});
  CHECK(vpq_oracle(gt, gt, 0).vpq == 1.0);
  // A prediction with nothing in common: every gt tube is a FN.
  const SegmentRegistry other({{5, 5, false}});
  PredictionSequence empty = sequence(other, 1, 4, {{5, 5, 5, 5}});
  const auto s = vpq_oracle(empty, gt, 0);
  CHECK(s.vpq == 0.0);
  CHECK(vpq_window(empty, gt, 0).vpq == 0.0);
  CHECK_THROWS_AS(vpq_window(gt, gt, 1), WindowError);
}

TEST_CASE("relabeling predicted ids leaves scores unchanged") {
  SceneConfig c;
  c.width = 24;
  c.height = 24;
  c.num_frames = 12;
  c.seed = 5;
  const auto s = generate_scene(c);
  auto pred = as_prediction(s);
  // Corrupt tracks a little so scores are not all one.
  for (std::size_t f = 6; f < pred.panoptic.size(); ++f)
    for (auto& v : pred.panoptic[f].instance.values())
      if (v == 1001) v = 1500;
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 10; ++trial) {
    std::map<std::int32_t, std::int32_t> bij;
    std::vector<std::int32_t> fresh(50);
    std::iota(fresh.begin(), fresh.end(), 2000);
    std::shuffle(fresh.begin(), fresh.end(), rng);
    std::size_t next = 0;
    auto relabeled = pred;
    for (auto& m : relabeled.panoptic)
      for (auto& v : m.instance.values()) {
        if (v < 1000) continue;
        if (!bij.count(v)) bij[v] = fresh[next++];
        v = bij[v];
      }
    for (int k : {0, 3, 8}) CHECK(vpq_window(relabeled, s, k) == vpq_window(pred, s, k));
  }
}

TEST_CASE("fragmenting tracks never raises VPQ") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    SceneConfig c;
    c.seed = seed;
    c.width = 32;
    c.height = 32;
    const auto s = generate_scene(c);
    std::mt19937_64 rng(seed + 200);
    std::uniform_int_distribution<int> frame(1, c.num_frames - 1);
    std::uniform_int_distribution<int> thing(0, c.num_things - 1);
    auto pred = as_prediction(s);
    std::map<int, double> last;
    for (int k : kDefaultWindows) last[k] = 1.0;
    std::int32_t next_id = 5000;
    for (int round = 0; round < 6; ++round) {
      // Split the fragment a thing carries at a random frame: its id changes
      // to a fresh one from that frame onwards.
      const std::int32_t victim = kFirstThingTrack + thing(rng);
      const auto from = static_cast<std::size_t>(frame(rng));
      std::optional<std::int32_t> fragment;
      for (std::size_t i = 0; i < s.panoptic[from].instance.size(); ++i)
        if (s.panoptic[from].instance[i] == victim) fragment = pred.panoptic[from].instance[i];
      if (!fragment) continue;
      const std::int32_t fresh = next_id++;
      for (std::size_t f = from; f < pred.panoptic.size(); ++f)
        for (std::size_t i = 0; i < pred.panoptic[f].instance.size(); ++i)
          if (s.panoptic[f].instance[i] == victim && pred.panoptic[f].instance[i] == *fragment)
            pred.panoptic[f].instance[i] = fresh;
      const auto rep = vpq_report(pred, s);
      for (int k : kDefaultWindows) {
        const double v = *rep.per_window.at(k).vpq;
        if (k >= 1) CHECK(v <= last[k] + 1e-15);
        last[k] = v;
      }
    }
  }
}

TEST_CASE("identity flicker hurts longer windows more across a suite") {
  std::map<int, double> suite;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    SceneConfig c;
    c.seed = seed;
    c.width = 32;
    c.height = 32;
    const auto s = generate_scene(c);
    std::mt19937_64 rng(seed + 300);
    std::uniform_int_distribution<int> frame(0, c.num_frames - 1), thing(0, c.num_things - 1), span(1, 2);
    auto pred = as_prediction(s);
    // Each thing loses its identity for a frame or two a few times.
    for (int e = 0; e < 4; ++e) {
      const std::int32_t victim = kFirstThingTrack + thing(rng);
      const int from = frame(rng), to = std::min(from + span(rng), c.num_frames);
      for (int f = from; f < to; ++f)
        for (auto& v : pred.panoptic[static_cast<std::size_t>(f)].instance.values())
          if (v == victim) v = 6000 + e;
    }
    const auto rep = vpq_report(pred, s);
    for (int k : kDefaultWindows) suite[k] += *rep.per_window.at(k).vpq / 8.0;
  }
  double prev = 2.0;
  for (int k : kDefaultWindows) {
    CHECK(suite[k] < prev);
    prev = suite[k];
  }
}

TEST_CASE("report average is the mean of the windows") {
  SceneConfig c;
  c.width = 24;
  c.height = 24;
  c.seed = 9;
  const auto s = generate_scene(c);
  auto pred = as_prediction(s);
  for (std::size_t f = 10; f < pred.panoptic.size(); ++f)
    for (auto& v : pred.panoptic[f].instance.values())
      if (v == 1000) v = 1999;
  const auto rep = vpq_report(pred, s);
  double sum = 0;
  for (int k : rep.window_set) sum += *rep.per_window.at(k).vpq;
  CHECK(*rep.average.vpq == sum / static_cast<double>(rep.window_set.size()));
}

TEST_CASE("stride and void class") {
  const SegmentRegistry reg({{0, 0, false}, {9, 9, false}, {1000, 1, true}});
  const std::vector<std::int32_t> a{1000, 1000, 0, 9}, b{0, 1000, 1000, 9};
  const auto gt = sequence(reg, 1, 4, {a, b, a, b});
  CHECK(vpq_window(gt, gt, 1, {2, std::nullopt}).vpq == 1.0);
  CHECK_THROWS_AS(vpq_window(gt, gt, 2, {2, std::nullopt}), WindowError);
  // Predicting anything on void pixels does not matter.
  auto pred = gt;
  pred.panoptic[0].instance[3] = 1000;
  pred.panoptic[0].semantic[3] = 1;
  VpqOptions opt;
  opt.void_class = 9;
  CHECK(vpq_window(pred, gt, 0, opt) == vpq_window(gt, gt, 0, opt));
  CHECK(vpq_window(pred, gt, 0, opt).stuff == 1.0);
}

TEST_CASE("temporal consistency metric") {
  const SegmentRegistry reg({{0, 0, false}, {1000, 1, true}});
  const std::vector<FlowField> zero{constant_flow(1, 6, 0, 0), constant_flow(1, 6, 0, 0)};
  const std::vector<std::int32_t> left{1000, 1000, 1000, 0, 0, 0}, right{0, 0, 0, 1000, 1000, 1000};
  SUBCASE("frozen prediction") {
    CHECK(tc_metric(sequence(reg, 1, 6, {left, left, left}), zero) == 1.0);
  }
  SUBCASE("alternating disjoint masks") {
    CHECK(tc_metric(sequence(reg, 1, 6, {left, right, left}), zero) == 0.0);
  }
  SUBCASE("half overlap") {
    const std::vector<std::int32_t> shifted{0, 1000, 1000, 1000, 0, 0};
    const std::vector<FlowField> one{constant_flow(1, 6, 0, 0)};
    CHECK(tc_metric(sequence(reg, 1, 6, {left, shifted}), one) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  }
  CHECK_THROWS_AS(tc_metric(sequence(reg, 1, 6, {left, left}), zero), ArgumentError);
}
