#include "vps/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_map>

namespace vps {

EnabledLosses EnabledLosses::parse(const std::string& spec) {
  EnabledLosses out = none();
  if (spec.empty() || spec == "none") return out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "segment") {
      out.semantic = out.instance = true;
    } else if (item == "sem" || item == "semantic") {
      out.semantic = true;
    } else if (item == "inst" || item == "instance") {
      out.instance = true;
    } else if (item == "warp") {
      out.warp = true;
    } else if (item == "tube") {
      out.tube = true;
    } else if (item == "pixel") {
      out.warp = out.tube = true;
    } else if (item == "all") {
      out = EnabledLosses{};
    } else {
      throw ConfigError("enabled losses: unknown term '" + item + "'");
    }
  }
  return out;
}

std::string EnabledLosses::to_string() const {
  std::vector<std::string> parts;
  if (semantic && instance) {
    parts.push_back("segment");
  } else if (semantic) {
    parts.push_back("sem");
  } else if (instance) {
    parts.push_back("inst");
  }
  if (warp) parts.push_back("warp");
  if (tube) parts.push_back("tube");
  if (parts.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "," : "") + parts[i];
  return s;
}

void TrainConfig::validate() const {
  if (!(lambda_segment >= 0.0)) throw ConfigError("train config: lambda_segment must be >= 0");
  if (!(lambda_pixel >= 0.0)) throw ConfigError("train config: lambda_pixel must be >= 0");
  if (!(tau > 0.0)) throw ConfigError("train config: tau must be > 0");
  if (!(alpha >= 0.0)) throw ConfigError("train config: alpha must be >= 0");
  if (delta_range.empty()) throw ConfigError("train config: delta_range is empty");
  for (int d : delta_range) {
    if (d == 0) throw ConfigError("train config: delta_range must not contain 0");
  }
  if (steps < 0) throw ConfigError("train config: steps must be >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train config: learning_rate must be finite and >= 0");
  }
  if (feature_dim < 1) throw ConfigError("train config: feature_dim must be >= 1");
  if (downsample < 1) throw ConfigError("train config: downsample must be >= 1");
  if (!(flow_noise >= 0.0)) throw ConfigError("train config: flow_noise must be >= 0");
}

TrainConfig TrainConfig::baseline() const {
  TrainConfig b = *this;
  b.enabled_losses = EnabledLosses::none();
  b.lambda_segment = 0.0;
  b.lambda_pixel = 0.0;
  return b;
}

FramePair sample_pair(const VideoSample& sample, const TrainConfig& config, std::mt19937_64& rng) {
  const int n = static_cast<int>(sample.num_frames());
  auto feasible = [&](int t) {
    std::vector<int> out;
    for (int d : config.delta_range) {
      if (d != 0 && t + d >= 0 && t + d < n) out.push_back(d);
    }
    return out;
  };
  std::vector<int> starts;
  for (int t = 0; t < n; ++t) {
    if (!feasible(t).empty()) starts.push_back(t);
  }
  if (starts.empty()) {
    throw ConfigError("sample_pair: no offset in delta_range fits a clip of " + std::to_string(n) +
                      " frames");
  }
  const int t = starts[std::uniform_int_distribution<std::size_t>(0, starts.size() - 1)(rng)];
  const auto deltas = feasible(t);
  const int d = deltas[std::uniform_int_distribution<std::size_t>(0, deltas.size() - 1)(rng)];
  return {t, t + d};
}

namespace {

struct TaskLoss {
  double value = 0.0;
  RealTensor grad;
};

// Mean per-pixel cross-entropy against the ground-truth channel; `weight`
// scales both value and gradient.
TaskLoss cross_entropy(const LogitVolume& logits, const PanopticMap& pan,
                       const std::unordered_map<std::int32_t, std::size_t>& channel_of,
                       double weight) {
  const std::size_t n = logits.channels(), plane = logits.height() * logits.width();
  TaskLoss out{0.0, RealTensor(logits.data.shape())};
  const double scale = weight / static_cast<double>(plane);
  double total = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    const std::size_t target = channel_of.at(pan.instance[p]);
    double peak = logits.data[p];
    for (std::size_t c = 1; c < n; ++c) peak = std::max(peak, logits.data[c * plane + p]);
    double sum = 0.0;
    for (std::size_t c = 0; c < n; ++c) sum += std::exp(logits.data[c * plane + p] - peak);
    const double lse = peak + std::log(sum);
    total += lse - logits.data[target * plane + p];
    for (std::size_t c = 0; c < n; ++c) {
      const double prob = std::exp(logits.data[c * plane + p] - lse);
      out.grad[c * plane + p] = scale * (prob - (c == target ? 1.0 : 0.0));
    }
  }
  out.value = total * scale;
  return out;
}

RealTensor avg_pool(const RealTensor& in, std::size_t f) {
  if (f == 1) return in;
  const std::size_t c = in.dim(0), h = in.dim(1), w = in.dim(2);
  if (h % f || w % f) throw ArgumentError("avg_pool: size not divisible by " + std::to_string(f));
  RealTensor out({c, h / f, w / f});
  const double inv = 1.0 / static_cast<double>(f * f);
  for (std::size_t k = 0; k < c; ++k)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) out(k, y / f, x / f) += inv * in(k, y, x);
  return out;
}

RealTensor avg_pool_backward(const RealTensor& grad, std::size_t f, const std::vector<std::size_t>& shape) {
  if (f == 1) return grad;
  RealTensor out(shape);
  const double inv = 1.0 / static_cast<double>(f * f);
  for (std::size_t k = 0; k < shape[0]; ++k)
    for (std::size_t y = 0; y < shape[1]; ++y)
      for (std::size_t x = 0; x < shape[2]; ++x) out(k, y, x) = inv * grad(k, y / f, x / f);
  return out;
}

void add_scaled(RealTensor& into, const RealTensor& g, double s) {
  require_same_shape(into, g, "add_scaled");
  for (std::size_t i = 0; i < g.size(); ++i) into[i] += s * g[i];
}

void require_finite(double v, const char* component) {
  if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + component + " loss");
}

// Routes contrastive embedding gradients back onto the feature maps.
void backprop_view(const ContrastBatch& batch, const LossResult& loss, GraphView view,
                   const PanopticMap& pan_t, const PanopticMap& pan_t2, const FeatureMap& feat_t,
                   const FeatureMap& feat_t2, double weight, RealTensor& grad_t, RealTensor& grad_t2) {
  auto mask_for = [&](const PanopticMap& pan, std::int32_t key) {
    return view == GraphView::Instance ? track_mask(pan, key) : class_mask(pan, key);
  };
  for (std::size_t i = 0; i < batch.embeddings_t.size(); ++i) {
    auto g = loss.gradient(embedding_grad_id(Frame::Current, i)).storage();
    for (double& v : g) v *= weight;
    embed_segment_backward(feat_t, mask_for(pan_t, batch.embeddings_t[i].track_id), g, grad_t);
  }
  for (std::size_t j = 0; j < batch.embeddings_t2.size(); ++j) {
    auto g = loss.gradient(embedding_grad_id(Frame::Reference, j)).storage();
    for (double& v : g) v *= weight;
    embed_segment_backward(feat_t2, mask_for(pan_t2, batch.embeddings_t2[j].track_id), g, grad_t2);
  }
}

}  // namespace

PairObjective pair_objective(const VideoSample& sample, FramePair pair, const PairOutputs& outputs,
                             const TrainConfig& config) {
  const int n_frames = static_cast<int>(sample.num_frames());
  if (pair.t < 0 || pair.t2 < 0 || pair.t >= n_frames || pair.t2 >= n_frames || pair.t == pair.t2) {
    throw ArgumentError("invalid frame pair (" + std::to_string(pair.t) + ", " + std::to_string(pair.t2) +
                        ") for a clip of " + std::to_string(n_frames) + " frames");
  }
  if (outputs.logits_t.channels() != sample.registry.size() ||
      outputs.logits_t2.channels() != sample.registry.size()) {
    throw ArgumentError("pair_objective: logits have " + std::to_string(outputs.logits_t.channels()) +
                        " channels, scene registry has " + std::to_string(sample.registry.size()));
  }
  std::unordered_map<std::int32_t, std::size_t> channel_of;
  for (std::size_t c = 0; c < sample.registry.size(); ++c) {
    channel_of[sample.registry.entries()[c].track_id] = c;
  }

  const auto& pan_t = sample.panoptic[pair.t];
  const auto& pan_t2 = sample.panoptic[pair.t2];
  const auto& logits_t = outputs.logits_t;
  const auto& logits_t2 = outputs.logits_t2;
  const auto& feat_t = outputs.features_t;
  const auto& feat_t2 = outputs.features_t2;

  PairObjective out;
  auto& rec = out.components;

  auto task_t = cross_entropy(logits_t, pan_t, channel_of, 0.5);
  auto task_t2 = cross_entropy(logits_t2, pan_t2, channel_of, 0.5);
  rec.task_loss = task_t.value + task_t2.value;
  require_finite(rec.task_loss, "task");
  out.grad_logits_t = std::move(task_t.grad);
  out.grad_logits_t2 = std::move(task_t2.grad);
  out.grad_features_t = RealTensor(feat_t.data.shape());
  out.grad_features_t2 = RealTensor(feat_t2.data.shape());

  const auto& enabled = config.enabled_losses;
  if (enabled.segment()) {
    auto try_view = [&](bool on, GraphView view) -> std::optional<ContrastBatch> {
      if (!on) return std::nullopt;
      try {
        return build_contrast_batch(pan_t, pan_t2, feat_t, feat_t2, sample.registry, view, config.tau,
                                    config.contrast_mode);
      } catch (const InsufficientBatchError& e) {
        out.diagnostics.push_back(std::string("InsufficientBatchError: ") + e.what());
        return std::nullopt;
      }
    };
    const auto sem = try_view(enabled.semantic, GraphView::Semantic);
    const auto inst = try_view(enabled.instance, GraphView::Instance);
    if (sem || inst) {
      const auto seg = segment_level_loss(sem, inst);
      for (const auto& d : seg.diagnostics) out.diagnostics.push_back(d);
      rec.segment_loss = seg.total.value;
      require_finite(rec.segment_loss, "segment");
      if (sem) {
        out.semantic_loss = seg.semantic.value;
        backprop_view(*sem, seg.semantic, GraphView::Semantic, pan_t, pan_t2, feat_t, feat_t2,
                      config.lambda_segment, out.grad_features_t, out.grad_features_t2);
      }
      if (inst) {
        out.instance_loss = seg.instance.value;
        backprop_view(*inst, seg.instance, GraphView::Instance, pan_t, pan_t2, feat_t, feat_t2,
                      config.lambda_segment, out.grad_features_t, out.grad_features_t2);
      }
    } else {
      out.diagnostics.emplace_back("segment loss skipped: no view has 2 traceable nodes");
    }
  }

  if (enabled.warp) {
    // Flows only run forward in time, so the warp term always goes from the
    // earlier frame of the pair to the later one.
    const bool forward = pair.t < pair.t2;
    const int early = forward ? pair.t : pair.t2, late = forward ? pair.t2 : pair.t;
    const auto& le_full = forward ? logits_t : logits_t2;
    const auto& ll_full = forward ? logits_t2 : logits_t;
    auto composed = compose_flow(sample.flows, early, late);
    FlowField flow = composed.flow;
    if (config.flow_noise > 0.0) {
      flow = perturb_flow(flow, config.flow_noise,
                          config.seed * 1000003ULL + static_cast<std::uint64_t>(early * 131 + late));
    }
    const auto occ = occlusion_map(sample.frames[early], sample.frames[late], flow, config.alpha,
                                   &composed.valid);
    double occ_sum = 0.0;
    for (double v : occ.data.values()) occ_sum += v;
    out.occlusion_mean = occ_sum / static_cast<double>(occ.data.size());
    const auto f = static_cast<std::size_t>(config.downsample);
    const LogitVolume le{avg_pool(le_full.data, f), early};
    const LogitVolume ll{avg_pool(ll_full.data, f), late};
    const auto wl = warp_loss(le, ll, downsample_flow(flow, config.downsample),
                              downsample_occlusion(occ, config.downsample), config.warp_reduction);
    rec.warp_loss = wl.value;
    require_finite(rec.warp_loss, "warp");
    const auto ge = avg_pool_backward(wl.gradient("logits_t"), f, le_full.data.shape());
    const auto gl = avg_pool_backward(wl.gradient("logits_t2"), f, ll_full.data.shape());
    add_scaled(forward ? out.grad_logits_t : out.grad_logits_t2, ge, config.lambda_pixel);
    add_scaled(forward ? out.grad_logits_t2 : out.grad_logits_t, gl, config.lambda_pixel);
  }

  if (enabled.tube) {
    const auto tubes = ground_truth_tubes(pan_t, pan_t2, sample.registry);
    if (tubes.empty()) {
      out.diagnostics.emplace_back("tube loss skipped: no traceable segments");
    } else {
      const auto tl = tube_loss(logits_t, logits_t2, tubes);
      rec.tube_loss = tl.value;
      require_finite(rec.tube_loss, "tube");
      add_scaled(out.grad_logits_t, tl.gradient("logits_t"), config.lambda_pixel);
      add_scaled(out.grad_logits_t2, tl.gradient("logits_t2"), config.lambda_pixel);
    }
  }

  rec.total = rec.task_loss + config.lambda_segment * rec.segment_loss +
              config.lambda_pixel * (rec.warp_loss + rec.tube_loss);
  require_finite(rec.total, "total");
  return out;
}

PairOutputs ground_truth_outputs(const VideoSample& sample, FramePair pair, double scale) {
  const std::size_t n = sample.registry.size();
  auto one = [&](int f) {
    const auto& pan = sample.panoptic.at(static_cast<std::size_t>(f));
    const std::size_t h = pan.height(), w = pan.width(), plane = h * w;
    RealTensor hot({n, h, w});
    for (std::size_t p = 0; p < plane; ++p) {
      const auto c = sample.registry.channel_of(pan.instance[p]);
      if (!c) throw ConsistencyError("ground truth id " + std::to_string(pan.instance[p]) + " not in registry");
      hot[*c * plane + p] = 1.0;
    }
    RealTensor logits = hot;
    for (double& v : logits.values()) v *= scale;
    return std::make_pair(LogitVolume{std::move(logits), f}, FeatureMap{std::move(hot)});
  };
  auto [lt, ft] = one(pair.t);
  auto [lt2, ft2] = one(pair.t2);
  return {std::move(lt), std::move(lt2), std::move(ft), std::move(ft2)};
}

ObjectiveOutput evaluate_objective(const ToyModel& model, const VideoSample& sample, FramePair pair,
                                   const TrainConfig& config) {
  if (model.binding().size() != sample.registry.size()) {
    throw ArgumentError("evaluate_objective: model has " + std::to_string(model.num_segments()) +
                        " channels, scene registry has " + std::to_string(sample.registry.size()));
  }
  const int n_frames = static_cast<int>(sample.num_frames());
  if (pair.t < 0 || pair.t2 < 0 || pair.t >= n_frames || pair.t2 >= n_frames || pair.t == pair.t2) {
    throw ArgumentError("evaluate_objective: invalid frame pair (" + std::to_string(pair.t) + ", " +
                        std::to_string(pair.t2) + ")");
  }
  const auto act_t = model.forward(sample.frames[pair.t], pair.t);
  const auto act_t2 = model.forward(sample.frames[pair.t2], pair.t2);
  const PairOutputs outputs{act_t.logits, act_t2.logits, act_t.features, act_t2.features};
  auto po = pair_objective(sample, pair, outputs, config);

  ObjectiveOutput out{po.components, model.backward(act_t, po.grad_features_t, po.grad_logits_t),
                      std::move(po.diagnostics)};
  const auto g2 = model.backward(act_t2, po.grad_features_t2, po.grad_logits_t2);
  for (std::size_t i = 0; i < g2.size(); ++i) out.gradient[i] += g2[i];
  return out;
}

StepRecord train_step(ToyModel& model, const VideoSample& sample, FramePair pair,
                      const TrainConfig& config, int step_index) {
  auto obj = evaluate_objective(model, sample, pair, config);
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * obj.gradient[i];
  obj.components.step = step_index;
  return obj.components;
}

PredictionSequence predict_sequence(const ToyModel& model, const VideoSample& sample,
                                    double link_threshold) {
  const auto& binding = model.binding();
  struct Track {
    std::int32_t id;
    std::int32_t class_id;
    std::vector<double> embedding;
  };
  std::vector<Track> tracks;
  std::int32_t next_id = kFirstThingTrack;

  PredictionSequence out;
  for (std::size_t f = 0; f < sample.num_frames(); ++f) {
    const auto act = model.forward(sample.frames[f], static_cast<int>(f));
    const std::size_t n = act.logits.channels(), h = act.logits.height(), w = act.logits.width();
    const std::size_t plane = h * w;
    std::vector<std::size_t> label(plane);
    for (std::size_t p = 0; p < plane; ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < n; ++c) {
        if (act.logits.data[c * plane + p] > act.logits.data[best * plane + p]) best = c;
      }
      label[p] = best;
    }

    struct Segment {
      std::size_t channel;
      Mask mask;
      std::vector<double> embedding;
      std::int32_t id = -1;
    };
    std::vector<Segment> segments;
    for (std::size_t c = 0; c < n; ++c) {
      if (!binding.entries()[c].is_thing) continue;
      Mask m({h, w});
      for (std::size_t p = 0; p < plane; ++p) m[p] = label[p] == c;
      if (count_set(m) == 0) continue;
      auto emb = embed_segment(act.features, m, 0, static_cast<int>(f)).vector;
      segments.push_back({c, std::move(m), std::move(emb)});
    }

    struct Candidate {
      double sim;
      std::size_t seg, track;
    };
    std::vector<Candidate> candidates;
    for (std::size_t s = 0; s < segments.size(); ++s) {
      for (std::size_t t = 0; t < tracks.size(); ++t) {
        if (tracks[t].class_id != binding.entries()[segments[s].channel].class_id) continue;
        const double sim = cosine_similarity(segments[s].embedding, tracks[t].embedding);
        if (sim > link_threshold) candidates.push_back({sim, s, t});
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.sim != b.sim) return a.sim > b.sim;
      return std::pair(a.seg, a.track) < std::pair(b.seg, b.track);
    });
    std::vector<bool> track_used(tracks.size(), false);
    for (const auto& c : candidates) {
      if (segments[c.seg].id >= 0 || track_used[c.track]) continue;
      segments[c.seg].id = tracks[c.track].id;
      track_used[c.track] = true;
      tracks[c.track].embedding = segments[c.seg].embedding;
    }
    for (auto& s : segments) {
      if (s.id >= 0) continue;
      s.id = next_id++;
      tracks.push_back({s.id, binding.entries()[s.channel].class_id, s.embedding});
    }

    PanopticMap pan(h, w);
    std::vector<std::int32_t> thing_id(n, -1);
    for (const auto& s : segments) thing_id[s.channel] = s.id;
    for (std::size_t p = 0; p < plane; ++p) {
      const auto& e = binding.entries()[label[p]];
      pan.semantic[p] = e.class_id;
      pan.instance[p] = e.is_thing ? thing_id[label[p]] : e.track_id;
    }
    out.panoptic.push_back(std::move(pan));
  }

  std::vector<RegistryEntry> entries;
  for (const auto& e : binding.entries()) {
    if (!e.is_thing) entries.push_back(e);
  }
  for (const auto& t : tracks) entries.push_back({t.id, t.class_id, true});
  out.registry = SegmentRegistry(std::move(entries));
  return out;
}

TrainResult train_model(const TrainConfig& config, const std::vector<VideoSample>& train_scenes) {
  config.validate();
  if (train_scenes.empty()) throw ConfigError("train: no training scenes");
  for (const auto& s : train_scenes) {
    if (!(s.registry == train_scenes.front().registry)) {
      throw ConfigError("train: scenes disagree on the segment registry (channel binding)");
    }
  }
  std::mt19937_64 rng(config.seed);
  TrainResult result{ToyModel::initialize(config.feature_dim, train_scenes.front().registry,
                                          config.seed ^ 0x5DEECE66DULL),
                     TrainLog{}};
  result.log.config = config;
  std::uniform_int_distribution<std::size_t> pick(0, train_scenes.size() - 1);
  for (int step = 0; step < config.steps; ++step) {
    const auto& scene = train_scenes[pick(rng)];
    const auto pair = sample_pair(scene, config, rng);
    const auto rec = train_step(result.model, scene, pair, config, step);
    if (config.enabled_losses.segment() && rec.segment_loss == 0.0) {
      ++result.log.skipped_segment_steps;
    }
    result.log.records.push_back(rec);
  }
  return result;
}

VpqReport mean_report(const std::vector<VpqReport>& reports) {
  if (reports.empty()) throw ArgumentError("mean_report: no reports");
  VpqReport out;
  out.window_set = reports.front().window_set;
  auto mean_component = [](const std::vector<std::optional<double>>& values) {
    double s = 0;
    int n = 0;
    for (const auto& v : values) {
      if (v) {
        s += *v;
        ++n;
      }
    }
    return n ? std::optional<double>(s / n) : std::nullopt;
  };
  std::vector<std::optional<double>> av, at, as;
  for (int k : out.window_set) {
    std::vector<std::optional<double>> v, t, s;
    for (const auto& r : reports) {
      const auto& triple = r.per_window.at(k);
      v.push_back(triple.vpq);
      t.push_back(triple.thing);
      s.push_back(triple.stuff);
    }
    ScoreTriple m{mean_component(v), mean_component(t), mean_component(s)};
    out.per_window[k] = m;
    av.push_back(m.vpq);
    at.push_back(m.thing);
    as.push_back(m.stuff);
  }
  out.average = {mean_component(av), mean_component(at), mean_component(as)};
  return out;
}

void evaluate_model(const ToyModel& model, const std::vector<VideoSample>& held_out, TrainLog& log,
                    double link_threshold) {
  if (held_out.empty()) throw ConfigError("evaluate: no held-out scenes");
  std::vector<VpqReport> reports;
  double tc = 0.0;
  for (const auto& scene : held_out) {
    const auto pred = predict_sequence(model, scene, link_threshold);
    std::vector<int> windows;
    for (int k : kDefaultWindows) {
      if (static_cast<std::size_t>(k) < scene.num_frames()) windows.push_back(k);
    }
    reports.push_back(vpq_report(pred, scene, windows));
    tc += tc_metric(pred, scene.flows);
  }
  log.report = mean_report(reports);
  log.tc = tc / static_cast<double>(held_out.size());
}

ExperimentResult run_experiment(const TrainConfig& config, const std::vector<SceneConfig>& train,
                                const std::vector<SceneConfig>& held_out) {
  if (train.empty()) throw ConfigError("run_experiment: need at least one training scene");
  if (held_out.empty()) throw ConfigError("run_experiment: need at least one held-out scene");
  std::vector<VideoSample> train_samples, eval_samples;
  for (const auto& c : train) train_samples.push_back(generate_scene(c));
  for (const auto& c : held_out) eval_samples.push_back(generate_scene(c));

  ExperimentResult out{train_model(config, train_samples), train_model(config.baseline(), train_samples)};
  evaluate_model(out.full.model, eval_samples, out.full.log, config.link_threshold);
  evaluate_model(out.baseline.model, eval_samples, out.baseline.log, config.link_threshold);
  return out;
}

Suite standard_suite(std::uint64_t seed, int num_train, int num_held_out) {
  Suite suite;
  SceneConfig base;
  base.width = 64;
  base.height = 64;
  base.num_frames = 20;
  base.num_things = 4;
  base.num_stuff_classes = 2;
  base.num_thing_classes = 2;
  for (int i = 0; i < num_train; ++i) {
    SceneConfig c = base;
    c.seed = seed * 1000 + static_cast<std::uint64_t>(i);
    suite.train.push_back(c);
  }
  for (int i = 0; i < num_held_out; ++i) {
    SceneConfig c = base;
    c.seed = seed * 1000 + 500 + static_cast<std::uint64_t>(i);
    suite.held_out.push_back(c);
  }
  return suite;
}

}  // namespace vps
