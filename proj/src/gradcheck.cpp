#include "vps/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "vps/contrast.hpp"
#include "vps/pixel.hpp"
#include "vps/trainer.hpp"

namespace vps {

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double step) {
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + step;
    const double up = f(x);
    x[i] = orig - step;
    const double down = f(x);
    x[i] = orig;
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(std::max(na, nn));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

namespace {

void maybe_flip(std::vector<double>& g, const GradCheckOptions& options) {
  if (options.inject_sign_flip) {
    for (double& v : g) v = -v;
  }
}

GradCheckSummary make_summary(const char* name, double tol) {
  GradCheckSummary s;
  s.suite = name;
  s.tolerance = tol;
  return s;
}

void finish(GradCheckSummary& s) { s.pass = s.max_relative_error <= s.tolerance; }

// Contrastive loss as a function of the pre-normalization vectors of all
// embeddings, concatenated frame t first.
double contrast_from_raw(std::span<const double> raw, const ContrastBatch& shape, std::size_t dim) {
  ContrastBatch b = shape;
  std::size_t off = 0;
  for (auto* list : {&b.embeddings_t, &b.embeddings_t2}) {
    for (auto& e : *list) {
      e.vector = l2_normalize(raw.subspan(off, dim));
      off += dim;
    }
  }
  return contrastive_loss(b).value;
}

}  // namespace

GradCheckSummary check_contrastive_gradients(const GradCheckOptions& options) {
  auto summary = make_summary("contrastive", kLossGradTolerance);
  std::mt19937_64 rng(options.seed ^ 0xC0FFEEULL);
  std::normal_distribution<double> normal;
  for (int inst = 0; inst < options.instances; ++inst) {
    const std::size_t n = 2 + static_cast<std::size_t>(inst % 5);
    const std::size_t dim = inst % 2 ? 16 : 4;
    const std::size_t extra_t = inst % 3 == 0 ? 1 : 0, extra_t2 = inst % 4 == 1 ? 1 : 0;

    ContrastBatch batch;
    batch.mode = inst % 5 == 4 ? ContrastMode::StrictEq2 : ContrastMode::SimClr;
    std::vector<double> raw;
    auto add = [&](std::vector<SegmentEmbedding>& list, int frame) {
      std::vector<double> v(dim);
      for (double& x : v) x = normal(rng);
      raw.insert(raw.end(), v.begin(), v.end());
      list.push_back({l2_normalize(v), static_cast<std::int32_t>(list.size()), frame});
    };
    for (std::size_t i = 0; i < n + extra_t; ++i) add(batch.embeddings_t, 0);
    for (std::size_t i = 0; i < n + extra_t2; ++i) add(batch.embeddings_t2, 1);
    for (std::size_t i = 0; i < n; ++i) batch.pairing.emplace_back(i, (i + inst) % n);

    const auto loss = contrastive_loss(batch);
    std::vector<double> analytic;
    std::size_t off = 0;
    for (Frame f : {Frame::Current, Frame::Reference}) {
      const auto& list = f == Frame::Current ? batch.embeddings_t : batch.embeddings_t2;
      for (std::size_t i = 0; i < list.size(); ++i) {
        const auto g = l2_normalize_backward(std::span<const double>(raw).subspan(off, dim),
                                             loss.gradient(embedding_grad_id(f, i)).values());
        analytic.insert(analytic.end(), g.begin(), g.end());
        off += dim;
      }
    }
    maybe_flip(analytic, options);
    const auto numeric = central_difference(
        [&](std::span<const double> x) { return contrast_from_raw(x, batch, dim); }, raw);
    summary.max_relative_error = std::max(summary.max_relative_error, relative_error(analytic, numeric));
    ++summary.instances;
  }
  finish(summary);
  return summary;
}

GradCheckSummary check_warp_gradients(const GradCheckOptions& options) {
  auto summary = make_summary("warp", kLossGradTolerance);
  std::mt19937_64 rng(options.seed ^ 0xBEEFULL);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uni(-2.0, 2.0), weight(0.05, 1.0);
  const std::size_t n = 3, h = 8, w = 8, size = n * h * w;
  for (int inst = 0; inst < options.instances; ++inst) {
    LogitVolume a{RealTensor({n, h, w}), 0}, b{RealTensor({n, h, w}), 1};
    for (double& v : a.data.values()) v = normal(rng);
    for (double& v : b.data.values()) v = normal(rng);
    FlowField flow(h, w);
    for (double& v : flow.data.values()) v = uni(rng);
    OcclusionMap occ{RealTensor({h, w})};
    for (double& v : occ.data.values()) v = weight(rng);
    const auto reduction = inst % 2 ? Reduction::Sum : Reduction::Mean;

    const auto loss = warp_loss(a, b, flow, occ, reduction);
    std::vector<double> analytic(loss.gradient("logits_t").values().begin(),
                                 loss.gradient("logits_t").values().end());
    analytic.insert(analytic.end(), loss.gradient("logits_t2").values().begin(),
                    loss.gradient("logits_t2").values().end());
    maybe_flip(analytic, options);

    std::vector<double> x(a.data.values().begin(), a.data.values().end());
    x.insert(x.end(), b.data.values().begin(), b.data.values().end());
    const auto numeric = central_difference(
        [&](std::span<const double> v) {
          LogitVolume pa{RealTensor({n, h, w}), 0}, pb{RealTensor({n, h, w}), 1};
          std::copy(v.begin(), v.begin() + size, pa.data.values().begin());
          std::copy(v.begin() + size, v.end(), pb.data.values().begin());
          return warp_loss(pa, pb, flow, occ, reduction).value;
        },
        x);
    summary.max_relative_error = std::max(summary.max_relative_error, relative_error(analytic, numeric));
    ++summary.instances;
  }
  finish(summary);
  return summary;
}

GradCheckSummary check_tube_gradients(const GradCheckOptions& options) {
  auto summary = make_summary("tube", kLossGradTolerance);
  std::mt19937_64 rng(options.seed ^ 0x7B3EULL);
  std::normal_distribution<double> normal;
  const std::size_t n = 3, h = 8, w = 8, plane = h * w, size = n * plane;
  for (int inst = 0; inst < options.instances; ++inst) {
    LogitVolume a{RealTensor({n, h, w}), 0}, b{RealTensor({n, h, w}), 1};
    for (double& v : a.data.values()) v = 2.0 * normal(rng);
    for (double& v : b.data.values()) v = 2.0 * normal(rng);
    std::vector<GtTube> tubes;
    std::uniform_int_distribution<std::size_t> label(0, n - 1);
    std::vector<std::size_t> lt(plane), lt2(plane);
    for (std::size_t p = 0; p < plane; ++p) {
      lt[p] = p < n ? p : label(rng);
      lt2[p] = p < n ? p : label(rng);
    }
    for (std::size_t c = 0; c < n; ++c) {
      GtTube t{static_cast<std::int32_t>(c), c, RealTensor({2, h, w})};
      for (std::size_t p = 0; p < plane; ++p) {
        t.data[p] = lt[p] == c;
        t.data[plane + p] = lt2[p] == c;
      }
      tubes.push_back(std::move(t));
    }
    const auto loss = tube_loss(a, b, tubes);
    std::vector<double> analytic(loss.gradient("logits_t").values().begin(),
                                 loss.gradient("logits_t").values().end());
    analytic.insert(analytic.end(), loss.gradient("logits_t2").values().begin(),
                    loss.gradient("logits_t2").values().end());
    maybe_flip(analytic, options);

    std::vector<double> x(a.data.values().begin(), a.data.values().end());
    x.insert(x.end(), b.data.values().begin(), b.data.values().end());
    const auto numeric = central_difference(
        [&](std::span<const double> v) {
          LogitVolume pa{RealTensor({n, h, w}), 0}, pb{RealTensor({n, h, w}), 1};
          std::copy(v.begin(), v.begin() + size, pa.data.values().begin());
          std::copy(v.begin() + size, v.end(), pb.data.values().begin());
          return tube_loss(pa, pb, tubes).value;
        },
        x);
    summary.max_relative_error = std::max(summary.max_relative_error, relative_error(analytic, numeric));
    ++summary.instances;
  }
  finish(summary);
  return summary;
}

GradCheckSummary check_model_gradients(const GradCheckOptions& options) {
  auto summary = make_summary("model", kModelGradTolerance);
  for (int inst = 0; inst < options.model_instances; ++inst) {
    SceneConfig sc;
    sc.width = 16;
    sc.height = 16;
    sc.num_frames = 12;
    sc.num_things = 2;
    sc.num_stuff_classes = 2;
    sc.num_thing_classes = 1;
    sc.max_speed = 1.5;
    sc.noise_std = 0.02;
    sc.seed = options.seed * 7919 + static_cast<std::uint64_t>(inst);
    const auto scene = generate_scene(sc);

    TrainConfig tc;
    tc.feature_dim = 4;
    tc.seed = sc.seed;
    tc.alpha = 5.0;
    tc.contrast_mode = inst % 2 ? ContrastMode::StrictEq2 : ContrastMode::SimClr;
    std::mt19937_64 rng(sc.seed);
    const auto pair = sample_pair(scene, tc, rng);

    auto model = ToyModel::initialize(tc.feature_dim, scene.registry, sc.seed + 17);
    // Larger weights than the training init so every term has sizeable gradients.
    for (double& p : model.parameters()) p *= 5.0;
    auto analytic = evaluate_objective(model, scene, pair, tc).gradient;
    maybe_flip(analytic, options);
    const auto numeric = central_difference(
        [&](std::span<const double> v) {
          ToyModel m = model;
          std::copy(v.begin(), v.end(), m.parameters().begin());
          return evaluate_objective(m, scene, pair, tc).components.total;
        },
        model.parameters());
    summary.max_relative_error = std::max(summary.max_relative_error, relative_error(analytic, numeric));
    ++summary.instances;
  }
  finish(summary);
  return summary;
}

std::vector<GradCheckSummary> run_gradcheck_suites(const GradCheckOptions& options) {
  return {check_contrastive_gradients(options), check_warp_gradients(options),
          check_tube_gradients(options), check_model_gradients(options)};
}

}  // namespace vps
