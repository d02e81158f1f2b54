#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vps/contrast.hpp"
#include "vps/model.hpp"
#include "vps/pixel.hpp"
#include "vps/scene.hpp"
#include "vps/vpq.hpp"

namespace vps {

// Which temporal-correspondence terms contribute to the objective. The
// segment term is split into its two graph views.
struct EnabledLosses {
  bool semantic = true;
  bool instance = true;
  bool warp = true;
  bool tube = true;

  bool segment() const { return semantic || instance; }
  bool any() const { return segment() || warp || tube; }
  static EnabledLosses none() { return {false, false, false, false}; }
  // Comma-separated subset of {segment, sem, inst, warp, tube}, or "none".
  static EnabledLosses parse(const std::string& spec);
  std::string to_string() const;

  bool operator==(const EnabledLosses&) const = default;
};

struct TrainConfig {
  double lambda_segment = 1.0;
  double lambda_pixel = 1.0;
  double tau = kDefaultTemperature;
  double alpha = kDefaultOcclusionAlpha;
  std::vector<int> delta_range{-10, 10};
  int steps = 300;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
  ContrastMode contrast_mode = ContrastMode::SimClr;
  EnabledLosses enabled_losses;
  std::size_t feature_dim = 8;
  int downsample = 1;
  Reduction warp_reduction = Reduction::Mean;
  double flow_noise = 0.0;
  double link_threshold = 0.5;

  void validate() const;
  // Same data order and initialization with every temporal term switched off.
  TrainConfig baseline() const;
};

struct FramePair {
  int t = 0;
  int t2 = 0;

  bool operator==(const FramePair&) const = default;
};

FramePair sample_pair(const VideoSample& sample, const TrainConfig& config, std::mt19937_64& rng);

struct StepRecord {
  int step = 0;
  double task_loss = 0;
  double segment_loss = 0;
  double warp_loss = 0;
  double tube_loss = 0;
  double total = 0;
};

struct ObjectiveOutput {
  StepRecord components;
  std::vector<double> gradient;
  std::vector<std::string> diagnostics;
};

// Network outputs for both frames of a pair.
struct PairOutputs {
  LogitVolume logits_t;
  LogitVolume logits_t2;
  FeatureMap features_t;
  FeatureMap features_t2;
};

struct PairObjective {
  StepRecord components;
  std::optional<double> semantic_loss;
  std::optional<double> instance_loss;
  std::optional<double> occlusion_mean;  // set when the warp term ran
  RealTensor grad_logits_t, grad_logits_t2;
  RealTensor grad_features_t, grad_features_t2;
  std::vector<std::string> diagnostics;
};

// Objective and its gradients w.r.t. the given logits and features.
PairObjective pair_objective(const VideoSample& sample, FramePair pair, const PairOutputs& outputs,
                             const TrainConfig& config);

// Ground truth as network outputs: logits are `scale` times the one-hot
// channel indicator, features are the one-hot indicator itself.
PairOutputs ground_truth_outputs(const VideoSample& sample, FramePair pair, double scale = 1000.0);

// Full objective on one frame pair: per-pixel cross-entropy task loss on
// both frames plus lambda-weighted segment and pixel terms, with the
// analytic gradient w.r.t. every model parameter.
ObjectiveOutput evaluate_objective(const ToyModel& model, const VideoSample& sample, FramePair pair,
                                   const TrainConfig& config);

// One gradient-descent update. Throws DivergenceError on a non-finite loss.
StepRecord train_step(ToyModel& model, const VideoSample& sample, FramePair pair,
                      const TrainConfig& config, int step_index = 0);

// Per-frame inference: argmax segmentation, thing ids linked across frames
// by greedy cosine matching of pooled embeddings.
PredictionSequence predict_sequence(const ToyModel& model, const VideoSample& sample,
                                    double link_threshold = 0.5);

struct TrainLog {
  TrainConfig config;
  std::vector<StepRecord> records;
  VpqReport report;
  double tc = 0.0;
  std::size_t skipped_segment_steps = 0;
};

struct TrainResult {
  ToyModel model;
  TrainLog log;
};

TrainResult train_model(const TrainConfig& config, const std::vector<VideoSample>& train_scenes);

// Mean of several reports, per window and component.
VpqReport mean_report(const std::vector<VpqReport>& reports);

// Scores a trained model on held-out scenes; fills log.report and log.tc.
void evaluate_model(const ToyModel& model, const std::vector<VideoSample>& held_out,
                    TrainLog& log, double link_threshold = 0.5);

struct ExperimentResult {
  TrainResult full;
  TrainResult baseline;
};

ExperimentResult run_experiment(const TrainConfig& config, const std::vector<SceneConfig>& train,
                                const std::vector<SceneConfig>& held_out);

// Standard synthetic suite: 64x64, 20 frames, 4 things, 2 stuff classes.
struct Suite {
  std::vector<SceneConfig> train;
  std::vector<SceneConfig> held_out;
};
Suite standard_suite(std::uint64_t seed, int num_train = 10, int num_held_out = 5);

}  // namespace vps
