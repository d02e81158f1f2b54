#include "vps/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "vps/errors.hpp"
#include "vps/gradcheck.hpp"
#include "vps/io.hpp"
#include "vps/report.hpp"

namespace vps {

namespace {

fs::path default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? fs::path(env) : fs::path("vpst_out");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

// Collects everything needed to re-run one command and writes it next to
// the command's outputs.
class Manifest {
 public:
  Manifest(std::string verb, std::vector<std::string> argv, fs::path out_dir)
      : verb_(std::move(verb)), argv_(std::move(argv)), out_dir_(std::move(out_dir)) {}

  Json config = Json::object();
  std::vector<std::uint64_t> seeds;

  // Records files of an input directory matching `keep`.
  template <class Pred>
  void input_dir(const fs::path& dir, Pred keep) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (e.is_regular_file() && keep(name)) names.push_back(name);
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) inputs_[(dir / n).generic_string()] = sha256_hex(read_file(dir / n));
  }

  void input_file(const fs::path& path) { inputs_[path.generic_string()] = sha256_hex(read_file(path)); }

  void emit(const std::string& name, const std::string& bytes) {
    write_file_atomic(out_dir_ / name, bytes);
    outputs_[name] = sha256_hex(bytes);
  }

  void record_existing(const std::string& name) { outputs_[name] = sha256_hex(read_file(out_dir_ / name)); }

  void write() const {
    Json j{{"command", verb_},
           {"argv", argv_},
           {"cwd", fs::current_path().generic_string()},
           {"out_dir", fs::absolute(out_dir_).lexically_normal().generic_string()},
           {"config", config},
           {"seeds", seeds},
           {"inputs", inputs_},
           {"outputs", outputs_},
           {"tool_version", std::string(kToolName) + " " + kToolVersion}};
    write_file_atomic(out_dir_ / ("manifest." + verb_ + ".json"), dump_json(j));
  }

 private:
  std::string verb_;
  std::vector<std::string> argv_;
  fs::path out_dir_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
};

bool is_bundle_file(const std::string& name) {
  return name == "scene.json" || (name.size() > 5 && name.ends_with(".vpst"));
}

bool is_model_file(const std::string& name) { return name == "model.json" || name == "model.vpst"; }

struct TrainFlags {
  TrainConfig config;
  std::string losses = "all";
  std::string contrast_mode = "simclr";
  std::string warp_reduction = "mean";
  bool baseline = false;

  void add(CLI::App& app) {
    app.add_option("--lambda_segment,--lambda-segment", config.lambda_segment, "Weight of the segment term");
    app.add_option("--lambda_pixel,--lambda-pixel", config.lambda_pixel, "Weight of the pixel terms");
    app.add_option("--tau", config.tau, "Contrastive temperature");
    app.add_option("--alpha", config.alpha, "Occlusion sharpness");
    app.add_option("--delta_range,--delta-range", config.delta_range, "Frame offsets, e.g. --delta_range=-10,10")
        ->delimiter(',');
    app.add_option("--steps", config.steps, "Gradient steps");
    app.add_option("--learning_rate,--learning-rate,--lr", config.learning_rate, "Step size");
    app.add_option("--seed", config.seed, "Data order and initialization seed");
    app.add_option("--contrast_mode,--contrast-mode", contrast_mode, "simclr or strict");
    app.add_option("--enabled_losses,--enabled-losses,--losses", losses,
                   "Comma list of sem,inst,segment,warp,tube,pixel,all or none");
    app.add_option("--feature_dim,--feature-dim", config.feature_dim, "Embedding dimension");
    app.add_option("--downsample", config.downsample, "Pixel-term resolution divisor");
    app.add_option("--warp_reduction,--warp-reduction", warp_reduction, "mean or sum");
    app.add_option("--flow_noise,--flow-noise", config.flow_noise, "Std of additive flow noise");
    app.add_option("--link_threshold,--link-threshold", config.link_threshold, "Cosine threshold for id linking");
    app.add_flag("--baseline", baseline, "Task loss only");
  }

  TrainConfig resolve() {
    config.enabled_losses = EnabledLosses::parse(losses);
    config.contrast_mode = parse_contrast_mode(contrast_mode);
    config.warp_reduction = parse_reduction(warp_reduction);
    if (baseline) config = config.baseline();
    config.validate();
    return config;
  }
};

std::string elapsed_since(std::chrono::steady_clock::time_point start) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(3)
     << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << " s";
  return ss.str();
}

std::vector<VideoSample> load_bundles(const std::vector<std::string>& dirs, Manifest& manifest) {
  std::vector<VideoSample> out;
  for (const auto& d : dirs) {
    out.push_back(read_bundle(d));
    manifest.input_dir(d, is_bundle_file);
  }
  return out;
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

// ---------------------------------------------------------------------------

struct GenCommand {
  SceneConfig config;
  std::string out;

  void add(CLI::App& app) {
    app.add_option("--width", config.width);
    app.add_option("--height", config.height);
    app.add_option("--num_frames,--num-frames,--frames", config.num_frames);
    app.add_option("--num_things,--num-things", config.num_things);
    app.add_option("--num_stuff_classes,--num-stuff-classes", config.num_stuff_classes);
    app.add_option("--num_thing_classes,--num-thing-classes", config.num_thing_classes);
    app.add_option("--max_speed,--max-speed", config.max_speed);
    app.add_option("--seed", config.seed);
    app.add_option("--noise_std,--noise-std", config.noise_std);
    app.add_option("--out", out, "Bundle directory");
  }

  int run(const std::vector<std::string>& argv, std::ostream& os, std::ostream& es) {
    config.validate();
    const fs::path dir = out.empty() ? default_out_dir() : fs::path(out);
    const auto start = std::chrono::steady_clock::now();
    const auto sample = generate_scene(config);
    ensure_dir(dir);
    Manifest m("gen", argv, dir);
    m.config = to_json(config);
    m.seeds = {config.seed};
    for (const auto& name : write_bundle(sample, dir)) m.record_existing(name);
    m.write();
    os << "wrote bundle " << dir.string() << " (" << sample.num_frames() << " frames, " << sample.registry.size()
       << " segments)\n";
    es << "elapsed " << elapsed_since(start) << "\n";
    return kExitOk;
  }
};

struct LossCommand {
  TrainFlags flags;
  std::string bundle, model_dir, pred = "gt", out;
  int t = 0, t2 = 1;

  void add(CLI::App& app) {
    app.add_option("--bundle", bundle, "Bundle directory")->required();
    app.add_option("--t", t, "First frame of the pair");
    app.add_option("--t2", t2, "Second frame of the pair");
    app.add_option("--pred", pred, "gt or model");
    app.add_option("--model", model_dir, "Model directory (with --pred model)");
    app.add_option("--out", out);
    flags.add(app);
  }

  int run(const std::vector<std::string>& argv, std::ostream& os, std::ostream& es) {
    const auto config = flags.resolve();
    const fs::path dir = out.empty() ? default_out_dir() : fs::path(out);
    const auto start = std::chrono::steady_clock::now();
    Manifest m("loss", argv, dir);
    const auto sample = read_bundle(bundle);
    m.input_dir(bundle, is_bundle_file);
    const FramePair pair{t, t2};
    const int n = static_cast<int>(sample.num_frames());
    if (t < 0 || t2 < 0 || t >= n || t2 >= n || t == t2) {
      throw ArgumentError("frame pair (" + std::to_string(t) + ", " + std::to_string(t2) +
                          ") out of range for a clip of " + std::to_string(n) + " frames");
    }
    PairOutputs outputs;
    if (pred == "gt") {
      outputs = ground_truth_outputs(sample, pair);
    } else if (pred == "model") {
      if (model_dir.empty()) throw ArgumentError("--pred model needs --model");
      const auto model = read_model(model_dir);
      m.input_dir(model_dir, is_model_file);
      const auto a = model.forward(sample.frames[t], t);
      const auto b = model.forward(sample.frames[t2], t2);
      outputs = {a.logits, b.logits, a.features, b.features};
    } else {
      throw ArgumentError("--pred must be gt or model");
    }
    const auto result = pair_objective(sample, pair, outputs, config);
    const auto& c = result.components;

    Json components{{"task_loss_ce", c.task_loss}};
    const auto& en = config.enabled_losses;
    if (en.segment()) {
      components["segment"] = {{"semantic", optional_json(result.semantic_loss)},
                               {"instance", optional_json(result.instance_loss)},
                               {"total", c.segment_loss}};
    }
    if (en.warp) components["warp"] = c.warp_loss;
    if (en.tube) components["tube"] = c.tube_loss;
    Json report{{"pair", {{"t", t}, {"t2", t2}}},
                {"prediction", pred},
                {"enabled_losses", en.to_string()},
                {"components", components},
                {"lambda_segment", config.lambda_segment},
                {"lambda_pixel", config.lambda_pixel},
                {"total", c.total},
                {"occlusion_mean", optional_json(result.occlusion_mean)},
                {"diagnostics", result.diagnostics}};
    ensure_dir(dir);
    m.config = to_json(config);
    m.config["pair"] = {t, t2};
    m.config["prediction"] = pred;
    m.seeds = {config.seed};
    const auto text = dump_json(report);
    m.emit("loss.json", text);
    m.write();
    os << text;
    es << "elapsed " << elapsed_since(start) << "\n";
    return kExitOk;
  }
};

struct GradcheckCommand {
  GradCheckOptions options;
  std::string out;

  void add(CLI::App& app) {
    app.add_option("--seed", options.seed);
    app.add_option("--instances", options.instances, "Random instances per loss suite");
    app.add_option("--model_instances,--model-instances", options.model_instances);
    app.add_flag("--inject_sign_flip,--inject-sign-flip", options.inject_sign_flip,
                 "Test mode: negate analytic gradients");
    app.add_option("--out", out);
  }

  int run(const std::vector<std::string>& argv, std::ostream& os, std::ostream& es) {
    if (options.instances < 1 || options.model_instances < 1) throw ConfigError("instance counts must be >= 1");
    const fs::path dir = out.empty() ? default_out_dir() : fs::path(out);
    const auto start = std::chrono::steady_clock::now();
    const auto results = run_gradcheck_suites(options);
    bool all = true;
    Json rows = Json::array();
    std::ostringstream table;
    table << std::left << std::setw(13) << "suite" << std::setw(11) << "instances" << std::setw(15)
          << "max_rel_error" << std::setw(11) << "tolerance"
          << "result\n";
    for (const auto& s : results) {
      all = all && s.pass;
      rows.push_back({{"suite", s.suite},
                      {"instances", s.instances},
                      {"max_relative_error", s.max_relative_error},
                      {"tolerance", s.tolerance},
                      {"pass", s.pass}});
      std::ostringstream err, tol;
      err << std::scientific << std::setprecision(3) << s.max_relative_error;
      tol << std::scientific << std::setprecision(0) << s.tolerance;
      table << std::left << std::setw(13) << s.suite << std::setw(11) << s.instances << std::setw(15) << err.str()
            << std::setw(11) << tol.str() << (s.pass ? "pass" : "FAIL") << "\n";
    }
    ensure_dir(dir);
    Manifest m("gradcheck", argv, dir);
    m.config = {{"instances", options.instances},
                {"model_instances", options.model_instances},
                {"inject_sign_flip", options.inject_sign_flip},
                {"step", kFiniteDifferenceStep}};
    m.seeds = {options.seed};
    m.emit("gradcheck.json", dump_json({{"suites", rows}, {"pass", all}}));
    m.emit("gradcheck.txt", table.str());
    m.write();
    os << table.str();
    es << "elapsed " << elapsed_since(start) << "\n";
    return all ? kExitOk : kExitNumeric;
  }
};

struct TrainCommand {
  TrainFlags flags;
  std::vector<std::string> train_dirs, held_out_dirs;
  std::optional<std::uint64_t> suite;
  std::string out;

  void add(CLI::App& app) {
    app.add_option("--train", train_dirs, "Training bundle directories");
    app.add_option("--held_out,--held-out", held_out_dirs, "Held-out bundle directories");
    app.add_option("--suite", suite, "Use the standard synthetic suite generated from this seed");
    app.add_option("--out", out);
    flags.add(app);
  }

  int run(const std::vector<std::string>& argv, std::ostream& os, std::ostream& es) {
    const auto config = flags.resolve();
    if (suite && !train_dirs.empty()) throw ArgumentError("--suite and --train are exclusive");
    if (!suite && train_dirs.empty()) throw ArgumentError("train needs --train bundles or --suite");
    const fs::path dir = out.empty() ? default_out_dir() : fs::path(out);
    const auto start = std::chrono::steady_clock::now();
    Manifest m("train", argv, dir);
    std::vector<VideoSample> train, held_out;
    if (suite) {
      const auto s = standard_suite(*suite);
      for (const auto& c : s.train) train.push_back(generate_scene(c));
      if (held_out_dirs.empty()) {
        for (const auto& c : s.held_out) held_out.push_back(generate_scene(c));
      }
      m.seeds.push_back(*suite);
    } else {
      train = load_bundles(train_dirs, m);
    }
    if (!held_out_dirs.empty()) held_out = load_bundles(held_out_dirs, m);
    m.seeds.push_back(config.seed);

    auto result = train_model(config, train);
    if (!held_out.empty()) evaluate_model(result.model, held_out, result.log, config.link_threshold);

    ensure_dir(dir);
    m.config = to_json(config);
    for (const auto& name : write_model(result.model, dir)) m.record_existing(name);
    m.emit("trainlog.csv", trainlog_csv(result.log));
    m.emit("trainlog.json", dump_json(trainlog_json(result.log)));
    if (!held_out.empty()) {
      m.emit("vpq.json", dump_json({{"prediction", "model"}, {"report", to_json(result.log.report)},
                                    {"tc", result.log.tc}}));
    }
    m.write();
    const auto& last = result.log.records.back();
    os << "trained " << result.log.records.size() << " steps, final total loss " << last.total << "\n";
    if (!held_out.empty()) os << render_window_table({{"held-out", result.log.report}});
    es << "elapsed " << elapsed_since(start) << "\n";
    return kExitOk;
  }
};

struct EvalCommand {
  std::vector<std::string> bundles;
  std::string model_dir, out;
  std::vector<int> windows = kDefaultWindows;
  VpqOptions options;
  std::optional<std::int32_t> void_class;
  double link_threshold = 0.5;

  void add(CLI::App& app) {
    app.add_option("--bundle", bundles, "Ground-truth bundle directories")->required();
    app.add_option("--model", model_dir, "Model directory; ground truth is scored against itself when omitted");
    app.add_option("--windows", windows, "Window sizes k")->delimiter(',');
    app.add_option("--stride", options.stride, "Score every stride-th frame");
    app.add_option("--void_class,--void-class", void_class, "Class ignored during scoring");
    app.add_option("--link_threshold,--link-threshold", link_threshold);
    app.add_option("--out", out);
  }

  int run(const std::vector<std::string>& argv, std::ostream& os, std::ostream& es) {
    options.void_class = void_class;
    if (options.stride < 1) throw ConfigError("stride must be >= 1");
    if (windows.empty()) throw ConfigError("windows must not be empty");
    const fs::path dir = out.empty() ? default_out_dir() : fs::path(out);
    const auto start = std::chrono::steady_clock::now();
    Manifest m("eval", argv, dir);
    std::optional<ToyModel> model;
    if (!model_dir.empty()) {
      model = read_model(model_dir);
      m.input_dir(model_dir, is_model_file);
    }
    std::vector<VpqReport> reports;
    Json per_bundle = Json::array();
    double tc = 0.0;
    for (const auto& b : bundles) {
      const auto sample = read_bundle(b);
      m.input_dir(b, is_bundle_file);
      const auto pred = model ? predict_sequence(*model, sample, link_threshold) : as_prediction(sample);
      reports.push_back(vpq_report(pred, sample, windows, options));
      const double t = tc_metric(pred, sample.flows);
      tc += t;
      per_bundle.push_back({{"bundle", b}, {"report", to_json(reports.back())}, {"tc", t}});
    }
    const auto mean = mean_report(reports);
    Json doc{{"prediction", model ? "model" : "gt"},
             {"report", to_json(mean)},
             {"tc", tc / static_cast<double>(bundles.size())},
             {"bundles", per_bundle}};
    ensure_dir(dir);
    m.config = {{"windows", windows},
                {"stride", options.stride},
                {"void_class", void_class ? Json(*void_class) : Json(nullptr)},
                {"link_threshold", link_threshold}};
    const auto table = render_window_table({{model ? "model" : "gt", mean}});
    m.emit("vpq.json", dump_json(doc));
    m.emit("vpq.txt", table);
    m.write();
    os << table;
    es << "elapsed " << elapsed_since(start) << "\n";
    return kExitOk;
  }
};

struct ReportCommand {
  std::vector<std::string> files, labels;
  bool ablation = false;
  int num_seeds = 5;
  TrainFlags flags;
  std::string out;

  void add(CLI::App& app) {
    app.add_option("reports", files, "vpq.json files produced by eval or train");
    app.add_option("--label", labels, "Row labels, one per report");
    app.add_flag("--ablation", ablation, "Train and render the segment and pixel ablation grids");
    app.add_option("--seeds", num_seeds, "Number of suite seeds for --ablation");
    app.add_option("--out", out);
    flags.add(app);
  }

  int run(const std::vector<std::string>& argv, std::ostream& os, std::ostream& es) {
    const auto base = flags.resolve();
    if (!ablation && files.empty()) throw ArgumentError("report needs vpq.json inputs or --ablation");
    if (!labels.empty() && labels.size() != files.size()) throw ArgumentError("one --label per report required");
    if (num_seeds < 1) throw ConfigError("seeds must be >= 1");
    const fs::path dir = out.empty() ? default_out_dir() : fs::path(out);
    const auto start = std::chrono::steady_clock::now();
    Manifest m("report", argv, dir);
    std::string text;
    if (!files.empty()) {
      std::vector<std::pair<std::string, VpqReport>> rows;
      for (std::size_t i = 0; i < files.size(); ++i) {
        const auto doc = Json::parse(read_file(files[i]));
        m.input_file(files[i]);
        const auto label = labels.empty() ? fs::path(files[i]).parent_path().filename().string() : labels[i];
        rows.emplace_back(label, vpq_report_from_json(doc.at("report")));
      }
      text += render_window_table(rows);
    }
    Json ablation_doc;
    if (ablation) {
      std::vector<std::uint64_t> seeds;
      for (int s = 0; s < num_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
      m.seeds = seeds;
      const auto result = run_ablation(base, seeds);
      if (!text.empty()) text += "\n";
      for (const auto* grid : {&result.segment, &result.pixel}) {
        text += render_ablation_grid(*grid);
        text += std::string("combined row >= single-term rows: ") +
                (grid->combined_row_dominates() ? "pass" : "warn") + "\n\n";
      }
      ablation_doc = {{"seeds", seeds}, {"segment", to_json(result.segment)}, {"pixel", to_json(result.pixel)}};
      m.config = to_json(base);
    }
    ensure_dir(dir);
    m.emit("report.txt", text);
    if (ablation) m.emit("ablation.json", dump_json(ablation_doc));
    m.write();
    os << text;
    es << "elapsed " << elapsed_since(start) << "\n";
    return kExitOk;
  }
};

struct ReplayCommand {
  std::string manifest_path, out;

  void add(CLI::App& app) {
    app.add_option("manifest", manifest_path, "manifest.<verb>.json to re-run")->required();
    app.add_option("--out", out, "Re-run into this directory instead of the recorded one");
  }

  int run(std::ostream& os, std::ostream& es) {
    Json m;
    try {
      m = Json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("manifest: ") + e.what());
    }
    const fs::path cwd = m.at("cwd").get<std::string>();
    auto argv = m.at("argv").get<std::vector<std::string>>();
    if (argv.empty() || argv.front() == "replay") throw ArgumentError("manifest does not record a replayable command");
    const fs::path target = out.empty() ? fs::path(m.at("out_dir").get<std::string>()) : fs::absolute(out);

    for (const auto& [path, sum] : m.at("inputs").items()) {
      fs::path p = path;
      if (p.is_relative()) p = cwd / p;
      if (sha256_hex(read_file(p)) != sum.get<std::string>()) throw ConsistencyError("input changed: " + path);
    }
    // The recorded argv is reused verbatim unless it has to be redirected,
    // so a replay in place rewrites an identical manifest.
    std::vector<std::string> rerun;
    bool had_out = false;
    for (std::size_t i = 0; i < argv.size(); ++i) {
      const bool flag = argv[i] == "--out", joined = argv[i].rfind("--out=", 0) == 0;
      had_out = had_out || flag || joined;
      if (!out.empty() && (flag || joined)) {
        i += flag ? 1 : 0;
        continue;
      }
      rerun.push_back(argv[i]);
    }
    const fs::path recorded = m.at("out_dir").get<std::string>();
    const bool env_moved = !had_out && fs::absolute(cwd / default_out_dir()).lexically_normal() != recorded;
    if (!out.empty() || env_moved) {
      rerun.push_back("--out");
      rerun.push_back(target.generic_string());
    }

    const auto previous = fs::current_path();
    fs::current_path(cwd);
    int code;
    try {
      code = run_cli(rerun, os, es);
    } catch (...) {
      fs::current_path(previous);
      throw;
    }
    fs::current_path(previous);
    if (code != kExitOk) return code;

    std::size_t checked = 0;
    std::vector<std::string> mismatched;
    for (const auto& [name, sum] : m.at("outputs").items()) {
      ++checked;
      if (sha256_hex(read_file(target / name)) != sum.get<std::string>()) mismatched.push_back(name);
    }
    if (!mismatched.empty()) {
      std::string list;
      for (const auto& n : mismatched) list += " " + n;
      throw ConsistencyError("replay differs from the manifest:" + list);
    }
    os << "replay: " << checked << " artifacts reproduced bitwise\n";
    return kExitOk;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal-correspondence losses and VPQ evaluation on synthetic video", kToolName};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.require_subcommand(1);

  GenCommand gen;
  LossCommand loss;
  GradcheckCommand gradcheck;
  TrainCommand train;
  EvalCommand eval;
  ReportCommand report;
  ReplayCommand replay;
  auto* gen_app = app.add_subcommand("gen", "Generate a synthetic bundle");
  auto* loss_app = app.add_subcommand("loss", "Evaluate the losses on one frame pair");
  auto* gc_app = app.add_subcommand("gradcheck", "Finite-difference gradient suites");
  auto* train_app = app.add_subcommand("train", "Train the toy segmenter");
  auto* eval_app = app.add_subcommand("eval", "Score predictions with VPQ and TC");
  auto* report_app = app.add_subcommand("report", "Render per-k tables and ablation grids");
  auto* replay_app = app.add_subcommand("replay", "Re-run a manifest and verify its outputs");
  gen.add(*gen_app);
  loss.add(*loss_app);
  gradcheck.add(*gc_app);
  train.add(*train_app);
  eval.add(*eval_app);
  report.add(*report_app);
  replay.add(*replay_app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion& e) {
    out << e.what() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen_app->parsed()) return gen.run(args, out, err);
    if (loss_app->parsed()) return loss.run(args, out, err);
    if (gc_app->parsed()) return gradcheck.run(args, out, err);
    if (train_app->parsed()) return train.run(args, out, err);
    if (eval_app->parsed()) return eval.run(args, out, err);
    if (report_app->parsed()) return report.run(args, out, err);
    if (replay_app->parsed()) return replay.run(out, err);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const nlohmann::json::exception& e) {
    err << "error: malformed JSON: " << e.what() << "\n";
    return kExitValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitUsage;
}

}  // namespace vps
