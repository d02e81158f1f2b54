#include "vps/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "vps/errors.hpp"

namespace vps {

namespace {

constexpr char kMagic[4] = {'V', 'P', 'S', 'T'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::string_view b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(b[off + i])) << (8 * i);
  return v;
}

std::uint16_t get_u16(std::string_view b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                    (static_cast<unsigned char>(b[off + 1]) << 8));
}

std::string header(const std::vector<std::size_t>& shape) {
  std::string out(kMagic, 4);
  put_u16(out, kVpstVersion);
  if (shape.size() > 0xffff) throw IoError("vpst: rank too large");
  put_u16(out, static_cast<std::uint16_t>(shape.size()));
  for (auto d : shape) {
    if (d > 0xffffffffULL) throw IoError("vpst: dimension too large");
    put_u32(out, static_cast<std::uint32_t>(d));
  }
  return out;
}

// Returns shape and payload offset.
std::pair<std::vector<std::size_t>, std::size_t> parse_header(std::string_view b) {
  if (b.size() < 8 || std::memcmp(b.data(), kMagic, 4) != 0) throw IoError("vpst: bad magic");
  const auto version = get_u16(b, 4);
  if (version != kVpstVersion) throw IoError("vpst: unsupported version " + std::to_string(version));
  const std::size_t rank = get_u16(b, 6);
  if (b.size() < 8 + 4 * rank) throw IoError("vpst: truncated header");
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(b, 8 + 4 * i);
    count *= shape[i];
  }
  const std::size_t off = 8 + 4 * rank;
  if (b.size() != off + 4 * count) throw IoError("vpst: payload size does not match shape");
  return {shape, off};
}

}  // namespace

std::string encode_vpst(const RealTensor& t) {
  std::string out = header(t.shape());
  out.reserve(out.size() + 4 * t.size());
  for (double v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

std::string encode_vpst(const LabelTensor& t) {
  std::string out = header(t.shape());
  out.reserve(out.size() + 4 * t.size());
  for (auto v : t.values()) put_u32(out, static_cast<std::uint32_t>(v));
  return out;
}

RealTensor decode_vpst_real(std::string_view bytes) {
  auto [shape, off] = parse_header(bytes);
  RealTensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = std::bit_cast<float>(get_u32(bytes, off + 4 * i));
  return t;
}

LabelTensor decode_vpst_labels(std::string_view bytes) {
  auto [shape, off] = parse_header(bytes);
  LabelTensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<std::int32_t>(get_u32(bytes, off + 4 * i));
  return t;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
    throw IoError("sha256 failed");
  std::ostringstream ss;
  for (unsigned int i = 0; i < len; ++i) ss << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return ss.str();
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

Json to_json(const SceneConfig& c) {
  return Json{{"width", c.width},
              {"height", c.height},
              {"num_frames", c.num_frames},
              {"num_things", c.num_things},
              {"num_stuff_classes", c.num_stuff_classes},
              {"num_thing_classes", c.num_thing_classes},
              {"max_speed", c.max_speed},
              {"seed", c.seed},
              {"noise_std", c.noise_std}};
}

SceneConfig scene_config_from_json(const Json& j) {
  try {
    SceneConfig c;
    c.width = j.at("width");
    c.height = j.at("height");
    c.num_frames = j.at("num_frames");
    c.num_things = j.at("num_things");
    c.num_stuff_classes = j.at("num_stuff_classes");
    c.num_thing_classes = j.at("num_thing_classes");
    c.max_speed = j.at("max_speed");
    c.seed = j.at("seed");
    c.noise_std = j.at("noise_std");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("scene config: ") + e.what());
  }
}

Json to_json(const SegmentRegistry& r) {
  Json out = Json::array();
  for (const auto& e : r.entries())
    out.push_back({{"track_id", e.track_id}, {"class_id", e.class_id}, {"is_thing", e.is_thing}});
  return out;
}

SegmentRegistry registry_from_json(const Json& j) {
  try {
    std::vector<RegistryEntry> entries;
    for (const auto& e : j) entries.push_back({e.at("track_id"), e.at("class_id"), e.at("is_thing")});
    return SegmentRegistry(std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("registry: ") + e.what());
  }
}

std::string contrast_mode_name(ContrastMode m) { return m == ContrastMode::SimClr ? "simclr" : "strict"; }

ContrastMode parse_contrast_mode(const std::string& s) {
  if (s == "simclr") return ContrastMode::SimClr;
  if (s == "strict") return ContrastMode::StrictEq2;
  throw ConfigError("contrast_mode must be simclr or strict, got '" + s + "'");
}

std::string reduction_name(Reduction r) { return r == Reduction::Mean ? "mean" : "sum"; }

Reduction parse_reduction(const std::string& s) {
  if (s == "mean") return Reduction::Mean;
  if (s == "sum") return Reduction::Sum;
  throw ConfigError("warp_reduction must be mean or sum, got '" + s + "'");
}

Json to_json(const TrainConfig& c) {
  return Json{{"lambda_segment", c.lambda_segment},
              {"lambda_pixel", c.lambda_pixel},
              {"tau", c.tau},
              {"alpha", c.alpha},
              {"delta_range", c.delta_range},
              {"steps", c.steps},
              {"learning_rate", c.learning_rate},
              {"seed", c.seed},
              {"contrast_mode", contrast_mode_name(c.contrast_mode)},
              {"enabled_losses", c.enabled_losses.to_string()},
              {"feature_dim", c.feature_dim},
              {"downsample", c.downsample},
              {"warp_reduction", reduction_name(c.warp_reduction)},
              {"flow_noise", c.flow_noise},
              {"link_threshold", c.link_threshold}};
}

TrainConfig train_config_from_json(const Json& j) {
  try {
    TrainConfig c;
    c.lambda_segment = j.at("lambda_segment");
    c.lambda_pixel = j.at("lambda_pixel");
    c.tau = j.at("tau");
    c.alpha = j.at("alpha");
    c.delta_range = j.at("delta_range").get<std::vector<int>>();
    c.steps = j.at("steps");
    c.learning_rate = j.at("learning_rate");
    c.seed = j.at("seed");
    c.contrast_mode = parse_contrast_mode(j.at("contrast_mode"));
    c.enabled_losses = EnabledLosses::parse(j.at("enabled_losses"));
    c.feature_dim = j.at("feature_dim");
    c.downsample = j.at("downsample");
    c.warp_reduction = parse_reduction(j.at("warp_reduction"));
    c.flow_noise = j.at("flow_noise");
    c.link_threshold = j.at("link_threshold");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("train config: ") + e.what());
  }
}

Json to_json(const ScoreTriple& s) {
  auto opt = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"vpq", opt(s.vpq)}, {"vpq_thing", opt(s.thing)}, {"vpq_stuff", opt(s.stuff)}};
}

Json to_json(const VpqReport& r) {
  Json windows = Json::array();
  for (const auto& [k, s] : r.per_window) {
    Json w = to_json(s);
    w["k"] = k;
    windows.push_back(std::move(w));
  }
  return Json{{"window_set", r.window_set}, {"per_window", windows}, {"average", to_json(r.average)}};
}

ScoreTriple score_triple_from_json(const Json& j) {
  auto opt = [&](const char* key) {
    const auto& v = j.at(key);
    return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
  };
  return {opt("vpq"), opt("vpq_thing"), opt("vpq_stuff")};
}

VpqReport vpq_report_from_json(const Json& j) {
  try {
    VpqReport r;
    r.window_set = j.at("window_set").get<std::vector<int>>();
    for (const auto& w : j.at("per_window")) r.per_window[w.at("k").get<int>()] = score_triple_from_json(w);
    r.average = score_triple_from_json(j.at("average"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("vpq report: ") + e.what());
  }
}

namespace {

std::string indexed(const char* prefix, std::size_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%04zu.vpst", prefix, i);
  return buf;
}

}  // namespace

std::vector<std::string> write_bundle(const VideoSample& sample, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());

  Json vis = Json::array();
  for (const auto& v : sample.visibility)
    vis.push_back({{"visible_tracks", v.visible_tracks}, {"vanishing_pixels", v.vanishing_pixels}});
  Json scene{{"config", to_json(sample.config)},
             {"registry", to_json(sample.registry)},
             {"num_frames", sample.num_frames()},
             {"visibility", vis}};

  std::vector<std::string> names;
  auto put = [&](const std::string& name, std::string_view bytes) {
    write_file_atomic(dir / name, bytes);
    names.push_back(name);
  };
  put("scene.json", dump_json(scene));
  for (std::size_t t = 0; t < sample.num_frames(); ++t) {
    put(indexed("frame", t), encode_vpst(sample.frames[t]));
    const auto& p = sample.panoptic[t];
    LabelTensor stacked({2, p.height(), p.width()});
    std::copy(p.semantic.values().begin(), p.semantic.values().end(), stacked.values().begin());
    std::copy(p.instance.values().begin(), p.instance.values().end(),
              stacked.values().begin() + static_cast<std::ptrdiff_t>(p.semantic.size()));
    put(indexed("panoptic", t), encode_vpst(stacked));
  }
  for (std::size_t t = 0; t < sample.flows.size(); ++t)
    put(indexed("flow", t), encode_vpst(sample.flows[t].data));
  std::sort(names.begin(), names.end());
  return names;
}

VideoSample read_bundle(const fs::path& dir) {
  const fs::path scene_path = dir / "scene.json";
  if (!fs::exists(scene_path)) throw IoError("not a bundle (missing scene.json): " + dir.string());
  Json scene;
  try {
    scene = Json::parse(read_file(scene_path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("scene.json: ") + e.what());
  }
  VideoSample s;
  s.config = scene_config_from_json(scene.at("config"));
  s.registry = registry_from_json(scene.at("registry"));
  const std::size_t n = scene.at("num_frames");
  const std::size_t h = static_cast<std::size_t>(s.config.height), w = static_cast<std::size_t>(s.config.width);
  for (const auto& v : scene.at("visibility")) {
    s.visibility.push_back({v.at("visible_tracks").get<std::vector<std::int32_t>>(),
                            v.at("vanishing_pixels").get<std::vector<std::uint32_t>>()});
  }
  for (std::size_t t = 0; t < n; ++t) {
    auto frame = decode_vpst_real(read_file(dir / indexed("frame", t)));
    if (frame.shape() != std::vector<std::size_t>{h, w, 3}) throw IoError("frame " + std::to_string(t) + ": bad shape");
    s.frames.push_back(std::move(frame));
    const auto stacked = decode_vpst_labels(read_file(dir / indexed("panoptic", t)));
    if (stacked.shape() != std::vector<std::size_t>{2, h, w})
      throw IoError("panoptic " + std::to_string(t) + ": bad shape");
    PanopticMap p(h, w);
    std::copy(stacked.values().begin(), stacked.values().begin() + static_cast<std::ptrdiff_t>(h * w),
              p.semantic.values().begin());
    std::copy(stacked.values().begin() + static_cast<std::ptrdiff_t>(h * w), stacked.values().end(),
              p.instance.values().begin());
    s.panoptic.push_back(std::move(p));
  }
  for (std::size_t t = 0; t + 1 < n; ++t) {
    FlowField f;
    f.data = decode_vpst_real(read_file(dir / indexed("flow", t)));
    if (f.data.shape() != std::vector<std::size_t>{h, w, 2}) throw IoError("flow " + std::to_string(t) + ": bad shape");
    s.flows.push_back(std::move(f));
  }
  return s;
}

std::vector<std::string> write_model(const ToyModel& model, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
  RealTensor params({model.parameter_count()});
  std::copy(model.parameters().begin(), model.parameters().end(), params.values().begin());
  write_file_atomic(dir / "model.vpst", encode_vpst(params));
  write_file_atomic(dir / "model.json",
                    dump_json({{"feature_dim", model.feature_dim()}, {"binding", to_json(model.binding())}}));
  return {"model.json", "model.vpst"};
}

ToyModel read_model(const fs::path& dir) {
  Json meta;
  try {
    meta = Json::parse(read_file(dir / "model.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("model.json: ") + e.what());
  }
  ToyModel model(meta.at("feature_dim").get<std::size_t>(), registry_from_json(meta.at("binding")));
  const auto params = decode_vpst_real(read_file(dir / "model.vpst"));
  if (params.size() != model.parameter_count())
    throw IoError("model.vpst: expected " + std::to_string(model.parameter_count()) + " parameters");
  std::copy(params.values().begin(), params.values().end(), model.parameters().begin());
  return model;
}

namespace {

std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string trainlog_csv(const TrainLog& log) {
  std::string out = "step,task_loss_ce,segment_loss,warp_loss,tube_loss,total\n";
  for (const auto& r : log.records) {
    out += std::to_string(r.step) + "," + shortest(r.task_loss) + "," + shortest(r.segment_loss) + "," +
           shortest(r.warp_loss) + "," + shortest(r.tube_loss) + "," + shortest(r.total) + "\n";
  }
  return out;
}

Json trainlog_json(const TrainLog& log) {
  Json j{{"config", to_json(log.config)},
         {"task_loss", "per-pixel cross-entropy"},
         {"steps", log.records.size()},
         {"skipped_segment_steps", log.skipped_segment_steps}};
  if (!log.records.empty()) {
    const auto& first = log.records.front();
    const auto& last = log.records.back();
    j["first_total"] = first.total;
    j["final"] = {{"task_loss", last.task_loss},
                  {"segment_loss", last.segment_loss},
                  {"warp_loss", last.warp_loss},
                  {"tube_loss", last.tube_loss},
                  {"total", last.total}};
  }
  if (!log.report.window_set.empty()) {
    j["held_out"] = to_json(log.report);
    j["tc"] = log.tc;
  }
  return j;
}

}  // namespace vps
