#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vps/model.hpp"
#include "vps/scene.hpp"
#include "vps/trainer.hpp"
#include "vps/vpq.hpp"

namespace vps {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline constexpr std::uint16_t kVpstVersion = 1;

// VPST tensor encoding: "VPST", u16 version, u16 rank, u32 dims, then a
// little-endian row-major payload (f32 for real tensors, i32 for labels).
std::string encode_vpst(const RealTensor& t);
std::string encode_vpst(const LabelTensor& t);
RealTensor decode_vpst_real(std::string_view bytes);
LabelTensor decode_vpst_labels(std::string_view bytes);

std::string read_file(const fs::path& path);
// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view bytes);

std::string sha256_hex(std::string_view bytes);

// Pretty-printed JSON with a trailing newline.
std::string dump_json(const Json& j);

Json to_json(const SceneConfig& c);
SceneConfig scene_config_from_json(const Json& j);
Json to_json(const SegmentRegistry& r);
SegmentRegistry registry_from_json(const Json& j);
Json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const Json& j);
Json to_json(const ScoreTriple& s);
Json to_json(const VpqReport& r);
ScoreTriple score_triple_from_json(const Json& j);
VpqReport vpq_report_from_json(const Json& j);

std::string contrast_mode_name(ContrastMode m);
ContrastMode parse_contrast_mode(const std::string& s);
std::string reduction_name(Reduction r);
Reduction parse_reduction(const std::string& s);

// Bundle directory: scene.json plus frame_/panoptic_/flow_####.vpst.
// Returns the written file names relative to `dir`, sorted.
std::vector<std::string> write_bundle(const VideoSample& sample, const fs::path& dir);
VideoSample read_bundle(const fs::path& dir);

// model.vpst (flat parameter vector) and model.json (feature dim, binding).
std::vector<std::string> write_model(const ToyModel& model, const fs::path& dir);
ToyModel read_model(const fs::path& dir);

std::string trainlog_csv(const TrainLog& log);
Json trainlog_json(const TrainLog& log);

}  // namespace vps
