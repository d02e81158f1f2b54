#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vps/io.hpp"
#include "vps/trainer.hpp"
#include "vps/vpq.hpp"

namespace vps {

// "50.2 / 44.7 / 55.0" (scores x100, one decimal, "-" for an empty part).
std::string format_cell(const ScoreTriple& s);

// One row per labelled report; one column per window plus the average.
std::string render_window_table(const std::vector<std::pair<std::string, VpqReport>>& rows);

struct AblationRow {
  std::string label;
  EnabledLosses losses;
  std::vector<ScoreTriple> per_seed;  // held-out average over windows
  std::vector<double> tc_per_seed;
  ScoreTriple mean;
  double tc_mean = 0.0;
};

struct AblationGrid {
  std::string title;
  std::string first_column;
  std::string second_column;
  bool show_tc = false;
  std::vector<AblationRow> rows;  // none, first only, second only, both

  // Soft check: the both-on row scores at least every single-term row in
  // mean VPQ.
  bool combined_row_dominates() const;
};

struct AblationResult {
  std::vector<std::uint64_t> seeds;
  AblationGrid segment;
  AblationGrid pixel;
};

// Trains every distinct row configuration once per seed on the standard
// suite. `base` supplies everything but the enabled losses.
AblationResult run_ablation(const TrainConfig& base, const std::vector<std::uint64_t>& seeds);

std::string render_ablation_grid(const AblationGrid& grid);
Json to_json(const AblationGrid& grid);

}  // namespace vps
