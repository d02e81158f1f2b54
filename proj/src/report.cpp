#include "vps/report.hpp"

#include <cstdio>
#include <map>

#include "vps/errors.hpp"

namespace vps {

namespace {

std::string percent(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  // Column widths count code points so superscripts align.
  std::size_t n = 0;
  for (unsigned char c : s) n += (c & 0xC0) != 0x80;
  return n >= width ? s : s + std::string(width - n, ' ');
}

std::string render_rows(const std::vector<std::vector<std::string>>& cells, std::size_t header_rows = 1) {
  std::vector<std::size_t> widths;
  for (const auto& row : cells) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::size_t n = 0;
      for (unsigned char c : row[i]) n += (c & 0xC0) != 0x80;
      widths[i] = std::max(widths[i], n);
    }
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i) line += " | ";
      line += pad(cells[r][i], widths[i]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
    if (r + 1 == header_rows) {
      std::string rule;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        if (i) rule += "-+-";
        rule += std::string(widths[i], '-');
      }
      out += rule + "\n";
    }
  }
  return out;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& v) {
  double s = 0;
  int n = 0;
  for (const auto& x : v) {
    if (x) {
      s += *x;
      ++n;
    }
  }
  return n ? std::optional<double>(s / n) : std::nullopt;
}

}  // namespace

std::string format_cell(const ScoreTriple& s) {
  return percent(s.vpq) + " / " + percent(s.thing) + " / " + percent(s.stuff);
}

std::string render_window_table(const std::vector<std::pair<std::string, VpqReport>>& rows) {
  if (rows.empty()) throw ArgumentError("render_window_table: no rows");
  const auto& windows = rows.front().second.window_set;
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"Temporal window size"};
  for (int k : windows) head.push_back("k = " + std::to_string(k));
  head.push_back("VPQ");
  cells.push_back(head);
  std::vector<std::string> sub{""};
  for (std::size_t i = 0; i <= windows.size(); ++i) sub.push_back("VPQ / VPQᵀʰ / VPQˢᵗ");
  cells.push_back(sub);
  for (const auto& [label, report] : rows) {
    if (report.window_set != windows) throw ArgumentError("render_window_table: rows use different windows");
    std::vector<std::string> row{label};
    for (int k : windows) row.push_back(format_cell(report.per_window.at(k)));
    row.push_back(format_cell(report.average));
    cells.push_back(row);
  }
  return render_rows(cells, 2);
}

bool AblationGrid::combined_row_dominates() const {
  if (rows.size() != 4 || !rows[3].mean.vpq) return false;
  for (std::size_t i = 1; i < 3; ++i) {
    if (rows[i].mean.vpq && *rows[i].mean.vpq > *rows[3].mean.vpq) return false;
  }
  return true;
}

AblationResult run_ablation(const TrainConfig& base, const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ConfigError("ablation: no seeds");
  auto losses = [](bool sem, bool inst, bool warp, bool tube) { return EnabledLosses{sem, inst, warp, tube}; };
  AblationResult result;
  result.seeds = seeds;
  result.segment = {"Segment-level matching", "L_contra_inst", "L_contra_sem", false,
                    {{"", losses(false, false, false, false), {}, {}, {}, 0.0},
                     {"", losses(false, true, false, false), {}, {}, {}, 0.0},
                     {"", losses(true, false, false, false), {}, {}, {}, 0.0},
                     {"L_segment", losses(true, true, false, false), {}, {}, {}, 0.0}}};
  result.pixel = {"Pixel-level matching", "L_warp", "L_tube", true,
                  {{"", losses(false, false, false, false), {}, {}, {}, 0.0},
                   {"", losses(false, false, true, false), {}, {}, {}, 0.0},
                   {"", losses(false, false, false, true), {}, {}, {}, 0.0},
                   {"L_pixel", losses(false, false, true, true), {}, {}, {}, 0.0}}};

  for (auto seed : seeds) {
    const auto suite = standard_suite(seed);
    std::vector<VideoSample> train, held_out;
    for (const auto& c : suite.train) train.push_back(generate_scene(c));
    for (const auto& c : suite.held_out) held_out.push_back(generate_scene(c));
    std::map<std::string, std::pair<ScoreTriple, double>> cache;
    for (auto* grid : {&result.segment, &result.pixel}) {
      for (auto& row : grid->rows) {
        const auto key = row.losses.to_string();
        auto it = cache.find(key);
        if (it == cache.end()) {
          TrainConfig config = base;
          config.seed = seed;
          config.enabled_losses = row.losses;
          auto trained = train_model(config, train);
          evaluate_model(trained.model, held_out, trained.log, config.link_threshold);
          it = cache.emplace(key, std::make_pair(trained.log.report.average, trained.log.tc)).first;
        }
        row.per_seed.push_back(it->second.first);
        row.tc_per_seed.push_back(it->second.second);
      }
    }
  }
  for (auto* grid : {&result.segment, &result.pixel}) {
    for (auto& row : grid->rows) {
      std::vector<std::optional<double>> v, t, s;
      for (const auto& p : row.per_seed) {
        v.push_back(p.vpq);
        t.push_back(p.thing);
        s.push_back(p.stuff);
      }
      row.mean = {mean_of(v), mean_of(t), mean_of(s)};
      double tc = 0;
      for (double x : row.tc_per_seed) tc += x;
      row.tc_mean = tc / static_cast<double>(row.tc_per_seed.size());
    }
  }
  return result;
}

std::string render_ablation_grid(const AblationGrid& grid) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{"Loss", grid.first_column, grid.second_column, "VPQ", "VPQᵀʰ", "VPQˢᵗ"};
  if (grid.show_tc) head.push_back("TC (implemented variant)");
  cells.push_back(head);
  for (std::size_t i = 0; i < grid.rows.size(); ++i) {
    const auto& row = grid.rows[i];
    const bool first = i == 1 || i == 3, second = i == 2 || i == 3;
    std::vector<std::string> r{row.label, first ? "x" : "", second ? "x" : "", percent(row.mean.vpq),
                               percent(row.mean.thing), percent(row.mean.stuff)};
    if (grid.show_tc) r.push_back(percent(row.tc_mean));
    cells.push_back(r);
  }
  return grid.title + "\n" + render_rows(cells);
}

Json to_json(const AblationGrid& grid) {
  Json rows = Json::array();
  for (const auto& row : grid.rows) {
    Json seeds = Json::array();
    for (std::size_t i = 0; i < row.per_seed.size(); ++i) {
      Json s = to_json(row.per_seed[i]);
      if (grid.show_tc) s["tc"] = row.tc_per_seed[i];
      seeds.push_back(std::move(s));
    }
    Json r{{"label", row.label},
           {"enabled_losses", row.losses.to_string()},
           {"mean", to_json(row.mean)},
           {"per_seed", seeds}};
    if (grid.show_tc) r["tc_mean"] = row.tc_mean;
    rows.push_back(std::move(r));
  }
  return Json{{"title", grid.title},
              {"rows", rows},
              {"combined_row_dominates", grid.combined_row_dominates()}};
}

}  // namespace vps
