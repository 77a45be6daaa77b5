// Copyright 2026 The maglab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "commands.hpp"

#include "maglab/archive.hpp"
#include "maglab/calibrate.hpp"
#include "maglab/plot.hpp"
#include "maglab/scenario.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace qcal {

using namespace maglab;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

void print_result(const calibrate::ScenarioResult& r, std::ostream& out) {
  out << r.verdict;
  if (!r.bundle_dir.empty()) out << "bundle " << r.bundle_dir.string() << '\n';
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double cell(const std::string& s) {
  if (s.empty()) return std::nan("");
  return std::stod(s);
}

}  // namespace

int list_scenarios(const Common& c, std::ostream& out) {
  for (const auto& n : calibrate::scenario_names(c.config)) {
    const auto d = calibrate::find_scenario(c.config, n);
    out << std::left << std::setw(24) << n << std::setw(18) << d.kind << d.description << '\n';
  }
  return 0;
}

int run_scenario(const Common& c, const std::string& name, const std::optional<fs::path>& out_root, std::ostream& out) {
  labd::Archive archive(c.config);
  calibrate::ScenarioRunOptions o;
  o.seed = c.seed;
  o.out_root = out_root;
  o.observer = archive.observer();
  const auto r = calibrate::run_scenario(c.config, name, o);
  print_result(r, out);
  return r.passed ? 0 : 1;
}

int sweet_spot(const Common& c, double lo, double hi, const std::string& axis, int budget, double solenoid_t,
               const std::string& qubit, std::ostream& out) {
  const auto def = calibrate::find_scenario(c.config, "fig4_sweet_spot");
  LabConfig cfg = c.config;
  cfg.active_qubit = qubit.empty() ? def.qubit : qubit;
  cfg.qubit(cfg.active_qubit);
  labd::Archive archive(cfg);
  virtlab::World world = cfg.make_world();
  world.solenoid.setpoint_t = solenoid_t;
  world.solenoid.validate();
  virtlab::Lab lab(std::move(world), virtlab::derive_seed(c.seed.value_or(cfg.seed), "sweet-spot"), "qcal");
  lab.set_scenario("sweet-spot");
  lab.set_observer(archive.observer());
  lab.move_to(def.base);

  calibrate::SweetSpotOptions o;
  o.axis = parse_axis(axis);
  o.lo_mm = std::min(lo, hi);
  o.hi_mm = std::max(lo, hi);
  o.budget = budget;
  o.spectroscopy = def.spectroscopy;
  if (cfg.resonator.enabled) o.resonance.exclude_hz.push_back(cfg.resonator.frequency_hz);
  const auto res = calibrate::find_sweet_spot(lab, o, [&](const calibrate::Probe& p, double blo, double bhi) {
    out << "probe " << std::fixed << std::setprecision(3) << p.position_mm << " mm  ";
    if (p.f_l_hz) out << std::setprecision(4) << *p.f_l_hz / 1e6 << " MHz";
    else out << "no line";
    out << "  bracket [" << std::setprecision(3) << blo << ", " << bhi << "]\n";
  });
  out << std::setprecision(6) << std::defaultfloat;
  out << "x_star_mm " << res.x_star_mm << '\n'
      << "f_l_min_mhz " << res.f_l_min_hz / 1e6 << '\n'
      << "probes " << res.probes.size() << '\n'
      << "iterations " << res.iterations << '\n'
      << "truth_residual_angle_deg " << res.residual_angle_deg << '\n';
  return 0;
}

int rb(const Common& c, const std::vector<int>& lengths, int randomizations, long shots, double f_native,
       std::ostream& out) {
  auto def = calibrate::find_scenario(c.config, "rb_sweet_spot");
  if (!lengths.empty()) def.rb.lengths = lengths;
  def.rb.randomizations = randomizations;
  def.rb.shots = shots;
  def.rb.f_native = f_native;
  labd::Archive archive(c.config);
  calibrate::ScenarioRunOptions o;
  o.seed = c.seed;
  o.observer = archive.observer();
  const auto r = calibrate::run_scenario(c.config, def, o);
  print_result(r, out);
  return r.passed ? 0 : 1;
}

int export_run(const Common& c, std::uint64_t id, const fs::path& path, std::ostream& out) {
  labd::RunStore store(c.config.data_dir);
  store.export_csv(id, path);
  out << "wrote " << path.string() << '\n';
  return 0;
}

int plot_run(const Common& c, std::uint64_t id, const std::optional<fs::path>& path, std::ostream& out) {
  labd::RunStore store(c.config.data_dir);
  const auto rec = store.load(id);
  const fs::path p = path.value_or(c.config.data_dir / "plots" / ("run-" + std::to_string(id) + ".svg"));
  write_text(p, labd::render_svg(labd::trace_plot(rec)));
  out << "wrote " << p.string() << '\n';
  return 0;
}

int plot_bundle(const fs::path& dir, std::ostream& out) {
  std::ifstream in(dir / "map.csv");
  if (!in) throw NotFoundError("no map.csv in " + dir.string());
  std::string line;
  std::getline(in, line);
  const auto header = split(line, ',');
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    for (const auto& s : split(line, ',')) r.push_back(cell(s));
    rows.push_back(std::move(r));
  }
  auto column = [&](const std::string& name) {
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.at(col.at(name)));
    return v;
  };

  labd::PlotSpec spec;
  spec.title = dir.parent_path().filename().string();
  if (col.count("b_tesla")) {
    spec.x_label = "stage z (mm)";
    spec.y_label = "|B| (mT)";
    labd::Series s{"|B|", column("z_mm"), column("b_tesla"), true};
    for (double& v : s.y) v *= 1e3;
    spec.series.push_back(std::move(s));
  } else if (col.count("mean_p")) {
    spec.x_label = "sequence length (Cliffords)";
    spec.y_label = "blockade probability";
    spec.series.push_back({"mean", column("length"), column("mean_p"), true});
  } else {
    const char* axes[] = {"x_mm", "y_mm", "z_mm"};
    std::vector<int> moving;
    double best_span = -1.0;
    int best = 0;
    for (int a = 0; a < 3; ++a) {
      const auto v = column(axes[a]);
      const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
      const double span = v.empty() ? 0.0 : *mx - *mn;
      if (span > 1e-9) moving.push_back(a);
      if (span > best_span) best_span = span, best = a;
    }
    const bool by_index = moving.size() > 1;
    spec.x_label = by_index ? "point index" : std::string("stage ") + "xyz"[best] + " (mm)";
    spec.y_label = "f_L (MHz)";
    std::map<int, labd::Series> runs;
    for (const auto& r : rows) {
      const int run = static_cast<int>(r.at(col.at("run")));
      auto& s = runs[run];
      s.label = "run " + std::to_string(run);
      s.markers = true;
      s.x.push_back(by_index ? r.at(col.at("index")) : r.at(col.at(axes[best])));
      s.y.push_back(r.at(col.at("f_l_hz")) / 1e6);
    }
    for (auto& [k, s] : runs) spec.series.push_back(std::move(s));
  }
  const fs::path p = dir / "map.svg";
  write_text(p, labd::render_svg(spec));
  out << "wrote " << p.string() << '\n';
  return 0;
}

}  // namespace qcal
