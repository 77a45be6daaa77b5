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

#include <CLI11.hpp>

#include <iostream>

namespace {

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const std::string item = s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw CLI::ValidationError("not a number: '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qcal: calibration and scenario runner for the virtual lab"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "Config file (default: $MAGLAB_CONFIG, ./maglab.json)");
  app.add_option("--seed", seed, "Override the master seed");

  auto* sc = app.add_subcommand("scenario", "Run a named scenario and write its bundle");
  std::string name;
  std::string out_root;
  bool list = false;
  sc->add_option("name", name, "Scenario name");
  sc->add_option("--out", out_root, "Bundle root (default: data_dir)");
  sc->add_flag("--list", list, "List scenarios");

  auto* ss = app.add_subcommand("sweet-spot", "Search the coherence sweet spot");
  std::string range = "-120,0";
  std::string axis = "x";
  int budget = 60;
  double solenoid = 0.025;
  std::string qubit;
  ss->add_option("--range", range, "Search range A,B in mm (write --range=-120,0 for negative values)");
  ss->add_option("--axis", axis, "Stage axis")->check(CLI::IsMember({"x", "y", "z"}));
  ss->add_option("--budget", budget, "Probe budget")->check(CLI::PositiveNumber);
  ss->add_option("--solenoid", solenoid, "Solenoid field in tesla");
  ss->add_option("--qubit", qubit, "Qubit name");

  auto* rbc = app.add_subcommand("rb", "Randomized benchmarking at the sweet spot");
  std::string lengths = "1,2,4,8,16,32,48,64,80,96,112,128";
  int randomizations = 20;
  long shots = 1000;
  double f_native = 0.9998;
  rbc->add_option("--lengths", lengths, "Sequence lengths L1,L2,...");
  rbc->add_option("--randomizations", randomizations)->check(CLI::PositiveNumber);
  rbc->add_option("--shots", shots)->check(CLI::PositiveNumber);
  rbc->add_option("--f-native", f_native, "Injected native-gate fidelity")->check(CLI::Range(0.5, 1.0));

  auto* ex = app.add_subcommand("export", "Export a run trace as CSV");
  std::uint64_t run_id = 0;
  std::string out_path;
  ex->add_option("--run", run_id, "Run id")->required();
  ex->add_option("--out", out_path, "Output CSV path")->required();

  auto* pl = app.add_subcommand("plot", "Render a run trace or a scenario bundle as SVG");
  std::optional<std::uint64_t> plot_run;
  std::string plot_out;
  std::string bundle;
  pl->add_option("--run", plot_run, "Run id");
  pl->add_option("--out", plot_out, "Output SVG path");
  pl->add_option("--bundle", bundle, "Scenario bundle directory (writes map.svg)");

  CLI11_PARSE(app, argc, argv);

  try {
    qcal::Common c;
    std::optional<std::filesystem::path> path;
    if (!config_path.empty()) path = config_path;
    c.config = maglab::resolve_config(path, &c.source);
    c.seed = seed;

    if (*sc) {
      if (list) return qcal::list_scenarios(c, std::cout);
      if (name.empty()) throw CLI::ValidationError("scenario name required (or --list)");
      std::optional<std::filesystem::path> root;
      if (!out_root.empty()) root = out_root;
      return qcal::run_scenario(c, name, root, std::cout);
    }
    if (*ss) {
      const auto r = parse_doubles(range);
      if (r.size() != 2) throw CLI::ValidationError("--range needs two values A,B");
      return qcal::sweet_spot(c, r[0], r[1], axis, budget, solenoid, qubit, std::cout);
    }
    if (*rbc) {
      std::vector<int> ls;
      for (double v : parse_doubles(lengths)) {
        if (v < 1 || v != static_cast<int>(v)) throw CLI::ValidationError("RB lengths must be positive integers");
        ls.push_back(static_cast<int>(v));
      }
      return qcal::rb(c, ls, randomizations, shots, f_native, std::cout);
    }
    if (*ex) return qcal::export_run(c, run_id, out_path, std::cout);
    if (*pl) {
      if (!bundle.empty()) return qcal::plot_bundle(bundle, std::cout);
      if (!plot_run) throw CLI::ValidationError("plot needs --run ID or --bundle DIR");
      std::optional<std::filesystem::path> p;
      if (!plot_out.empty()) p = plot_out;
      return qcal::plot_run(c, *plot_run, p, std::cout);
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "qcal: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
