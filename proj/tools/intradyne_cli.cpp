// intradyne: command-line runner for the pilot-assisted CV-QKD link simulator.
//
//   intradyne run <config|preset>
//   intradyne sweep <config> --axis NAME --values a,b,c
//   intradyne ab-suppression <config> --values inf,0
//   intradyne calibrate <config>
//   intradyne presets
//
// Exit codes: 0 ok, 1 other failure, 2 config error, 3 sync failure,
// 4 invalid calibration.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "intradyne/intradyne.hpp"

namespace {

using namespace intradyne;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string format;
  std::optional<std::size_t> blocks;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("config", c.config, "config file (.toml/.json) or preset name")->required();
  cmd->add_option("--seed", c.seed, "master seed (overrides experiment.seed)");
  cmd->add_option("--out-dir", c.out_dir, "directory for reports and artifacts");
  cmd->add_option("--format", c.format, "report format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--blocks", c.blocks, "number of data blocks (0: calibration only)");
  cmd->add_option("--threads", c.threads, "worker threads (0: all cores)");
}

ExperimentConfig load(const Common& c) {
  auto cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.blocks) cfg.blocks = *c.blocks;
  if (c.threads) cfg.threads = *c.threads;
  if (!c.out_dir.empty()) cfg.out.out_dir = c.out_dir;
  if (c.format == "csv") cfg.out.format = OutputFormat::csv;
  if (c.format == "json") cfg.out.format = OutputFormat::json;
  cfg.validate();
  return cfg;
}

std::vector<double> parse_values(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) continue;
    item = item.substr(b, item.find_last_not_of(" \t") - b + 1);
    if (item == "inf" || item == "+inf") {
      out.push_back(infinity);
      continue;
    }
    if (item == "-inf") {
      out.push_back(-infinity);
      continue;
    }
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw config_error("cannot parse value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

/// Report text goes to stdout and, with an output directory, to report.<fmt>.
void emit(const ExperimentConfig& cfg, const std::string& text) {
  std::cout << text;
  if (!cfg.out.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out.out_dir);
    write_text(std::filesystem::path(cfg.out.out_dir) /
                   (cfg.out.format == OutputFormat::csv ? "report.csv" : "report.json"),
               text);
  }
}

std::string calibration_text(const ExperimentConfig& cfg, const ExperimentResult& r) {
  std::ostringstream os;
  if (cfg.out.format == OutputFormat::csv) write_calibration_csv(os, r.label, r.calibration);
  else os << dump_json(calibration_json(r.label, r.calibration));
  return os.str();
}

int cmd_run(const Common& c) {
  const auto cfg = load(c);
  const auto r = run_experiment(cfg);
  if (!cfg.out.out_dir.empty()) write_run_artifacts(r, cfg, cfg.out.out_dir);
  if (!r.report) {
    emit(cfg, calibration_text(cfg, r));
    return 0;
  }
  std::ostringstream os;
  if (cfg.out.format == OutputFormat::csv) write_report_csv(os, {&*r.report});
  else os << dump_json(report_json(*r.report));
  emit(cfg, os.str());
  for (const auto& w : r.report->warnings) std::cerr << "warning: " << w << '\n';
  return 0;
}

int cmd_calibrate(const Common& c) {
  auto cfg = load(c);
  ExperimentResult r;
  r.label = cfg.label;
  r.calibration = calibrate(cfg);
  emit(cfg, calibration_text(cfg, r));
  return 0;
}

int run_points(const ExperimentConfig& cfg, const std::string& axis, const std::vector<SweepPoint>& pts) {
  std::vector<const EstimationReport*> reports;
  std::vector<SweepColumn> cols;
  for (const auto& p : pts) {
    if (!p.result.report) continue;
    reports.push_back(&*p.result.report);
    cols.push_back({axis, p.value});
  }
  std::ostringstream os;
  if (cfg.out.format == OutputFormat::csv) {
    write_report_csv(os, reports, cols, axis);
  } else {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
      auto j = report_json(*reports[i]);
      j["axis"] = axis;
      j["value"] = detail::num_out(cols[i].value);
      arr.push_back(j);
    }
    os << dump_json(arr);
  }
  emit(cfg, os.str());
  return 0;
}

int cmd_sweep(const Common& c, const std::string& axis, const std::string& values) {
  const auto cfg = load(c);
  const auto path = resolve_axis(cfg, axis);
  return run_points(cfg, path, run_sweep(cfg, path, parse_values(values)));
}

int cmd_ab(const Common& c, const std::string& values) {
  const auto cfg = load(c);
  return run_points(cfg, "tx.carrier_suppression_db", run_ab_suppression(cfg, parse_values(values)));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pilot-assisted CV-QKD intradyne link simulator"};
  app.require_subcommand(1);

  Common run_opts, sweep_opts, ab_opts, cal_opts;
  std::string axis, sweep_values, ab_values;

  auto* run = app.add_subcommand("run", "run one experiment and print its report");
  add_common(run, run_opts);
  auto* sweep = app.add_subcommand("sweep", "one report row per value of a numeric config field");
  add_common(sweep, sweep_opts);
  sweep->add_option("--axis", axis, "config field, dotted (channel.freq_offset) or bare")->required();
  sweep->add_option("--values", sweep_values, "comma-separated values")->required();
  auto* ab = app.add_subcommand("ab-suppression", "paired runs over carrier-suppression values (dB)");
  add_common(ab, ab_opts);
  ab->add_option("--values", ab_values, "comma-separated suppression values, inf allowed")->required();
  auto* cal = app.add_subcommand("calibrate", "shot-noise and electronic-noise calibration only");
  add_common(cal, cal_opts);
  auto* presets = app.add_subcommand("presets", "list bundled presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*run) return cmd_run(run_opts);
    if (*sweep) return cmd_sweep(sweep_opts, axis, sweep_values);
    if (*ab) return cmd_ab(ab_opts, ab_values);
    if (*cal) return cmd_calibrate(cal_opts);
    if (*presets) {
      for (const auto& n : preset_names()) std::cout << n << '\n';
      return 0;
    }
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const sync_error& e) {
    std::cerr << "dsp: " << e.what() << '\n';
    return 3;
  } catch (const pilot_lost_error& e) {
    std::cerr << "dsp: " << e.what() << '\n';
    return 3;
  } catch (const calibration_error& e) {
    std::cerr << "estimation: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
