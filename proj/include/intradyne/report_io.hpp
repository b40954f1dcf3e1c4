// Report, symbol and phase-track writers. Output depends only on the values
// passed in: no timestamps, fixed number formatting.
#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intradyne/config.hpp"
#include "intradyne/estimation.hpp"
#include "intradyne/experiment.hpp"
#include "intradyne/record_io.hpp"

namespace intradyne {

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols{
      "label",  "policy", "blocks", "symbols",  "T",        "V_mod",        "V_mod_est",
      "n_B",    "snr",    "snr_empirical", "V_B", "V_B_given_A", "xi_tot", "xi_det",
      "xi_minus_det", "xi_eve", "N0", "trusted_receiver"};
  return cols;
}

inline std::vector<std::string> report_row(const EstimationReport& r, const PolicyEstimate& e) {
  return {r.label,
          std::string(to_string(e.policy)),
          std::to_string(r.blocks),
          std::to_string(r.symbols),
          format_number(e.T),
          format_number(e.V_mod),
          format_number(e.V_mod_est),
          format_number(e.n_B),
          format_number(e.snr),
          format_number(e.snr_empirical),
          format_number(e.v_b),
          format_number(e.v_cond),
          format_number(e.xi_tot),
          format_number(e.xi_det),
          format_number(e.xi_minus_det),
          format_number(e.xi_eve),
          format_number(e.n0),
          r.trusted_receiver ? "true" : "false"};
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline void write_csv_line(std::ostream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_escape(cells[i]);
  os << '\n';
}

inline nlohmann::json policy_json(const PolicyEstimate& e) {
  return {{"T", e.T},
          {"V_mod", e.V_mod},
          {"V_mod_est", e.V_mod_est},
          {"n_B", e.n_B},
          {"snr", e.snr},
          {"snr_empirical", e.snr_empirical},
          {"V_B", e.v_b},
          {"V_B_given_A", e.v_cond},
          {"xi_tot", e.xi_tot},
          {"xi_det", e.xi_det},
          {"xi_minus_det", e.xi_minus_det},
          {"xi_eve", e.xi_eve},
          {"N0", e.n0}};
}

inline nlohmann::json report_json(const EstimationReport& r) {
  return {{"label", r.label},
          {"blocks", r.blocks},
          {"symbols", r.symbols},
          {"trusted_receiver", r.trusted_receiver},
          {"T_nominal", r.T_nominal},
          {"V_mod_nominal", r.V_mod_nominal},
          {"averaged", policy_json(r.averaged)},
          {"worst_case", policy_json(r.worst_case)},
          {"warnings", r.warnings}};
}

inline nlohmann::json calibration_json(const std::string& label, const CalibrationResult& c) {
  return {{"label", label},
          {"shot_variances", c.set.shot_variances},
          {"elec_variances", c.set.elec_variances},
          {"averaged", {{"N0", c.n0_averaged}, {"xi_det", c.xi_det_averaged}}},
          {"worst_case", {{"N0", c.n0_worst}, {"xi_det", c.xi_det_worst}}}};
}

/// Optional leading sweep column (axis name and value) for tables.
struct SweepColumn {
  std::string axis;
  double value = 0.0;
};

inline void write_report_csv(std::ostream& os, const std::vector<const EstimationReport*>& reports,
                             const std::vector<SweepColumn>& sweep = {}, const std::string& axis = {}) {
  std::vector<std::string> header;
  if (!axis.empty()) header.push_back(axis);
  header.insert(header.end(), report_columns().begin(), report_columns().end());
  write_csv_line(os, header);
  for (std::size_t i = 0; i < reports.size(); ++i) {
    for (auto p : {CalibrationPolicy::averaged, CalibrationPolicy::worst_case}) {
      std::vector<std::string> row;
      if (!axis.empty()) row.push_back(format_number(sweep.at(i).value));
      auto cells = report_row(*reports[i], reports[i]->get(p));
      row.insert(row.end(), cells.begin(), cells.end());
      write_csv_line(os, row);
    }
  }
}

inline void write_calibration_csv(std::ostream& os, const std::string& label, const CalibrationResult& c) {
  write_csv_line(os, {"label", "policy", "N0", "xi_det"});
  write_csv_line(os, {label, "averaged", format_number(c.n0_averaged), format_number(c.xi_det_averaged)});
  write_csv_line(os, {label, "worst_case", format_number(c.n0_worst), format_number(c.xi_det_worst)});
}

/// index,tx_symbol,I,Q with I/Q in SNU.
inline void write_symbols_csv(std::ostream& os, const SymbolFrame& frame, double n0) {
  const double s = 1.0 / std::sqrt(n0);
  os << "index,tx_symbol,I,Q\n";
  for (std::size_t k = 0; k < frame.size(); ++k)
    os << k << ',' << static_cast<int>(frame.tx_symbols[k]) << ',' << format_number(frame.symbols[k].real() * s)
       << ',' << format_number(frame.symbols[k].imag() * s) << '\n';
}

/// Per-symbol phase recovered by the DSP.
inline void write_phase_csv(std::ostream& os, const DspResult& d, double sample_rate) {
  os << "symbol,time_us,pilot_phase_rad,residual_rad,total_rad\n";
  for (std::size_t k = 0; k < d.sample_index.size(); ++k) {
    const std::size_t n = d.sample_index[k];
    os << k << ',' << format_number(static_cast<double>(n) / sample_rate * 1e6) << ','
       << format_number(d.track.theta[n]) << ',' << format_number(d.track.residual_corrections[k]) << ','
       << format_number(d.symbol_phase_correction[k]) << '\n';
  }
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc | std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << text;
}

inline std::string dump_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

/// All artifacts of one run under `dir`; the report itself goes to `report`.
inline void write_run_artifacts(const ExperimentResult& r, const ExperimentConfig& cfg,
                                const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "config.json", dump_json(to_json(cfg)));
  {
    std::ostringstream os;
    if (cfg.out.format == OutputFormat::csv) write_calibration_csv(os, r.label, r.calibration);
    else os << dump_json(calibration_json(r.label, r.calibration));
    write_text(dir / (cfg.out.format == OutputFormat::csv ? "calibration.csv" : "calibration.json"), os.str());
  }
  const double fs = adc_rate_for(cfg.rx, cfg.tx.sample_rate());
  for (std::size_t b = 0; b < r.artifacts.size(); ++b) {
    const auto& a = r.artifacts[b];
    const std::string tag = "block" + std::to_string(b);
    if (b < cfg.out.records) write_record(a.record, dir / ("record_" + tag));
    if (b == 0 && cfg.out.symbols) {
      std::ostringstream os;
      write_symbols_csv(os, a.dsp.frame, r.calibration.n0_averaged);
      write_text(dir / ("symbols_" + tag + ".csv"), os.str());
    }
    if (b == 0 && cfg.out.phase_track) {
      std::ostringstream os;
      write_phase_csv(os, a.dsp, fs);
      write_text(dir / ("phase_" + tag + ".csv"), os.str());
    }
  }
}

}  // namespace intradyne
