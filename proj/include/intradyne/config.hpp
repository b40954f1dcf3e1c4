// ExperimentConfig: everything a run needs, loadable from TOML or JSON.
// Unknown keys are rejected so typos do not silently fall back to defaults.
#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intradyne/channel.hpp"
#include "intradyne/dsp.hpp"
#include "intradyne/receiver.hpp"
#include "intradyne/toml_lite.hpp"
#include "intradyne/wavegen.hpp"

#ifndef INTRADYNE_PRESET_DIR
#define INTRADYNE_PRESET_DIR "presets"
#endif

namespace intradyne {

using json = nlohmann::json;

enum class OutputFormat { csv, json };

struct CalibrationPlan {
  std::size_t shot_measurements = 8;
  std::size_t elec_measurements = 4;
  std::size_t samples_per_measurement = 0;  // 0 = rx block size

  void validate() const {
    if (shot_measurements == 0 || elec_measurements == 0)
      throw config_error("calibration needs at least one shot and one electronic measurement");
  }
};

struct OutputOptions {
  std::string out_dir;          // empty: no artifacts written
  OutputFormat format = OutputFormat::csv;
  std::size_t records = 0;      // raw MeasurementRecords written for the first N blocks
  bool symbols = true;          // SymbolFrame CSV of the first block
  bool phase_track = true;      // phase-track CSV of the first block
};

struct ExperimentConfig {
  std::string label = "run";
  std::uint64_t seed = 1;
  std::size_t blocks = 10;
  bool trusted_receiver = true;
  bool random_delay = false;  // draw a fresh channel delay for every block
  // "receiver": channel.transmittance is the transmittance seen at the symbol
  // decisions (detector efficiency and roll-off divided out).
  std::string transmittance_reference = "channel";
  std::size_t threads = 0;  // 0 = hardware concurrency

  TxConfig tx;
  ChannelConfig ch;
  RxConfig rx;
  DspConfig dsp;
  CalibrationPlan cal;
  OutputOptions out;

  void validate() const {
    tx.validate();
    ch.validate();
    rx.validate();
    cal.validate();
    const double fs = tx.sample_rate();
    const double adc = adc_rate_for(rx, fs);
    if (adc > fs) throw config_error("rx.adc_rate exceeds the simulation sample rate");
    dsp.validate(adc);
    check_frequency_offset(ch.freq_offset, fs, tx.pilot_freq);
    if (tx.pilot_freq + std::abs(ch.freq_offset) + dsp.bpf_fwhm / 2 >= adc / 2)
      throw config_error("pilot band aliases at the ADC rate");
    const double sps_adc = adc / tx.symbol_rate;
    if (std::abs(sps_adc - std::round(sps_adc)) > 1e-9 || sps_adc < 4)
      throw config_error("rx.adc_rate must be an integer multiple (>= 4) of tx.symbol_rate");
    if (transmittance_reference != "channel" && transmittance_reference != "receiver")
      throw config_error("experiment.transmittance_reference must be 'channel' or 'receiver'");
    if (transmittance_reference == "receiver" && !ch.transmittance)
      throw config_error("transmittance_reference = 'receiver' needs channel.transmittance");
    if (symbols_per_block(rx.block_size_samples, adc, tx.symbol_rate) < 2 * prbs7_period)
      throw config_error("rx.block_size_samples must hold at least two PRBS periods");
  }
};

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

inline double number(const json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw config_error("'" + key + "' must be a number");
}

inline std::uint64_t unsigned_int(const json& v, const std::string& key) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<long long>() >= 0) return static_cast<std::uint64_t>(v.get<long long>());
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  throw config_error("'" + key + "' must be a non-negative integer");
}

inline bool boolean(const json& v, const std::string& key) {
  if (!v.is_boolean()) throw config_error("'" + key + "' must be true or false");
  return v.get<bool>();
}

inline std::string string(const json& v, const std::string& key) {
  if (!v.is_string()) throw config_error("'" + key + "' must be a string");
  return v.get<std::string>();
}

/// Numbers that may be infinite are written as strings in JSON.
inline json num_out(double x) {
  if (std::isinf(x)) return x > 0 ? json("inf") : json("-inf");
  return x;
}

class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw config_error("[" + name_ + "] must be a table");
  }
  ~Section() = default;

  template <class F>
  void field(const char* key, F&& f) {
    seen_.insert(key);
    if (j_.contains(key)) f(j_.at(key), name_ + "." + key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw config_error("unknown key '" + name_ + "." + it.key() + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline json to_json(const ExperimentConfig& c) {
  using detail::num_out;
  json j;
  j["experiment"] = {{"label", c.label},
                     {"seed", c.seed},
                     {"blocks", c.blocks},
                     {"trusted_receiver", c.trusted_receiver},
                     {"random_delay", c.random_delay},
                     {"transmittance_reference", c.transmittance_reference},
                     {"threads", c.threads}};
  j["tx"] = {{"symbol_rate", c.tx.symbol_rate},
             {"pilot_freq", c.tx.pilot_freq},
             {"samples_per_symbol", c.tx.samples_per_symbol},
             {"v_mod", c.tx.v_mod},
             {"pilot_amplitude", c.tx.pilot_amplitude},
             {"pilot_to_quantum_db", num_out(c.tx.pilot_to_quantum_db)},
             {"carrier_suppression_db", num_out(c.tx.carrier_suppression_db)},
             {"sideband_suppression_db", num_out(c.tx.sideband_suppression_db)},
             {"qpsk_mod_index", c.tx.qpsk_mod_index},
             {"pilot_mod_index", c.tx.pilot_mod_index},
             {"prbs_seed", c.tx.prbs_seed},
             {"pulse_shape", std::string(to_string(c.tx.pulse_shape))},
             {"nyquist_span_symbols", c.tx.nyquist_span_symbols}};
  j["channel"] = json::object();
  if (c.ch.transmittance) j["channel"]["transmittance"] = *c.ch.transmittance;
  j["channel"].update({{"fibre_length_km", c.ch.fibre_length_km},
                       {"attenuation_db_per_km", c.ch.attenuation_db_per_km},
                       {"freq_offset", c.ch.freq_offset},
                       {"combined_linewidth", c.ch.combined_linewidth},
                       {"injected_excess_noise", c.ch.injected_excess_noise},
                       {"delay_samples", c.ch.delay_samples}});
  j["rx"] = {{"pol_extinction_db", num_out(c.rx.pol_extinction_db)},
             {"quantum_clearance_db", num_out(c.rx.quantum_clearance_db)},
             {"quantum_bandwidth", c.rx.quantum_bandwidth},
             {"pilot_receiver_noise", c.rx.pilot_receiver_noise},
             {"quantum_efficiency", c.rx.quantum_efficiency},
             {"pilot_efficiency", c.rx.pilot_efficiency},
             {"adc_rate", c.rx.adc_rate},
             {"block_size_samples", c.rx.block_size_samples},
             {"cmrr_db", num_out(c.rx.cmrr_db)},
             {"raw_gain", c.rx.raw_gain},
             {"pilot_power_ceiling", c.rx.pilot_power_ceiling},
             {"snu_bandwidth", c.rx.snu_bandwidth}};
  j["dsp"] = {{"lpf_cutoff", c.dsp.lpf_cutoff},
              {"bpf_center", c.dsp.bpf_center},
              {"bpf_fwhm", c.dsp.bpf_fwhm},
              {"pilot_search_span", c.dsp.pilot_search_span},
              {"freq_est_window", c.dsp.freq_est_window},
              {"phase_smooth_window", c.dsp.phase_smooth_window},
              {"filter_kind", std::string(to_string(c.dsp.filter_kind))},
              {"min_pilot_snr_db", num_out(c.dsp.min_pilot_snr_db)},
              {"sync_threshold", c.dsp.sync_threshold},
              {"phase_power_floor", c.dsp.phase_power_floor},
              {"edge_guard_symbols", c.dsp.edge_guard_symbols},
              {"use_pilot", c.dsp.use_pilot}};
  j["calibration"] = {{"shot_measurements", c.cal.shot_measurements},
                      {"elec_measurements", c.cal.elec_measurements},
                      {"samples_per_measurement", c.cal.samples_per_measurement}};
  j["output"] = {{"out_dir", c.out.out_dir},
                 {"format", c.out.format == OutputFormat::csv ? "csv" : "json"},
                 {"records", c.out.records},
                 {"symbols", c.out.symbols},
                 {"phase_track", c.out.phase_track}};
  return j;
}

/// Overlay `j` onto `base`. Missing keys keep the base value.
inline ExperimentConfig from_json(const json& j, ExperimentConfig c = {}) {
  using namespace detail;
  if (!j.is_object()) throw config_error("config root must be a table");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> known{"experiment", "tx", "channel", "rx", "dsp", "calibration", "output"};
    if (!known.count(it.key())) throw config_error("unknown section '" + it.key() + "'");
  }
  auto num = [](double& dst) { return [&dst](const json& v, const std::string& k) { dst = number(v, k); }; };
  auto uint = [](auto& dst) {
    return [&dst](const json& v, const std::string& k) {
      dst = static_cast<std::remove_reference_t<decltype(dst)>>(unsigned_int(v, k));
    };
  };
  auto flag = [](bool& dst) { return [&dst](const json& v, const std::string& k) { dst = boolean(v, k); }; };

  if (j.contains("experiment")) {
    Section s(j["experiment"], "experiment");
    s.field("label", [&](const json& v, const std::string& k) { c.label = string(v, k); });
    s.field("seed", uint(c.seed));
    s.field("blocks", uint(c.blocks));
    s.field("trusted_receiver", flag(c.trusted_receiver));
    s.field("random_delay", flag(c.random_delay));
    s.field("transmittance_reference",
            [&](const json& v, const std::string& k) { c.transmittance_reference = string(v, k); });
    s.field("threads", uint(c.threads));
    s.finish();
  }
  if (j.contains("tx")) {
    Section s(j["tx"], "tx");
    s.field("symbol_rate", num(c.tx.symbol_rate));
    s.field("pilot_freq", num(c.tx.pilot_freq));
    s.field("samples_per_symbol", [&](const json& v, const std::string& k) {
      c.tx.samples_per_symbol = static_cast<int>(unsigned_int(v, k));
    });
    s.field("v_mod", num(c.tx.v_mod));
    s.field("pilot_amplitude", num(c.tx.pilot_amplitude));
    s.field("pilot_to_quantum_db", num(c.tx.pilot_to_quantum_db));
    s.field("carrier_suppression_db", num(c.tx.carrier_suppression_db));
    s.field("sideband_suppression_db", num(c.tx.sideband_suppression_db));
    s.field("qpsk_mod_index", num(c.tx.qpsk_mod_index));
    s.field("pilot_mod_index", num(c.tx.pilot_mod_index));
    s.field("prbs_seed", uint(c.tx.prbs_seed));
    s.field("pulse_shape",
            [&](const json& v, const std::string& k) { c.tx.pulse_shape = pulse_shape_from_string(string(v, k)); });
    s.field("nyquist_span_symbols", [&](const json& v, const std::string& k) {
      c.tx.nyquist_span_symbols = static_cast<int>(unsigned_int(v, k));
    });
    s.finish();
  }
  if (j.contains("channel")) {
    Section s(j["channel"], "channel");
    s.field("transmittance", [&](const json& v, const std::string& k) {
      if (v.is_null()) c.ch.transmittance.reset();
      else c.ch.transmittance = number(v, k);
    });
    s.field("fibre_length_km", num(c.ch.fibre_length_km));
    s.field("attenuation_db_per_km", num(c.ch.attenuation_db_per_km));
    s.field("freq_offset", num(c.ch.freq_offset));
    s.field("combined_linewidth", num(c.ch.combined_linewidth));
    s.field("injected_excess_noise", num(c.ch.injected_excess_noise));
    s.field("delay_samples", [&](const json& v, const std::string& k) {
      if (!v.is_number_integer()) throw config_error("'" + k + "' must be an integer");
      c.ch.delay_samples = v.get<long long>();
    });
    s.finish();
  }
  if (j.contains("rx")) {
    Section s(j["rx"], "rx");
    s.field("pol_extinction_db", num(c.rx.pol_extinction_db));
    s.field("quantum_clearance_db", num(c.rx.quantum_clearance_db));
    s.field("quantum_bandwidth", num(c.rx.quantum_bandwidth));
    s.field("pilot_receiver_noise", num(c.rx.pilot_receiver_noise));
    s.field("quantum_efficiency", num(c.rx.quantum_efficiency));
    s.field("pilot_efficiency", num(c.rx.pilot_efficiency));
    s.field("adc_rate", num(c.rx.adc_rate));
    s.field("block_size_samples", uint(c.rx.block_size_samples));
    s.field("cmrr_db", num(c.rx.cmrr_db));
    s.field("raw_gain", num(c.rx.raw_gain));
    s.field("pilot_power_ceiling", num(c.rx.pilot_power_ceiling));
    s.field("snu_bandwidth", num(c.rx.snu_bandwidth));
    s.finish();
  }
  if (j.contains("dsp")) {
    Section s(j["dsp"], "dsp");
    s.field("lpf_cutoff", num(c.dsp.lpf_cutoff));
    s.field("bpf_center", num(c.dsp.bpf_center));
    s.field("bpf_fwhm", num(c.dsp.bpf_fwhm));
    s.field("pilot_search_span", num(c.dsp.pilot_search_span));
    s.field("freq_est_window", uint(c.dsp.freq_est_window));
    s.field("phase_smooth_window", uint(c.dsp.phase_smooth_window));
    s.field("filter_kind",
            [&](const json& v, const std::string& k) { c.dsp.filter_kind = filter_kind_from_string(string(v, k)); });
    s.field("min_pilot_snr_db", num(c.dsp.min_pilot_snr_db));
    s.field("sync_threshold", num(c.dsp.sync_threshold));
    s.field("phase_power_floor", num(c.dsp.phase_power_floor));
    s.field("edge_guard_symbols", uint(c.dsp.edge_guard_symbols));
    s.field("use_pilot", flag(c.dsp.use_pilot));
    s.finish();
  }
  if (j.contains("calibration")) {
    Section s(j["calibration"], "calibration");
    s.field("shot_measurements", uint(c.cal.shot_measurements));
    s.field("elec_measurements", uint(c.cal.elec_measurements));
    s.field("samples_per_measurement", uint(c.cal.samples_per_measurement));
    s.finish();
  }
  if (j.contains("output")) {
    Section s(j["output"], "output");
    s.field("out_dir", [&](const json& v, const std::string& k) { c.out.out_dir = string(v, k); });
    s.field("format", [&](const json& v, const std::string& k) {
      const auto f = string(v, k);
      if (f == "csv") c.out.format = OutputFormat::csv;
      else if (f == "json") c.out.format = OutputFormat::json;
      else throw config_error("'" + k + "' must be csv or json");
    });
    s.field("records", uint(c.out.records));
    s.field("symbols", flag(c.out.symbols));
    s.field("phase_track", flag(c.out.phase_track));
    s.finish();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Files and presets

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw config_error("cannot read config file '" + p.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline json parse_config_text(const std::string& text, bool is_json) {
  try {
    return is_json ? json::parse(text) : toml::parse(text);
  } catch (const toml::parse_error& e) {
    throw config_error(e.what());
  } catch (const json::exception& e) {
    throw config_error(std::string("JSON: ") + e.what());
  }
}

inline std::filesystem::path preset_dir() {
  if (const char* env = std::getenv("INTRADYNE_PRESET_DIR")) return env;
  return INTRADYNE_PRESET_DIR;
}

inline std::vector<std::string> preset_names() {
  std::vector<std::string> names;
  std::error_code ec;
  for (const auto& e : std::filesystem::directory_iterator(preset_dir(), ec))
    if (e.path().extension() == ".toml") names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  return names;
}

/// A path to a .toml/.json file, or the name of a bundled preset.
inline ExperimentConfig load_config(const std::string& spec) {
  std::filesystem::path p(spec);
  if (!std::filesystem::exists(p)) {
    const auto candidate = preset_dir() / (spec + ".toml");
    if (!std::filesystem::exists(candidate)) {
      std::string list;
      for (const auto& n : preset_names()) list += (list.empty() ? "" : ", ") + n;
      throw config_error("no config file or preset named '" + spec + "' (presets: " + list + ")");
    }
    p = candidate;
  }
  const bool is_json = p.extension() == ".json";
  auto cfg = from_json(parse_config_text(read_text(p), is_json));
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Sweep axes: every numeric leaf of the config, addressable by its dotted
// path or, when unambiguous, by its bare name.

inline std::vector<std::string> numeric_axes(const ExperimentConfig& c) {
  ExperimentConfig probe = c;
  if (!probe.ch.transmittance) probe.ch.transmittance = probe.ch.effective_transmittance();
  const json j = to_json(probe);
  std::vector<std::string> out;
  for (auto s = j.begin(); s != j.end(); ++s) {
    if (s.key() == "output") continue;
    for (auto f = s.value().begin(); f != s.value().end(); ++f) {
      const auto& v = f.value();
      const bool inf_string = v.is_string() && (v == "inf" || v == "-inf");
      if (v.is_number() || inf_string) out.push_back(s.key() + "." + f.key());
    }
  }
  return out;
}

inline std::string resolve_axis(const ExperimentConfig& c, const std::string& axis) {
  const auto axes = numeric_axes(c);
  std::vector<std::string> hits;
  for (const auto& a : axes) {
    if (a == axis) return a;
    if (a.substr(a.find('.') + 1) == axis) hits.push_back(a);
  }
  if (hits.size() == 1) return hits.front();
  std::string list;
  for (const auto& a : axes) list += (list.empty() ? "" : ", ") + a;
  if (hits.empty()) throw config_error("unknown sweep axis '" + axis + "'; valid axes: " + list);
  throw config_error("ambiguous sweep axis '" + axis + "'; use the dotted form: " + list);
}

inline ExperimentConfig with_axis_value(const ExperimentConfig& c, const std::string& axis, double value) {
  const auto path = resolve_axis(c, axis);
  const auto dot = path.find('.');
  json patch;
  json v = detail::num_out(value);
  const auto leaf = path.substr(dot + 1);
  // integer-valued fields must stay integers
  const json cur = to_json(c)[path.substr(0, dot)].value(leaf, json());
  if (cur.is_number_integer() || cur.is_number_unsigned()) {
    if (value != std::floor(value)) throw config_error("axis '" + path + "' takes integer values");
    v = static_cast<long long>(value);
  }
  patch[path.substr(0, dot)][leaf] = v;
  auto out = from_json(patch, c);
  out.validate();
  return out;
}

}  // namespace intradyne
