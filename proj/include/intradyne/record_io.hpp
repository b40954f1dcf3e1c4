// MeasurementRecord on disk: <stem>.bin holds little-endian float64 samples
// interleaved as qI,qQ,pI,pQ per sample; <stem>.json carries the metadata.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "intradyne/receiver.hpp"

namespace intradyne {

inline constexpr const char* record_format_tag = "f64le-interleaved-qI-qQ-pI-pQ";

namespace detail {

inline std::uint64_t to_le(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t r = 0;
  for (int i = 0; i < 8; ++i) r = (r << 8) | ((v >> (8 * i)) & 0xffu);
  return r;
}

inline void put_f64(std::ofstream& os, double x) {
  const std::uint64_t le = to_le(std::bit_cast<std::uint64_t>(x));
  char buf[8];
  std::memcpy(buf, &le, 8);
  os.write(buf, 8);
}

inline double get_f64(const char* p) {
  std::uint64_t le;
  std::memcpy(&le, p, 8);
  return std::bit_cast<double>(to_le(le));
}

}  // namespace detail

inline void write_record(const MeasurementRecord& rec, const std::filesystem::path& stem) {
  rec.validate();
  std::filesystem::path bin = stem;
  bin += ".bin";
  std::filesystem::path hdr = stem;
  hdr += ".json";
  {
    std::ofstream os(bin, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write " + bin.string());
    for (std::size_t n = 0; n < rec.size(); ++n) {
      detail::put_f64(os, rec.quantum_I[n]);
      detail::put_f64(os, rec.quantum_Q[n]);
      detail::put_f64(os, rec.pilot_I[n]);
      detail::put_f64(os, rec.pilot_Q[n]);
    }
  }
  nlohmann::json j;
  j["format"] = record_format_tag;
  j["sample_rate"] = rec.sample_rate;
  j["block_size"] = rec.size();
  j["seed"] = rec.seed;
  j["snu_scale"] = rec.snu_scale ? nlohmann::json(*rec.snu_scale) : nlohmann::json(nullptr);
  j["config"] = nlohmann::json::parse(rec.config_snapshot);
  j["warnings"] = rec.warnings;
  std::ofstream hs(hdr, std::ios::trunc);
  if (!hs) throw std::runtime_error("cannot write " + hdr.string());
  hs << j.dump(2) << '\n';
}

inline MeasurementRecord read_record(const std::filesystem::path& stem) {
  std::filesystem::path bin = stem;
  bin += ".bin";
  std::filesystem::path hdr = stem;
  hdr += ".json";
  std::ifstream hs(hdr);
  if (!hs) throw std::runtime_error("cannot read " + hdr.string());
  const auto j = nlohmann::json::parse(hs);
  if (j.at("format") != record_format_tag) throw std::runtime_error("unsupported record format");

  MeasurementRecord rec;
  rec.sample_rate = j.at("sample_rate").get<double>();
  rec.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("snu_scale").is_null()) rec.snu_scale = j["snu_scale"].get<double>();
  rec.config_snapshot = j.at("config").dump();
  rec.warnings = j.value("warnings", std::vector<std::string>{});
  const auto n = j.at("block_size").get<std::size_t>();

  std::ifstream is(bin, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + bin.string());
  std::string raw((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (raw.size() != n * 32) throw std::runtime_error("record payload size does not match header");
  for (auto* v : {&rec.quantum_I, &rec.quantum_Q, &rec.pilot_I, &rec.pilot_Q}) v->resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const char* p = raw.data() + 32 * k;
    rec.quantum_I[k] = detail::get_f64(p);
    rec.quantum_Q[k] = detail::get_f64(p + 8);
    rec.pilot_I[k] = detail::get_f64(p + 16);
    rec.pilot_Q[k] = detail::get_f64(p + 24);
  }
  return rec;
}

}  // namespace intradyne
