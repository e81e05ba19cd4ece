#pragma once

// Serialization: JSON round trips for the domain types, whole-object $ref
// includes, byte-size strings with binary suffixes, run-config files and
// the frozen CSV schema for sweep/space dumps.
//
// Determinism: JSON objects serialize with sorted keys, and floating point
// fields in CSV rows use a fixed %.17g rendering, so identical inputs
// produce byte-identical outputs.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flatdse/costmodel.hpp"
#include "flatdse/dataflow.hpp"
#include "flatdse/dse.hpp"
#include "flatdse/hardware.hpp"
#include "flatdse/workload.hpp"

namespace flatdse {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Byte sizes. Binary suffixes: KB = 2^10, MB = 2^20, GB = 2^30, TB = 2^40
// (KiB/MiB/... accepted as synonyms). Bandwidth strings may end in "/s".

inline std::uint64_t parse_byte_size(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (s.empty()) throw std::invalid_argument("byte size: empty string");
  if (s.size() >= 2 && (s.compare(s.size() - 2, 2, "/s") == 0 || s.compare(s.size() - 2, 2, "/S") == 0))
    s.resize(s.size() - 2);

  std::size_t pos = 0;
  double mantissa = 0;
  try {
    mantissa = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("byte size: cannot parse '" + text + "'");
  }
  std::string suffix = s.substr(pos);
  for (auto& c : suffix) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  double mult = 1;
  if (suffix.empty() || suffix == "b") mult = 1;
  else if (suffix == "kb" || suffix == "kib" || suffix == "k") mult = 1024.0;
  else if (suffix == "mb" || suffix == "mib" || suffix == "m") mult = 1048576.0;
  else if (suffix == "gb" || suffix == "gib" || suffix == "g") mult = 1073741824.0;
  else if (suffix == "tb" || suffix == "tib" || suffix == "t") mult = 1099511627776.0;
  else throw std::invalid_argument("byte size: unknown suffix '" + suffix + "'");
  const double v = mantissa * mult;
  if (!(v >= 0) || v > 9.2e18) throw std::invalid_argument("byte size: out of range '" + text + "'");
  return static_cast<std::uint64_t>(std::llround(v));
}

namespace detail {

inline std::uint64_t bytes_field(const Json& j, const char* key, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (v.is_string()) return parse_byte_size(v.get<std::string>());
  return v.get<std::uint64_t>();
}

inline double rate_field(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (v.is_string()) return static_cast<double>(parse_byte_size(v.get<std::string>()));
  return v.get<double>();
}

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Workload.

inline void to_json(Json& j, const AttentionWorkload& w) {
  j = Json{{"name", w.name},     {"batch", w.batch},   {"seq_len", w.seq_len},
           {"embed", w.embed},   {"heads", w.heads},   {"blocks", w.blocks},
           {"ff_mult", w.ff_mult}, {"bits", w.bits}};
}

inline void from_json(const Json& j, AttentionWorkload& w) {
  w = AttentionWorkload{};
  w.name = j.value("name", w.name);
  w.batch = j.value("batch", w.batch);
  w.seq_len = j.value("seq_len", w.seq_len);
  w.embed = j.value("embed", w.embed);
  w.heads = j.value("heads", w.heads);
  w.blocks = j.value("blocks", w.blocks);
  w.ff_mult = j.value("ff_mult", w.ff_mult);
  w.bits = j.value("bits", w.bits);
}

// ---------------------------------------------------------------------------
// Hardware.

inline void to_json(Json& j, const EnergyTable& e) {
  j = Json{{"mac", e.mac},
           {"sl_access", e.sl_access},
           {"sg_access", e.sg_access},
           {"dram_access", e.dram_access}};
}

inline void from_json(const Json& j, EnergyTable& e) {
  e = EnergyTable{};
  e.mac = j.value("mac", e.mac);
  e.sl_access = j.value("sl_access", e.sl_access);
  e.sg_access = j.value("sg_access", e.sg_access);
  e.dram_access = j.value("dram_access", e.dram_access);
}

inline NocKind parse_noc(const std::string& s) {
  if (s == "systolic") return NocKind::Systolic;
  if (s == "tree") return NocKind::Tree;
  if (s == "crossbar") return NocKind::Crossbar;
  throw std::invalid_argument("unknown noc: " + s);
}

inline void to_json(Json& j, const HardwareConfig& h) {
  j = Json{{"name", h.name},
           {"pe_rows", h.pe_rows},
           {"pe_cols", h.pe_cols},
           {"clock_hz", h.clock_hz},
           {"sl_bytes", h.sl_bytes},
           {"sg_bytes", h.sg_bytes},
           {"offchip_bw", h.offchip_bw},
           {"onchip_bw", h.onchip_bw},
           {"noc", to_string(h.noc)},
           {"sfu_rate", h.sfu_rate},
           {"energy", h.energy}};
}

inline void from_json(const Json& j, HardwareConfig& h) {
  h = HardwareConfig{};
  h.name = j.value("name", h.name);
  h.pe_rows = j.value("pe_rows", h.pe_rows);
  h.pe_cols = j.value("pe_cols", h.pe_cols);
  h.clock_hz = j.value("clock_hz", h.clock_hz);
  h.sl_bytes = detail::bytes_field(j, "sl_bytes", h.sl_bytes);
  h.sg_bytes = detail::bytes_field(j, "sg_bytes", h.sg_bytes);
  h.offchip_bw = detail::rate_field(j, "offchip_bw", h.offchip_bw);
  h.onchip_bw = detail::rate_field(j, "onchip_bw", h.onchip_bw);
  if (j.contains("noc")) h.noc = parse_noc(j.at("noc").get<std::string>());
  h.sfu_rate = j.value("sfu_rate", h.sfu_rate);
  if (j.contains("energy")) h.energy = j.at("energy").get<EnergyTable>();
}

// ---------------------------------------------------------------------------
// Dataflow config.

inline GranKind parse_gran_kind(const std::string& s) {
  if (s == "M" || s == "m") return GranKind::M;
  if (s == "B" || s == "b") return GranKind::B;
  if (s == "H" || s == "h") return GranKind::H;
  if (s == "R" || s == "r") return GranKind::R;
  throw std::invalid_argument("unknown granularity kind: " + s);
}

inline DataflowConfig::Mode parse_mode(const std::string& s) {
  if (s == "base") return DataflowConfig::Mode::Base;
  if (s == "base_tiled") return DataflowConfig::Mode::BaseTiled;
  if (s == "flat") return DataflowConfig::Mode::Flat;
  throw std::invalid_argument("unknown mode: " + s);
}

inline Stationarity parse_stationarity(const std::string& s) {
  if (s == "weight") return Stationarity::Weight;
  if (s == "input") return Stationarity::Input;
  if (s == "output") return Stationarity::Output;
  throw std::invalid_argument("unknown stationarity: " + s);
}

inline void to_json(Json& j, const Granularity& g) {
  j = Json{{"kind", to_string(g.kind)}};
  switch (g.kind) {
    case GranKind::M: break;
    case GranKind::B: j["batch_tile"] = g.batch_tile; break;
    case GranKind::H: j["head_tile"] = g.head_tile; break;
    case GranKind::R: j["rows"] = g.rows; break;
  }
  if (g.row_cols) j["row_cols"] = g.row_cols;
}

inline void from_json(const Json& j, Granularity& g) {
  g = Granularity{};
  g.kind = parse_gran_kind(j.value("kind", std::string("M")));
  g.batch_tile = j.value("batch_tile", g.batch_tile);
  g.head_tile = j.value("head_tile", g.head_tile);
  g.rows = j.value("rows", g.rows);
  g.row_cols = j.value("row_cols", g.row_cols);
}

inline void to_json(Json& j, const FlatTileFlags& f) {
  j = Json{{"q", f.q}, {"k", f.k}, {"v", f.v}, {"logit", f.logit}, {"out", f.out}};
}

inline void from_json(const Json& j, FlatTileFlags& f) {
  f = FlatTileFlags{};
  f.q = j.value("q", f.q);
  f.k = j.value("k", f.k);
  f.v = j.value("v", f.v);
  f.logit = j.value("logit", f.logit);
  f.out = j.value("out", f.out);
}

inline void to_json(Json& j, const IntraTiling& t) {
  j = Json{{"stationarity", to_string(t.stationarity)}, {"tm", t.tm}, {"tk", t.tk}, {"tn", t.tn}};
}

inline void from_json(const Json& j, IntraTiling& t) {
  t = IntraTiling{};
  if (j.contains("stationarity"))
    t.stationarity = parse_stationarity(j.at("stationarity").get<std::string>());
  t.tm = j.value("tm", t.tm);
  t.tk = j.value("tk", t.tk);
  t.tn = j.value("tn", t.tn);
}

inline void to_json(Json& j, const DataflowConfig& c) {
  j = Json{{"mode", to_string(c.mode)},
           {"granularity", c.gran},
           {"flags", c.flags},
           {"intra", c.intra},
           {"key", canonical_key(c)}};
}

inline void from_json(const Json& j, DataflowConfig& c) {
  c = DataflowConfig{};
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("granularity")) c.gran = j.at("granularity").get<Granularity>();
  if (j.contains("flags")) c.flags = j.at("flags").get<FlatTileFlags>();
  if (j.contains("intra")) c.intra = j.at("intra").get<IntraTiling>();
}

// ---------------------------------------------------------------------------
// Reports.

inline void to_json(Json& j, const TensorTraffic& t) {
  j = Json{{"reads", t.reads}, {"writes", t.writes}};
}

inline void to_json(Json& j, const TrafficBreakdown& t) {
  j = Json{{"q", t.q},       {"k", t.k},           {"v", t.v},   {"logit", t.logit},
           {"out", t.out},   {"weight", t.weight}, {"act", t.act},
           {"total_words", t.total_words()}};
}

inline void to_json(Json& j, const EnergyBreakdown& e) {
  j = Json{{"mac", e.mac}, {"sl", e.sl}, {"sg", e.sg}, {"dram", e.dram}, {"total", e.total()}};
}

inline void to_json(Json& j, const CostReport& r) {
  j = Json{{"scope", to_string(r.scope)},
           {"total_cycles", r.total_cycles},
           {"ideal_mac_cycles", r.ideal_mac_cycles},
           {"util", r.util},
           {"seconds", r.seconds},
           {"offchip_words", r.offchip},
           {"offchip_bytes", r.offchip_bytes},
           {"macs", r.macs},
           {"sl_words", r.sl_words},
           {"sg_words", r.sg_words},
           {"sfu_visits", r.sfu_visits},
           {"energy", r.energy},
           {"live_footprint_bytes", r.live_footprint_bytes},
           {"peak_footprint_bytes", r.peak_footprint_bytes},
           {"bw", Json{{"mean_bytes_per_cycle", r.bw.mean_bytes_per_cycle},
                       {"peak_bytes_per_cycle", r.bw.peak_bytes_per_cycle}}},
           {"warmup_cycles", r.warmup_cycles},
           {"drain_cycles", r.drain_cycles}};
}

// ---------------------------------------------------------------------------
// Search bounds (subset exposed to config files).

inline void from_json(const Json& j, SearchBounds& b) {
  b = SearchBounds{};
  if (j.contains("modes"))
    for (const auto& m : j.at("modes")) b.modes.push_back(parse_mode(m.get<std::string>()));
  if (j.contains("flat_grans"))
    for (const auto& g : j.at("flat_grans"))
      b.flat_grans.push_back(parse_gran_kind(g.get<std::string>()));
  if (j.contains("base_grans"))
    for (const auto& g : j.at("base_grans"))
      b.base_grans.push_back(parse_gran_kind(g.get<std::string>()));
  if (j.contains("rows")) b.rows = j.at("rows").get<std::vector<std::uint64_t>>();
  if (j.contains("batch_tiles"))
    b.batch_tiles = j.at("batch_tiles").get<std::vector<std::uint64_t>>();
  if (j.contains("head_tiles"))
    b.head_tiles = j.at("head_tiles").get<std::vector<std::uint64_t>>();
  if (j.contains("flag_policy")) {
    const std::string p = j.at("flag_policy").get<std::string>();
    if (p == "all_combos") b.flag_policy = SearchBounds::FlagPolicy::AllCombos;
    else if (p == "all_on") b.flag_policy = SearchBounds::FlagPolicy::AllOn;
    else if (p == "fixed") b.flag_policy = SearchBounds::FlagPolicy::Fixed;
    else throw std::invalid_argument("unknown flag_policy: " + p);
  }
  if (j.contains("fixed_flags")) b.fixed_flags = j.at("fixed_flags").get<FlatTileFlags>();
  if (j.contains("intra"))
    for (const auto& t : j.at("intra")) b.intra.push_back(t.get<IntraTiling>());
}

// ---------------------------------------------------------------------------
// $ref includes: an object of exactly {"$ref": "file.json"} is replaced by
// that file's parsed content, resolved relative to the referring file.

inline Json load_json_with_refs(const std::filesystem::path& path, int depth = 0);

inline void resolve_refs(Json& j, const std::filesystem::path& base_dir, int depth) {
  if (depth > 16) throw std::runtime_error("$ref: nesting too deep");
  if (j.is_object()) {
    if (j.size() == 1 && j.contains("$ref") && j.at("$ref").is_string()) {
      std::filesystem::path target = j.at("$ref").get<std::string>();
      if (target.is_relative()) target = base_dir / target;
      j = load_json_with_refs(target, depth + 1);
      return;
    }
    for (auto& [key, value] : j.items()) {
      (void)key;
      resolve_refs(value, base_dir, depth);
    }
  } else if (j.is_array()) {
    for (auto& value : j) resolve_refs(value, base_dir, depth);
  }
}

inline Json load_json_with_refs(const std::filesystem::path& path, int depth) {
  if (depth > 16) throw std::runtime_error("$ref: nesting too deep");
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  resolve_refs(j, path.parent_path(), depth);
  return j;
}

// ---------------------------------------------------------------------------
// Run config: one file drives any subcommand; sections beyond the ones a
// subcommand needs are ignored by it.

struct RunConfig {
  AttentionWorkload workload;
  HardwareConfig hardware;
  std::optional<DataflowConfig> dataflow;
  // sweep section
  std::vector<std::uint64_t> sweep_seq_lens;
  std::vector<std::uint64_t> sweep_batches;
  std::vector<std::string> variants;
  Scope scope = Scope::LA;
  // dse section
  Objective objective = Objective::MaxUtil;
  SearchBounds bounds;
  unsigned jobs = 0;
  // verify section
  std::uint64_t seed = 1;
  std::string golden_path;
};

inline Scope parse_scope(const std::string& s) {
  if (s == "la") return Scope::LA;
  if (s == "block") return Scope::Block;
  if (s == "model") return Scope::Model;
  throw std::invalid_argument("unknown scope: " + s);
}

inline RunConfig parse_run_config(const Json& j) {
  RunConfig rc;
  if (!j.contains("workload")) throw std::invalid_argument("run config: missing 'workload'");
  if (!j.contains("hardware")) throw std::invalid_argument("run config: missing 'hardware'");
  rc.workload = j.at("workload").get<AttentionWorkload>();
  rc.hardware = j.at("hardware").get<HardwareConfig>();
  if (j.contains("dataflow")) rc.dataflow = j.at("dataflow").get<DataflowConfig>();
  if (j.contains("scope")) rc.scope = parse_scope(j.at("scope").get<std::string>());
  if (j.contains("sweep")) {
    const Json& s = j.at("sweep");
    if (s.contains("seq_len")) rc.sweep_seq_lens = s.at("seq_len").get<std::vector<std::uint64_t>>();
    if (s.contains("batch")) rc.sweep_batches = s.at("batch").get<std::vector<std::uint64_t>>();
    if (s.contains("variants")) rc.variants = s.at("variants").get<std::vector<std::string>>();
    if (s.contains("scope")) rc.scope = parse_scope(s.at("scope").get<std::string>());
  }
  if (j.contains("dse")) {
    const Json& d = j.at("dse");
    if (d.contains("objective")) rc.objective = parse_objective(d.at("objective").get<std::string>());
    if (d.contains("bounds")) rc.bounds = d.at("bounds").get<SearchBounds>();
    if (d.contains("jobs")) rc.jobs = d.at("jobs").get<unsigned>();
  }
  if (j.contains("verify")) {
    const Json& v = j.at("verify");
    if (v.contains("seed")) rc.seed = v.at("seed").get<std::uint64_t>();
    if (v.contains("golden")) rc.golden_path = v.at("golden").get<std::string>();
  }
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  return parse_run_config(load_json_with_refs(path));
}

// ---------------------------------------------------------------------------
// CSV. Frozen column set; rows render doubles with %.17g.

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols = {
      "workload",        "hardware",       "scope",          "seq_len",
      "batch",           "heads",          "mode",           "gran",
      "gran_value",      "flags",          "tile",           "stationarity",
      "total_cycles",    "ideal_mac_cycles", "util",         "seconds",
      "offchip_bytes",   "offchip_q_words", "offchip_k_words", "offchip_v_words",
      "offchip_logit_words", "offchip_out_words", "offchip_weight_words",
      "offchip_act_words", "sg_words",     "sl_words",       "macs",
      "sfu_visits",      "energy_total",   "energy_mac",     "energy_sl",
      "energy_sg",       "energy_dram",    "live_footprint_bytes",
      "peak_footprint_bytes", "bw_mean_bytes_per_cycle", "bw_peak_bytes_per_cycle",
      "key"};
  return cols;
}

inline std::string csv_header() {
  std::string line;
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (i) line += ',';
    line += cols[i];
  }
  line += '\n';
  return line;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += "\"\"";
    else q.push_back(c);
  }
  q += '"';
  return q;
}

inline std::string csv_row(const AttentionWorkload& w, const HardwareConfig& hw,
                           const DataflowConfig& cfg, const CostReport& r) {
  std::ostringstream os;
  auto d = [](double v) { return detail::fmt_double(v); };
  os << csv_field(w.name) << ',' << csv_field(hw.name) << ',' << to_string(r.scope) << ','
     << w.seq_len << ',' << w.batch << ',' << w.heads << ',' << to_string(cfg.mode) << ','
     << to_string(cfg.gran.kind) << ',' << cfg.gran.value() << ',' << cfg.flags.bitmask() << ','
     << cfg.intra.tm << 'x' << cfg.intra.tk << 'x' << cfg.intra.tn << ','
     << to_string(cfg.intra.stationarity) << ',' << d(r.total_cycles) << ','
     << r.ideal_mac_cycles << ',' << d(r.util) << ',' << d(r.seconds) << ','
     << r.offchip_bytes << ',' << r.offchip.q.total() << ',' << r.offchip.k.total() << ','
     << r.offchip.v.total() << ',' << r.offchip.logit.total() << ',' << r.offchip.out.total()
     << ',' << r.offchip.weight.total() << ',' << r.offchip.act.total() << ',' << r.sg_words
     << ',' << r.sl_words << ',' << r.macs << ',' << r.sfu_visits << ','
     << d(r.energy.total()) << ',' << d(r.energy.mac) << ',' << d(r.energy.sl) << ','
     << d(r.energy.sg) << ',' << d(r.energy.dram) << ',' << r.live_footprint_bytes << ','
     << r.peak_footprint_bytes << ',' << d(r.bw.mean_bytes_per_cycle) << ','
     << d(r.bw.peak_bytes_per_cycle) << ',' << csv_field(canonical_key(cfg)) << '\n';
  return os.str();
}

}  // namespace flatdse
