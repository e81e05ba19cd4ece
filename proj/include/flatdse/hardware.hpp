#pragma once

// Accelerator description shared by the dataflow legality checks and the
// cost model: PE array, scratchpad sizes, bandwidths, NoC shape, SFU rate
// and the per-event energy table.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flatdse {

enum class NocKind { Systolic, Tree, Crossbar };

inline const char* to_string(NocKind k) {
  switch (k) {
    case NocKind::Systolic: return "systolic";
    case NocKind::Tree: return "tree";
    case NocKind::Crossbar: return "crossbar";
  }
  return "?";
}

// Relative energy per event. The defaults are placeholder ratios for a
// 16-bit datapath (MAC : SL access : SG access : DRAM access = 1:1:6:200);
// absolute joules are not claimed, only the ordering dram > sg > sl.
struct EnergyTable {
  double mac = 1.0;
  double sl_access = 1.0;
  double sg_access = 6.0;
  double dram_access = 200.0;

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (mac < 0 || sl_access < 0 || sg_access < 0 || dram_access < 0)
      v.push_back("energy entries must be non-negative");
    if (!(dram_access > sg_access && sg_access > sl_access))
      v.push_back("energy ordering must satisfy dram > sg > sl");
    return v;
  }
};

struct HardwareConfig {
  std::string name = "custom";
  std::uint64_t pe_rows = 256;
  std::uint64_t pe_cols = 256;
  double clock_hz = 1e9;
  std::uint64_t sl_bytes = 2048;                    // per-PE local scratch
  std::uint64_t sg_bytes = 32ull * 1024 * 1024;     // shared global buffer
  double offchip_bw = 400e9;                        // bytes/s
  double onchip_bw = 0;                             // bytes/s; 0 = 8x offchip
  NocKind noc = NocKind::Systolic;
  double sfu_rate = 0;                              // visits/s; 0 = unbounded
  EnergyTable energy;

  std::uint64_t pes() const { return pe_rows * pe_cols; }
  double peak_macs_per_s() const { return static_cast<double>(pes()) * clock_hz; }
  double onchip_bw_effective() const { return onchip_bw > 0 ? onchip_bw : 8.0 * offchip_bw; }
  double offchip_bytes_per_cycle() const { return offchip_bw / clock_hz; }
  double onchip_bytes_per_cycle() const { return onchip_bw_effective() / clock_hz; }
  bool sfu_unbounded() const { return sfu_rate <= 0; }
  double sfu_visits_per_cycle() const { return sfu_rate / clock_hz; }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (pe_rows < 1 || pe_cols < 1) v.push_back("pe_rows/pe_cols must be >= 1");
    if (clock_hz <= 0) v.push_back("clock_hz must be positive");
    if (sg_bytes < 1) v.push_back("sg_bytes must be >= 1");
    if (offchip_bw <= 0) v.push_back("offchip_bw must be positive");
    if (onchip_bw > 0 && onchip_bw < offchip_bw)
      v.push_back("onchip_bw must be >= offchip_bw");
    for (auto& e : energy.violations()) v.push_back("energy: " + e);
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) throw std::invalid_argument("hardware: " + v.front());
  }
};

}  // namespace flatdse
