#pragma once

// Analytic cost model: off-chip traffic, cycle schedule, utilization,
// energy and buffer footprint for one dataflow config on one hardware
// preset. Traffic formulas are integer-exact and mirror the reference
// executor's touch counting; the schedule is a per-chunk window model.
//
// Schedule structure. Every chunk becomes a window whose latency is the
// max of its compute time (GEMM cycles plus array fill/drain plus any
// bounded-SFU time) and its memory transfer times at the off-chip and
// on-chip boundaries; double buffering overlaps the next chunk's prefetch
// with the current window. Fused configs run logit, softmax and attend
// inside one window per chunk. Unfused configs first run all logit
// windows, then softmax, then all attend windows. A pipeline warmup
// (first chunk's staged arrivals) and drain (last chunk's staged
// writeback) bracket the sum. Utilization is ideal MAC cycles over total.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>

#include "flatdse/dataflow.hpp"
#include "flatdse/hardware.hpp"
#include "flatdse/workload.hpp"

namespace flatdse {

struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Scope { LA, Block, Model };

inline const char* to_string(Scope s) {
  switch (s) {
    case Scope::LA: return "la";
    case Scope::Block: return "block";
    case Scope::Model: return "model";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Compute primitives.

// Cycles to refill the array pipeline after one L2 tile switch.
inline std::uint64_t noc_switch_cycles(NocKind noc, std::uint64_t pe_rows,
                                       std::uint64_t pe_cols) {
  switch (noc) {
    case NocKind::Systolic: return pe_rows + pe_cols;
    case NocKind::Tree: {
      const std::uint64_t pes = pe_rows * pe_cols;
      std::uint64_t c = 0;
      while ((1ull << c) < pes) ++c;
      return c ? c : 1;
    }
    case NocKind::Crossbar: return 1;
  }
  return 1;
}

inline std::uint64_t fill_drain_cycles(NocKind noc, std::uint64_t pe_rows,
                                       std::uint64_t pe_cols, std::uint64_t tile_switches) {
  return tile_switches * noc_switch_cycles(noc, pe_rows, pe_cols);
}

// Exact tile decomposition of one M x K x N GEMM into full and remainder
// L2 tiles. A tile occupies the array along its best spatial pairing of
// two dims (the free stationarity choice), so large tiles reach the whole
// array and small tiles leave PEs idle; cycles per tile are its MACs over
// those active PEs. Each tile is one pipeline switch.
struct GemmTileStats {
  std::uint64_t cycles = 0;
  std::uint64_t switches = 0;
};

inline GemmTileStats gemm_tile_stats(std::uint64_t M, std::uint64_t K, std::uint64_t N,
                                     const IntraTiling& t, const HardwareConfig& hw) {
  GemmTileStats st;
  const std::uint64_t tm = std::min(t.tm, M), tk = std::min(t.tk, K), tn = std::min(t.tn, N);
  const std::uint64_t dims[3][2] = {{tm, M % tm}, {tk, K % tk}, {tn, N % tn}};
  const std::uint64_t counts[3][2] = {{M / tm, M % tm ? 1ull : 0ull},
                                      {K / tk, K % tk ? 1ull : 0ull},
                                      {N / tn, N % tn ? 1ull : 0ull}};
  auto spatial = [&](std::uint64_t a, std::uint64_t b) {
    return std::max(std::min(a, hw.pe_rows) * std::min(b, hw.pe_cols),
                    std::min(b, hw.pe_rows) * std::min(a, hw.pe_cols));
  };
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int l = 0; l < 2; ++l) {
        const std::uint64_t count = counts[0][i] * counts[1][j] * counts[2][l];
        if (!count) continue;
        const std::uint64_t m = dims[0][i], k = dims[1][j], n = dims[2][l];
        const std::uint64_t active = std::max({spatial(m, k), spatial(m, n), spatial(k, n)});
        st.cycles += count * ceil_div(m * k * n, active);
        st.switches += count;
      }
  return st;
}

// ---------------------------------------------------------------------------
// Scope selection over the block's operators.

inline bool op_in_scope(OperatorKind k, Scope scope) {
  if (scope != Scope::LA) return true;
  return k == OperatorKind::Logit || k == OperatorKind::Softmax || k == OperatorKind::Attend;
}

inline std::uint64_t scope_blocks(const AttentionWorkload& w, Scope scope) {
  return scope == Scope::Model ? w.blocks : 1;
}

// Lower bound: every op's MACs over the full array, back to back.
inline std::uint64_t ideal_cycles(const AttentionWorkload& w, const HardwareConfig& hw,
                                  Scope scope) {
  std::uint64_t cyc = 0;
  for (const auto& op : derive_operators(w)) {
    if (!op.is_gemm() || !op_in_scope(op.kind, scope)) continue;
    cyc += ceil_div(op.macs(), hw.pes());
  }
  return cyc * scope_blocks(w, scope);
}

inline std::uint64_t scope_macs(const AttentionWorkload& w, Scope scope) {
  std::uint64_t macs = 0;
  for (const auto& op : derive_operators(w))
    if (op.is_gemm() && op_in_scope(op.kind, scope)) macs += op.macs();
  return macs * scope_blocks(w, scope);
}

inline std::uint64_t scope_sfu_visits(const AttentionWorkload& w, Scope scope) {
  std::uint64_t v = softmax_sfu_visits(w);
  if (scope != Scope::LA) v += normalization_sfu_visits(w);
  return v * scope_blocks(w, scope);
}

// Logical SG word count: one read per operand use, one write per word
// produced, plus one arrival write per external-input word and one
// departure read per external-output word. Every tensor inside the scope
// therefore costs one write and one read over its lifetime (softmax runs
// in-flight on the SFU path and adds nothing). Dataflow-independent by
// construction; staging changes which level re-streams, not how many
// distinct words flow through the buffer.
inline std::uint64_t scope_sg_words(const AttentionWorkload& w, Scope scope) {
  std::uint64_t words = 0;
  for (const auto& op : derive_operators(w)) {
    if (!op_in_scope(op.kind, scope)) continue;
    if (op.kind == OperatorKind::Softmax) continue;
    const AccessCounts ac = access_counts(op);
    words += ac.in1_words + ac.in2_words + ac.out_words;
  }
  const std::uint64_t bnd = w.batch * w.seq_len * w.embed;
  if (scope == Scope::LA) {
    words += 3 * bnd;  // Q, K, V arrive
    words += bnd;      // O departs
  } else {
    const std::uint64_t d2 = w.embed * w.embed;
    words += bnd;                                  // block input arrives
    words += 4 * d2 + 2 * w.ff_mult * d2;          // weights arrive
    words += bnd;                                  // block output departs
  }
  return words * scope_blocks(w, scope);
}

// Every MAC moves two operands in and one result out at the SL level.
inline std::uint64_t scope_sl_words(const AttentionWorkload& w, Scope scope) {
  return 3 * scope_macs(w, scope);
}

// ---------------------------------------------------------------------------
// Off-chip traffic, integer-exact.

struct TensorTraffic {
  std::uint64_t reads = 0;
  std::uint64_t writes = 0;
  std::uint64_t total() const { return reads + writes; }
};

struct TrafficBreakdown {
  TensorTraffic q, k, v, logit, out;  // fused-pair tensors
  TensorTraffic weight, act;          // block-scope projection/FFN operands
  std::uint64_t total_words() const {
    return q.total() + k.total() + v.total() + logit.total() + out.total() + weight.total() +
           act.total();
  }
};

namespace detail {

// Resident K/V prefixes only matter when heads are revisited.
struct KvResidency {
  std::uint64_t res_k = 0;
  std::uint64_t res_v = 0;
  std::uint64_t passes = 1;
};

inline KvResidency kv_residency(const AttentionWorkload& w, const DataflowConfig& cfg,
                                const Residency& res, const ChunkPlan& plan) {
  KvResidency kr;
  kr.passes = plan.kv_reuse_passes;
  if (cfg.mode != DataflowConfig::Mode::Base && cfg.gran.kind == GranKind::R) {
    const std::uint64_t kv_words = w.seq_len * w.head_dim();
    kr.res_k = std::min(res.k, kv_words);
    kr.res_v = std::min(res.v, kv_words);
  }
  return kr;
}

}  // namespace detail

inline TrafficBreakdown traffic(const AttentionWorkload& w, const DataflowConfig& cfg,
                                const HardwareConfig& hw, Scope scope = Scope::LA) {
  w.validate();
  {
    auto v = validate(cfg, w);
    if (!v.ok()) throw std::invalid_argument("traffic: " + v.violations.front().message);
  }
  const ChunkPlan plan = chunk_plan(w, cfg);
  const Residency res = staging_residency(w, cfg, hw);
  const detail::KvResidency kr = detail::kv_residency(w, cfg, res, plan);
  const std::uint64_t kv_words = w.seq_len * w.head_dim();
  const std::uint64_t heads_total = w.batch * w.heads;
  const bool fused = cfg.mode == DataflowConfig::Mode::Flat;
  const bool whole_int =
      cfg.mode == DataflowConfig::Mode::BaseTiled && cfg.gran.kind == GranKind::M;

  TrafficBreakdown t;
  for (const auto& shape : plan.shapes) {
    const ChunkSlices s = chunk_slices(w, shape);
    t.q.reads += shape.multiplicity * s.q;
    t.out.writes += shape.multiplicity * s.out;
    if (fused) {
      const std::uint64_t spill = s.logit > res.logit ? s.logit - res.logit : 0;
      t.logit.writes += shape.multiplicity * spill;
      t.logit.reads += shape.multiplicity * spill;
    }
  }
  // K/V: resident prefix once per head, remainder once per pass.
  t.k.reads = heads_total * (kr.res_k + kr.passes * (kv_words - kr.res_k));
  t.v.reads = heads_total * (kr.res_v + kr.passes * (kv_words - kr.res_v));
  if (!fused) {
    const std::uint64_t tot_int = heads_total * w.seq_len * w.seq_len;
    const std::uint64_t keep = whole_int ? std::min(res.logit, tot_int) : 0;
    t.logit.writes = tot_int - keep;
    t.logit.reads = tot_int - keep;
  }

  if (scope != Scope::LA) {
    for (const auto& op : derive_operators(w)) {
      if (!op.is_gemm() || op.kind == OperatorKind::Logit || op.kind == OperatorKind::Attend)
        continue;
      const AccessCounts ac = access_counts(op);
      t.act.reads += ac.in1_words;
      t.weight.reads += ac.in2_words;
      t.act.writes += ac.out_words;
    }
  }
  if (scope == Scope::Model) {
    const std::uint64_t n = w.blocks;
    for (TensorTraffic* tt : {&t.q, &t.k, &t.v, &t.logit, &t.out, &t.weight, &t.act}) {
      tt->reads *= n;
      tt->writes *= n;
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Energy.

struct EnergyBreakdown {
  double mac = 0, sl = 0, sg = 0, dram = 0;
  double total() const { return mac + sl + sg + dram; }
};

inline EnergyBreakdown energy_breakdown(std::uint64_t macs, std::uint64_t sl_words,
                                        std::uint64_t sg_words, std::uint64_t dram_words,
                                        const EnergyTable& e) {
  EnergyBreakdown b;
  b.mac = static_cast<double>(macs) * e.mac;
  b.sl = static_cast<double>(sl_words) * e.sl_access;
  b.sg = static_cast<double>(sg_words) * e.sg_access;
  b.dram = static_cast<double>(dram_words) * e.dram_access;
  return b;
}

// ---------------------------------------------------------------------------
// Schedule.

struct BwSummary {
  double mean_bytes_per_cycle = 0;
  double peak_bytes_per_cycle = 0;
};

struct CostReport {
  Scope scope = Scope::LA;
  double total_cycles = 0;
  std::uint64_t ideal_mac_cycles = 0;
  double util = 0;
  double seconds = 0;
  TrafficBreakdown offchip;  // words
  std::uint64_t offchip_bytes = 0;
  std::uint64_t macs = 0;
  std::uint64_t sl_words = 0;
  std::uint64_t sg_words = 0;
  std::uint64_t sfu_visits = 0;
  EnergyBreakdown energy;
  std::uint64_t live_footprint_bytes = 0;
  std::uint64_t peak_footprint_bytes = 0;
  BwSummary bw;
  double warmup_cycles = 0;
  double drain_cycles = 0;
};

struct ScheduleOptions {
  Scope scope = Scope::LA;
  bool spill_allowed = true;  // false: configs whose staged set overflows throw
};

namespace detail {

struct WindowAccum {
  double cycles = 0;
  double peak_bpc = 0;

  void add(double lat, double off_bytes, std::uint64_t mult = 1) {
    cycles += static_cast<double>(mult) * lat;
    if (lat > 0) peak_bpc = std::max(peak_bpc, off_bytes / lat);
  }
};

inline double sfu_cycles(const HardwareConfig& hw, double visits) {
  if (hw.sfu_unbounded() || visits <= 0) return 0;
  return std::ceil(visits / hw.sfu_visits_per_cycle());
}

}  // namespace detail

inline CostReport schedule(const AttentionWorkload& w, const DataflowConfig& cfg,
                           const HardwareConfig& hw, const ScheduleOptions& opt = {}) {
  w.validate();
  hw.validate();
  {
    auto v = validate(cfg, w);
    if (!v.ok()) throw std::invalid_argument("schedule: " + v.violations.front().message);
  }
  const std::uint64_t bpw = w.bytes_per_word();
  if (l2_reserved_words(w, cfg) * bpw > hw.sg_bytes)
    throw CapacityError("schedule: double-buffered intra-op tile exceeds the staging buffer");

  CostReport r;
  r.scope = opt.scope;
  r.live_footprint_bytes = live_footprint_bytes(w, cfg);
  r.peak_footprint_bytes = r.live_footprint_bytes + l2_reserved_words(w, cfg) * bpw;
  if (!opt.spill_allowed && r.peak_footprint_bytes > hw.sg_bytes)
    throw CapacityError("schedule: staged working set exceeds the staging buffer");

  const ChunkPlan plan = chunk_plan(w, cfg);
  const Residency res = staging_residency(w, cfg, hw);
  const detail::KvResidency kr = detail::kv_residency(w, cfg, res, plan);
  const std::uint64_t dk = w.head_dim(), N = w.seq_len;
  const double off_bpc = hw.offchip_bytes_per_cycle();
  const double on_bpc = hw.onchip_bytes_per_cycle();
  const std::uint64_t fd_switch = noc_switch_cycles(hw.noc, hw.pe_rows, hw.pe_cols);
  const bool fused = cfg.mode == DataflowConfig::Mode::Flat;
  const bool whole_int =
      cfg.mode == DataflowConfig::Mode::BaseTiled && cfg.gran.kind == GranKind::M;

  detail::WindowAccum acc;

  if (fused) {
    for (const auto& shape : plan.shapes) {
      const ChunkSlices s = chunk_slices(w, shape);
      const std::uint64_t groups = shape.row_groups();
      const GemmTileStats gl = gemm_tile_stats(shape.rows, dk, N, cfg.intra, hw);
      const GemmTileStats ga = gemm_tile_stats(shape.rows, N, dk, cfg.intra, hw);
      double compute = static_cast<double>(groups) * (gl.cycles + ga.cycles) +
                       static_cast<double>(groups * (gl.switches + ga.switches)) * fd_switch;
      compute += detail::sfu_cycles(hw, 5.0 * static_cast<double>(s.logit));

      const std::uint64_t spill = s.logit > res.logit ? s.logit - res.logit : 0;
      // Resident K/V amortize their one-time fetch across all passes.
      const double k_stream =
          static_cast<double>(s.k - groups * kr.res_k) +
          static_cast<double>(groups * kr.res_k) / static_cast<double>(kr.passes);
      const double v_stream =
          static_cast<double>(s.v - groups * kr.res_v) +
          static_cast<double>(groups * kr.res_v) / static_cast<double>(kr.passes);
      const double off_words =
          static_cast<double>(s.q + s.out + 2 * spill) + k_stream + v_stream;
      const double on_words = static_cast<double>(s.q + s.k + s.v + 2 * s.logit + s.out + 2 * spill);
      const double lat =
          std::max({compute, off_words * bpw / off_bpc, on_words * bpw / on_bpc});
      acc.add(lat, off_words * bpw, shape.multiplicity);
    }
  } else {
    const std::uint64_t tot_int = w.batch * w.heads * N * N;
    const std::uint64_t keep = whole_int ? std::min(res.logit, tot_int) : 0;
    const double spill_frac =
        static_cast<double>(tot_int - keep) / static_cast<double>(tot_int);
    for (const auto& shape : plan.shapes) {  // logit phase
      const ChunkSlices s = chunk_slices(w, shape);
      const std::uint64_t groups = shape.row_groups();
      const GemmTileStats gl = gemm_tile_stats(shape.rows, dk, N, cfg.intra, hw);
      const double compute = static_cast<double>(groups) * gl.cycles +
                             static_cast<double>(groups * gl.switches) * fd_switch;
      const double k_stream =
          static_cast<double>(s.k - groups * kr.res_k) +
          static_cast<double>(groups * kr.res_k) / static_cast<double>(kr.passes);
      const double off_words =
          static_cast<double>(s.q) + k_stream + static_cast<double>(s.logit) * spill_frac;
      const double on_words = static_cast<double>(s.q + s.k + s.logit);
      const double lat =
          std::max({compute, off_words * bpw / off_bpc, on_words * bpw / on_bpc});
      acc.add(lat, off_words * bpw, shape.multiplicity);
    }
    acc.cycles += detail::sfu_cycles(hw, 5.0 * static_cast<double>(tot_int));
    for (const auto& shape : plan.shapes) {  // attend phase
      const ChunkSlices s = chunk_slices(w, shape);
      const std::uint64_t groups = shape.row_groups();
      const GemmTileStats ga = gemm_tile_stats(shape.rows, N, dk, cfg.intra, hw);
      const double compute = static_cast<double>(groups) * ga.cycles +
                             static_cast<double>(groups * ga.switches) * fd_switch;
      const double v_stream =
          static_cast<double>(s.v - groups * kr.res_v) +
          static_cast<double>(groups * kr.res_v) / static_cast<double>(kr.passes);
      const double off_words = static_cast<double>(s.logit) * spill_frac + v_stream +
                               static_cast<double>(s.out);
      const double on_words = static_cast<double>(s.logit + s.v + s.out);
      const double lat =
          std::max({compute, off_words * bpw / off_bpc, on_words * bpw / on_bpc});
      acc.add(lat, off_words * bpw, shape.multiplicity);
    }
  }

  // Pipeline bracket: the first chunk's staged inputs cannot hide behind
  // prior compute, the last chunk's staged writeback has nothing to overlap.
  if (cfg.mode != DataflowConfig::Mode::Base) {
    const ChunkSlices s_first = chunk_slices(w, plan.shapes.front());
    const ChunkSlices s_last = chunk_slices(w, plan.shapes.back());
    std::uint64_t arrive = 0;
    if (cfg.flags.q) arrive += s_first.q;
    if (cfg.flags.k) arrive += s_first.k;
    if (fused && cfg.flags.v) arrive += s_first.v;
    r.warmup_cycles = static_cast<double>(arrive) * bpw / off_bpc;
    if (cfg.flags.out) r.drain_cycles = static_cast<double>(s_last.out) * bpw / off_bpc;
  }

  double total = r.warmup_cycles + acc.cycles + r.drain_cycles;

  // Block and model scopes append the projection and FFN operators as
  // plain tiled GEMM windows plus the normalization SFU work.
  if (opt.scope != Scope::LA) {
    for (const auto& op : derive_operators(w)) {
      if (!op.is_gemm() || op.kind == OperatorKind::Logit || op.kind == OperatorKind::Attend)
        continue;
      const GemmTileStats st = gemm_tile_stats(op.m, op.k, op.n, cfg.intra, hw);
      const double compute = static_cast<double>(op.instances) * st.cycles +
                             static_cast<double>(op.instances * st.switches) * fd_switch;
      const AccessCounts ac = access_counts(op);
      const double words = static_cast<double>(ac.in1_words + ac.in2_words + ac.out_words);
      const double lat =
          std::max({compute, words * bpw / off_bpc, words * bpw / on_bpc});
      acc.add(lat, words * bpw);
      total += lat;
    }
    total += detail::sfu_cycles(hw, static_cast<double>(normalization_sfu_visits(w)));
  }
  const std::uint64_t blocks = scope_blocks(w, opt.scope);
  total *= static_cast<double>(blocks);

  r.total_cycles = total;
  r.ideal_mac_cycles = ideal_cycles(w, hw, opt.scope);
  r.util = total > 0 ? static_cast<double>(r.ideal_mac_cycles) / total : 0;
  r.seconds = total / hw.clock_hz;
  r.offchip = traffic(w, cfg, hw, opt.scope);
  r.offchip_bytes = r.offchip.total_words() * bpw;
  r.macs = scope_macs(w, opt.scope);
  r.sl_words = scope_sl_words(w, opt.scope);
  r.sg_words = scope_sg_words(w, opt.scope);
  r.sfu_visits = scope_sfu_visits(w, opt.scope);
  r.energy = energy_breakdown(r.macs, r.sl_words, r.sg_words, r.offchip.total_words(), hw.energy);
  r.bw.mean_bytes_per_cycle = total > 0 ? static_cast<double>(r.offchip_bytes) / total : 0;
  r.bw.peak_bytes_per_cycle = acc.peak_bpc;
  return r;
}

// ---------------------------------------------------------------------------
// Minimum off-chip bandwidth reaching a utilization target.
//
// Utilization is monotone non-decreasing in bandwidth (every window latency
// is non-increasing), so a log-space bisection converges; the on-chip
// bandwidth scales with the candidate to preserve the preset's ratio. A
// compute-bound ceiling below the target yields nullopt.

inline std::optional<double> min_bw_for_util(const AttentionWorkload& w,
                                             const DataflowConfig& cfg,
                                             const HardwareConfig& hw, double target_util,
                                             Scope scope = Scope::LA,
                                             double rel_tol = 0.01) {
  if (target_util <= 0 || target_util > 1)
    throw std::invalid_argument("min_bw_for_util: target must be in (0, 1]");
  const double ratio = hw.onchip_bw_effective() / hw.offchip_bw;
  auto util_at = [&](double bw) {
    HardwareConfig h = hw;
    h.offchip_bw = bw;
    h.onchip_bw = bw * ratio;
    ScheduleOptions opt;
    opt.scope = scope;
    return schedule(w, cfg, h, opt).util;
  };
  double lo = 1.0, hi = 1e18;
  if (util_at(hi) < target_util) return std::nullopt;
  if (util_at(lo) >= target_util) return lo;
  while (hi / lo > 1.0 + rel_tol) {
    const double mid = std::sqrt(lo * hi);
    if (util_at(mid) >= target_util)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace flatdse
