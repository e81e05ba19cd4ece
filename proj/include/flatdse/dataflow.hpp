#pragma once

// Dataflow configuration space for the fused logit/attend pair and its
// unfused baselines.
//
// A config picks an execution mode, a staging granularity for the
// cross-loop (the loop over staged chunks), per-tensor staging enables and
// an intra-operator tile. Modes:
//
//   Base       operator-by-operator, no cross-loop staging at all
//   BaseTiled  unfused, stages inputs chunk-wise at M/B/H granularity but
//              iterates through the entire logit tensor before attending,
//              so the intermediate round-trips off-chip unless the whole
//              tensor is staged (M granularity)
//   Flat       fused: each chunk runs logit -> softmax -> attend back to
//              back, so the intermediate chunk never leaves the buffer
//
// Granularities order the chunk size: M (all batches and heads), B (batch
// groups), H (head groups), R (row groups inside one head). A row chunk
// always spans whole logit rows of length N; anything narrower would split
// the softmax reduction and is rejected for fused configs.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "flatdse/hardware.hpp"
#include "flatdse/workload.hpp"

namespace flatdse {

enum class GranKind { M, B, H, R };

inline const char* to_string(GranKind k) {
  switch (k) {
    case GranKind::M: return "M";
    case GranKind::B: return "B";
    case GranKind::H: return "H";
    case GranKind::R: return "R";
  }
  return "?";
}

struct Granularity {
  GranKind kind = GranKind::M;
  std::uint64_t batch_tile = 0;  // B kind: batches per chunk
  std::uint64_t head_tile = 0;   // H kind: heads per chunk
  std::uint64_t rows = 0;        // R kind: logit rows per chunk
  // Column extent of the fused logit tile; 0 means full rows. Exists so a
  // column-split tile is representable and can be rejected by validate.
  std::uint64_t row_cols = 0;

  std::uint64_t value() const {
    switch (kind) {
      case GranKind::M: return 0;
      case GranKind::B: return batch_tile;
      case GranKind::H: return head_tile;
      case GranKind::R: return rows;
    }
    return 0;
  }

  static Granularity m() { return {}; }
  static Granularity b(std::uint64_t bt) { return {GranKind::B, bt, 0, 0, 0}; }
  static Granularity h(std::uint64_t ht) { return {GranKind::H, 0, ht, 0, 0}; }
  static Granularity r(std::uint64_t rows) { return {GranKind::R, 0, 0, rows, 0}; }
};

// Per-tensor staging enables for one chunk: Q rows, full K, full V, the
// intermediate (logit/softmax output) and the output rows. 2^5 combos.
struct FlatTileFlags {
  bool q = true;
  bool k = true;
  bool v = true;
  bool logit = true;
  bool out = true;

  unsigned bitmask() const {
    return (q ? 1u : 0u) | (k ? 2u : 0u) | (v ? 4u : 0u) | (logit ? 8u : 0u) |
           (out ? 16u : 0u);
  }
  static FlatTileFlags from_bitmask(unsigned b) {
    return {(b & 1u) != 0, (b & 2u) != 0, (b & 4u) != 0, (b & 8u) != 0, (b & 16u) != 0};
  }
  static FlatTileFlags all_on() { return {}; }
  static FlatTileFlags all_off() { return from_bitmask(0); }
};

enum class Stationarity { Weight, Input, Output };

inline const char* to_string(Stationarity s) {
  switch (s) {
    case Stationarity::Weight: return "weight";
    case Stationarity::Input: return "input";
    case Stationarity::Output: return "output";
  }
  return "?";
}

// L2 tile of one operator; clipped to the operator dims at cost time. The
// L1 tile is derived (array-shaped slice of the L2 tile); stationarity
// annotates which operand persists in the PE-local level and is carried
// through serialization but does not differentiate cost in this model.
struct IntraTiling {
  Stationarity stationarity = Stationarity::Weight;
  std::uint64_t tm = 256;
  std::uint64_t tk = 64;
  std::uint64_t tn = 256;

  std::uint64_t working_set_words() const { return tm * tk + tk * tn + tm * tn; }
};

struct DataflowConfig {
  enum class Mode { Base, BaseTiled, Flat };
  Mode mode = Mode::Flat;
  Granularity gran;
  FlatTileFlags flags;
  IntraTiling intra;
};

inline const char* to_string(DataflowConfig::Mode m) {
  switch (m) {
    case DataflowConfig::Mode::Base: return "base";
    case DataflowConfig::Mode::BaseTiled: return "base_tiled";
    case DataflowConfig::Mode::Flat: return "flat";
  }
  return "?";
}

// Compact deterministic identity string; doubles as the DSE tie-break key.
inline std::string canonical_key(const DataflowConfig& c) {
  std::string s = to_string(c.mode);
  s += ";g=";
  s += to_string(c.gran.kind);
  s += ":" + std::to_string(c.gran.value());
  s += ";f=" + std::to_string(c.flags.bitmask());
  s += ";t=" + std::to_string(c.intra.tm) + "x" + std::to_string(c.intra.tk) +
       "x" + std::to_string(c.intra.tn);
  s += ";s=";
  s += to_string(c.intra.stationarity);
  return s;
}

struct Violation {
  enum class Code { RowSplit, TileExceedsDims, EmptyTile };
  Code code;
  std::string message;
};

struct ValidationResult {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

inline ValidationResult validate(const DataflowConfig& cfg, const AttentionWorkload& w) {
  ValidationResult r;
  auto fail = [&](Violation::Code c, std::string msg) {
    r.violations.push_back({c, std::move(msg)});
  };
  const auto& g = cfg.gran;
  switch (g.kind) {
    case GranKind::M:
      break;
    case GranKind::B:
      if (g.batch_tile == 0) fail(Violation::Code::EmptyTile, "granularity: batch_tile is zero");
      else if (g.batch_tile > w.batch)
        fail(Violation::Code::TileExceedsDims, "granularity: batch_tile exceeds batch");
      break;
    case GranKind::H:
      if (g.head_tile == 0) fail(Violation::Code::EmptyTile, "granularity: head_tile is zero");
      else if (g.head_tile > w.heads)
        fail(Violation::Code::TileExceedsDims, "granularity: head_tile exceeds heads");
      break;
    case GranKind::R:
      if (g.rows == 0) fail(Violation::Code::EmptyTile, "granularity: rows is zero");
      else if (g.rows > w.seq_len)
        fail(Violation::Code::TileExceedsDims, "granularity: rows exceeds seq_len");
      break;
  }
  if (g.row_cols > w.seq_len)
    fail(Violation::Code::TileExceedsDims, "granularity: row_cols exceeds seq_len");
  else if (cfg.mode == DataflowConfig::Mode::Flat && g.row_cols != 0 && g.row_cols < w.seq_len)
    fail(Violation::Code::RowSplit,
         "fused tile must span whole softmax rows (row_cols < seq_len)");
  if (cfg.intra.tm == 0 || cfg.intra.tk == 0 || cfg.intra.tn == 0)
    fail(Violation::Code::EmptyTile, "intra: tile dims must be >= 1");
  return r;
}

// ---------------------------------------------------------------------------
// Cross-loop geometry.
//
// A chunk covers (batches x heads x rows) logit rows. Only the R kind
// revisits a head across chunks, so K/V of a head are reused by
// ceil(N/rows) cross-loop trips there; at M/B/H granularity every tensor
// slice belongs to exactly one chunk.

struct ChunkShape {
  std::uint64_t multiplicity = 0;  // chunks of this shape
  std::uint64_t batches = 0;
  std::uint64_t heads = 0;
  std::uint64_t rows = 0;
  std::uint64_t row_groups() const { return batches * heads; }
};

struct ChunkPlan {
  std::vector<ChunkShape> shapes;  // full shape first, remainder second
  std::uint64_t total_chunks = 0;
  std::uint64_t kv_reuse_passes = 1;  // cross-loop trips touching one head's K/V

  const ChunkShape& largest() const { return shapes.front(); }
};

inline std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

inline ChunkPlan chunk_plan(const AttentionWorkload& w, const DataflowConfig& cfg) {
  const std::uint64_t B = w.batch, H = w.heads, N = w.seq_len;
  ChunkPlan p;
  GranKind kind = cfg.mode == DataflowConfig::Mode::Base ? GranKind::M : cfg.gran.kind;
  switch (kind) {
    case GranKind::M: {
      p.shapes.push_back({1, B, H, N});
      break;
    }
    case GranKind::B: {
      const std::uint64_t bt = cfg.gran.batch_tile;
      const std::uint64_t full = B / bt, rem = B % bt;
      if (full) p.shapes.push_back({full, bt, H, N});
      if (rem) p.shapes.push_back({1, rem, H, N});
      break;
    }
    case GranKind::H: {
      const std::uint64_t ht = cfg.gran.head_tile;
      const std::uint64_t full = H / ht, rem = H % ht;
      if (full) p.shapes.push_back({B * full, 1, ht, N});
      if (rem) p.shapes.push_back({B, 1, rem, N});
      break;
    }
    case GranKind::R: {
      const std::uint64_t rt = cfg.gran.rows;
      const std::uint64_t full = N / rt, rem = N % rt;
      if (full) p.shapes.push_back({B * H * full, 1, 1, rt});
      if (rem) p.shapes.push_back({B * H, 1, 1, rem});
      p.kv_reuse_passes = ceil_div(N, rt);
      break;
    }
  }
  for (const auto& s : p.shapes) p.total_chunks += s.multiplicity;
  return p;
}

// Words of each tensor slice one chunk needs.
struct ChunkSlices {
  std::uint64_t q = 0;
  std::uint64_t k = 0;
  std::uint64_t v = 0;
  std::uint64_t logit = 0;
  std::uint64_t out = 0;
};

inline ChunkSlices chunk_slices(const AttentionWorkload& w, const ChunkShape& s) {
  const std::uint64_t dk = w.head_dim(), N = w.seq_len;
  ChunkSlices c;
  const std::uint64_t groups = s.row_groups();
  c.q = groups * s.rows * dk;
  c.k = groups * N * dk;  // stage L always consumes a head's full K
  c.v = groups * N * dk;
  c.logit = groups * s.rows * N;
  c.out = groups * s.rows * dk;
  return c;
}

// ---------------------------------------------------------------------------
// Live footprint of the staged working set, in bytes.
//
// Off-chip-facing tensors are double-buffered so the next chunk's slice can
// prefetch behind the current one; the fused intermediate never interacts
// with off-chip memory and needs a single copy. For a fused row chunk with
// everything staged this is the affine form
//
//   words = 2*(R*dk + N*dk) + 2*(N*dk + R*dk) + R*N = 4*dk*(R+N) + R*N
//
// which grows as O(N) for fixed R, against the O(N^2) intermediate of an
// unfused whole-tensor staging (B*H*N^2 words at M granularity). Disabled
// flags drop their term. Base stages nothing.

inline std::uint64_t live_footprint_words(const AttentionWorkload& w, const DataflowConfig& cfg) {
  if (cfg.mode == DataflowConfig::Mode::Base) return 0;
  const ChunkPlan plan = chunk_plan(w, cfg);
  const ChunkSlices s = chunk_slices(w, plan.largest());
  const auto& f = cfg.flags;
  std::uint64_t words = 0;
  if (f.q) words += 2 * s.q;
  if (f.k) words += 2 * s.k;
  if (f.v) words += 2 * s.v;
  if (f.out) words += 2 * s.out;
  if (f.logit) {
    if (cfg.mode == DataflowConfig::Mode::Flat) {
      words += s.logit;
    } else if (cfg.gran.kind == GranKind::M) {
      // Unfused whole-tensor staging holds the entire intermediate.
      words += w.batch * w.heads * w.seq_len * w.seq_len;
    }
    // Unfused sub-M staging cannot hold the intermediate across the L
    // phase; it streams through the tile buffers and contributes nothing.
  }
  return words;
}

inline std::uint64_t live_footprint_bytes(const AttentionWorkload& w, const DataflowConfig& cfg) {
  return live_footprint_words(w, cfg) * w.bytes_per_word();
}

// ---------------------------------------------------------------------------
// Staging residency: how many data words of each staged tensor actually fit.
//
// The L2 tile working set (double-buffered) is reserved first; the rest of
// the buffer is split across enabled tensors proportionally to their
// capacity demand (data words times the double-buffer factor), with integer
// floor. Deterministic and monotone in sg_bytes. A tensor's non-resident
// remainder is re-fetched once per reuse pass by the traffic model.

struct Residency {
  std::uint64_t q = 0;
  std::uint64_t k = 0;
  std::uint64_t v = 0;
  std::uint64_t logit = 0;
  std::uint64_t out = 0;
};

// Working set of one L2 tile clipped to the stage dims it actually runs.
// The logit stage is rows x dk x n, the attend stage rows x n x dk; the
// reserve covers the larger of the two, double buffered. Nominal tile dims
// above the stage dims never materialize, so the clip keeps deep tiles from
// reserving space they cannot use.
inline std::uint64_t stage_working_set_words(std::uint64_t rows, std::uint64_t dk,
                                             std::uint64_t n, const IntraTiling& t) {
  auto ws = [&](std::uint64_t m_dim, std::uint64_t k_dim, std::uint64_t n_dim) {
    const std::uint64_t tm = std::min(t.tm, m_dim);
    const std::uint64_t tk = std::min(t.tk, k_dim);
    const std::uint64_t tn = std::min(t.tn, n_dim);
    return tm * tk + tk * tn + tm * tn;
  };
  return std::max(ws(rows, dk, n), ws(rows, n, dk));
}

inline std::uint64_t l2_reserved_words(const AttentionWorkload& w, const DataflowConfig& cfg) {
  const ChunkPlan plan = chunk_plan(w, cfg);
  return 2 * stage_working_set_words(plan.largest().rows, w.head_dim(), w.seq_len, cfg.intra);
}

inline Residency staging_residency(const AttentionWorkload& w, const DataflowConfig& cfg,
                                   const HardwareConfig& hw) {
  Residency r;
  if (cfg.mode == DataflowConfig::Mode::Base) return r;
  const ChunkPlan plan = chunk_plan(w, cfg);
  const ChunkSlices s = chunk_slices(w, plan.largest());
  const bool fused = cfg.mode == DataflowConfig::Mode::Flat;
  const bool whole_tensor = cfg.gran.kind == GranKind::M;

  struct Item {
    std::uint64_t* slot;
    std::uint64_t data;
    std::uint64_t db;
  };
  std::vector<Item> items;
  const auto& f = cfg.flags;
  if (f.q) items.push_back({&r.q, s.q, 2});
  if (f.k) items.push_back({&r.k, s.k, 2});
  if (f.v) items.push_back({&r.v, s.v, 2});
  if (f.out) items.push_back({&r.out, s.out, 2});
  if (f.logit) {
    if (fused) {
      items.push_back({&r.logit, s.logit, 1});
    } else if (whole_tensor) {
      items.push_back({&r.logit, w.batch * w.heads * w.seq_len * w.seq_len, 1});
    }
  }
  if (items.empty()) return r;

  const std::uint64_t sg_words = hw.sg_bytes / w.bytes_per_word();
  const std::uint64_t reserved = l2_reserved_words(w, cfg);
  const std::uint64_t avail = sg_words > reserved ? sg_words - reserved : 0;

  unsigned __int128 need = 0;
  for (const auto& it : items) need += static_cast<unsigned __int128>(it.db) * it.data;
  if (need == 0) return r;
  for (const auto& it : items) {
    if (static_cast<unsigned __int128>(avail) >= need) {
      *it.slot = it.data;
    } else {
      unsigned __int128 share = static_cast<unsigned __int128>(avail) * it.data / need;
      *it.slot = static_cast<std::uint64_t>(share);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Design-space enumeration.

struct EmptySpaceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SearchBounds {
  std::vector<DataflowConfig::Mode> modes;  // empty = {Base, BaseTiled, Flat}
  std::vector<GranKind> flat_grans;         // empty = {M, B, H, R}
  std::vector<GranKind> base_grans;         // empty = {M, B, H}; R not enumerated
  std::vector<std::uint64_t> rows;          // empty = powers of two <= N
  std::vector<std::uint64_t> batch_tiles;   // empty = divisors of batch
  std::vector<std::uint64_t> head_tiles;    // empty = divisors of heads
  enum class FlagPolicy { AllCombos, AllOn, Fixed };
  FlagPolicy flag_policy = FlagPolicy::AllCombos;
  FlatTileFlags fixed_flags;
  std::vector<IntraTiling> intra;  // empty = derived from hw
};

inline std::vector<std::uint64_t> divisors_of(std::uint64_t n) {
  std::vector<std::uint64_t> d;
  for (std::uint64_t i = 1; i <= n; ++i)
    if (n % i == 0) d.push_back(i);
  return d;
}

inline std::vector<std::uint64_t> powers_of_two_upto(std::uint64_t n) {
  std::vector<std::uint64_t> p;
  for (std::uint64_t v = 1; v <= n; v *= 2) {
    p.push_back(v);
    if (v > n / 2) break;
  }
  return p;
}

// L2 tile candidates that fit the buffer double-buffered at the largest
// chunk shape: square tiles for balanced GEMMs plus deep-reduction tiles
// whose long axes clip per stage, which keeps the tile switch count low on
// long sequences. Candidates are filtered against the worst-case clip
// (a full-length row chunk).
inline std::vector<IntraTiling> default_intra_candidates(const AttentionWorkload& w,
                                                         const HardwareConfig& hw) {
  std::vector<IntraTiling> out;
  const std::uint64_t bpw = w.bytes_per_word();
  const std::uint64_t n = w.seq_len, dk = w.head_dim();
  auto fits = [&](const IntraTiling& it) {
    return 2 * stage_working_set_words(n, dk, n, it) * bpw <= hw.sg_bytes;
  };
  for (std::uint64_t t : {16ull, 32ull, 64ull, 128ull, 256ull, 512ull, 1024ull}) {
    IntraTiling it{Stationarity::Weight, t, t, t};
    if (fits(it)) out.push_back(it);
  }
  for (std::uint64_t r : {64ull, 256ull, 1024ull, 2048ull}) {
    if (r > n) continue;
    for (std::uint64_t d : {4096ull, 8192ull, 16384ull, 32768ull, 65536ull}) {
      if (d <= r || d > n) continue;
      IntraTiling it{Stationarity::Weight, r, d, d};
      if (fits(it)) out.push_back(it);
    }
  }
  if (out.empty()) out.push_back({Stationarity::Weight, 8, 8, 8});
  return out;
}

// Deterministic lexicographic enumeration: mode, granularity kind, value,
// flag bitmask, intra index. Candidate values above the workload dims are
// skipped; zero candidates are rejected.
inline std::vector<DataflowConfig> enumerate_space(const AttentionWorkload& w,
                                                   const HardwareConfig& hw,
                                                   const SearchBounds& bounds) {
  w.validate();
  using Mode = DataflowConfig::Mode;
  std::vector<Mode> modes = bounds.modes;
  if (modes.empty()) modes = {Mode::Base, Mode::BaseTiled, Mode::Flat};
  std::sort(modes.begin(), modes.end());
  modes.erase(std::unique(modes.begin(), modes.end()), modes.end());

  std::vector<GranKind> flat_grans = bounds.flat_grans;
  if (flat_grans.empty()) flat_grans = {GranKind::M, GranKind::B, GranKind::H, GranKind::R};
  std::sort(flat_grans.begin(), flat_grans.end());
  flat_grans.erase(std::unique(flat_grans.begin(), flat_grans.end()), flat_grans.end());

  auto clean = [](std::vector<std::uint64_t> vals, std::uint64_t limit,
                  const char* what) {
    for (auto v : vals)
      if (v == 0) throw std::invalid_argument(std::string("bounds: zero ") + what);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    while (!vals.empty() && vals.back() > limit) vals.pop_back();
    return vals;
  };
  const std::vector<std::uint64_t> rows =
      clean(bounds.rows.empty() ? powers_of_two_upto(w.seq_len) : bounds.rows, w.seq_len, "rows");
  const std::vector<std::uint64_t> bts =
      clean(bounds.batch_tiles.empty() ? divisors_of(w.batch) : bounds.batch_tiles, w.batch,
            "batch_tile");
  const std::vector<std::uint64_t> hts =
      clean(bounds.head_tiles.empty() ? divisors_of(w.heads) : bounds.head_tiles, w.heads,
            "head_tile");
  const std::vector<IntraTiling> intra =
      bounds.intra.empty() ? default_intra_candidates(w, hw) : bounds.intra;
  if (intra.empty()) throw EmptySpaceError("enumerate_space: no intra-op tile candidates");

  std::vector<unsigned> flag_masks;
  switch (bounds.flag_policy) {
    case SearchBounds::FlagPolicy::AllCombos:
      for (unsigned b = 0; b < 32; ++b) flag_masks.push_back(b);
      break;
    case SearchBounds::FlagPolicy::AllOn:
      flag_masks.push_back(FlatTileFlags::all_on().bitmask());
      break;
    case SearchBounds::FlagPolicy::Fixed:
      flag_masks.push_back(bounds.fixed_flags.bitmask());
      break;
  }

  std::vector<DataflowConfig> space;
  auto emit = [&](DataflowConfig c) {
    if (validate(c, w).ok()) space.push_back(c);
  };

  for (Mode mode : modes) {
    if (mode == Mode::Base) {
      for (const auto& it : intra) emit({mode, Granularity::m(), FlatTileFlags::all_on(), it});
      continue;
    }
    if (mode == Mode::BaseTiled) {
      // Unfused staging enumerates M/B/H granularities with all tensors
      // staged; flagged BaseTiled configs stay hand-buildable.
      FlatTileFlags f = bounds.flag_policy == SearchBounds::FlagPolicy::Fixed
                            ? bounds.fixed_flags
                            : FlatTileFlags::all_on();
      std::vector<GranKind> base_grans = bounds.base_grans;
      if (base_grans.empty()) base_grans = {GranKind::M, GranKind::B, GranKind::H};
      std::sort(base_grans.begin(), base_grans.end());
      base_grans.erase(std::unique(base_grans.begin(), base_grans.end()), base_grans.end());
      for (GranKind gk : base_grans) {
        switch (gk) {
          case GranKind::M:
            for (const auto& it : intra) emit({mode, Granularity::m(), f, it});
            break;
          case GranKind::B:
            for (auto bt : bts)
              for (const auto& it : intra) emit({mode, Granularity::b(bt), f, it});
            break;
          case GranKind::H:
            for (auto ht : hts)
              for (const auto& it : intra) emit({mode, Granularity::h(ht), f, it});
            break;
          case GranKind::R:
            break;
        }
      }
      continue;
    }
    for (GranKind gk : flat_grans) {
      std::vector<Granularity> grans;
      switch (gk) {
        case GranKind::M: grans.push_back(Granularity::m()); break;
        case GranKind::B: for (auto bt : bts) grans.push_back(Granularity::b(bt)); break;
        case GranKind::H: for (auto ht : hts) grans.push_back(Granularity::h(ht)); break;
        case GranKind::R: for (auto rt : rows) grans.push_back(Granularity::r(rt)); break;
      }
      for (const auto& g : grans)
        for (unsigned fm : flag_masks)
          for (const auto& it : intra)
            emit({mode, g, FlatTileFlags::from_bitmask(fm), it});
    }
  }
  if (space.empty()) throw EmptySpaceError("enumerate_space: empty design space");
  return space;
}

}  // namespace flatdse
