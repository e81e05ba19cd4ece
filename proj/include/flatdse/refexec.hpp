#pragma once

// Numerical reference executor. Serves two purposes: proving that a fused
// schedule computes the same attention output as the plain operator chain,
// and counting memory touches word-by-word as the oracle for the analytic
// traffic model. It executes real arithmetic at double precision and is
// deliberately small-scale (seq_len <= 512).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "flatdse/dataflow.hpp"
#include "flatdse/workload.hpp"

namespace flatdse {

struct DenseTensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  static DenseTensor zeros(std::vector<std::uint64_t> d) {
    DenseTensor t;
    t.dims = std::move(d);
    std::uint64_t n = 1;
    for (auto v : t.dims) n *= v;
    t.data.assign(n, 0.0);
    return t;
  }

  std::uint64_t elems() const { return data.size(); }

  // [B, H, N, dk] accessor used throughout.
  double& at(std::uint64_t b, std::uint64_t h, std::uint64_t i, std::uint64_t j) {
    return data[((b * dims[1] + h) * dims[2] + i) * dims[3] + j];
  }
  double at(std::uint64_t b, std::uint64_t h, std::uint64_t i, std::uint64_t j) const {
    return data[((b * dims[1] + h) * dims[2] + i) * dims[3] + j];
  }
};

// Reproducible uniform values in [-1, 1); avoids std::uniform_real_distribution
// whose bit stream is implementation-defined.
inline DenseTensor random_tensor(std::vector<std::uint64_t> dims, std::uint64_t seed) {
  DenseTensor t = DenseTensor::zeros(std::move(dims));
  std::uint64_t s = seed ? seed : 0x9e3779b97f4a7c15ull;
  for (auto& x : t.data) {
    // splitmix64
    s += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z = z ^ (z >> 31);
    x = static_cast<double>(z >> 11) * (1.0 / 4503599627370496.0) - 1.0;
  }
  return t;
}

// Raw little-endian f64 payload plus a plain-text shape sidecar
// ("<path>.shape": rank on the first line, dims on the second).
inline void save_tensor(const DenseTensor& t, const std::string& path) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("save_tensor: cannot open " + path);
  bin.write(reinterpret_cast<const char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  std::ofstream side(path + ".shape");
  side << t.dims.size() << "\n";
  for (std::size_t i = 0; i < t.dims.size(); ++i) side << (i ? " " : "") << t.dims[i];
  side << "\n";
}

inline DenseTensor load_tensor(const std::string& path) {
  std::ifstream side(path + ".shape");
  if (!side) throw std::runtime_error("load_tensor: missing sidecar " + path + ".shape");
  std::size_t rank = 0;
  side >> rank;
  if (!side || rank == 0 || rank > 8)
    throw std::runtime_error("load_tensor: bad sidecar " + path + ".shape");
  std::vector<std::uint64_t> dims(rank);
  for (auto& d : dims) side >> d;
  if (!side) throw std::runtime_error("load_tensor: bad sidecar " + path + ".shape");
  DenseTensor t = DenseTensor::zeros(dims);
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw std::runtime_error("load_tensor: cannot open " + path);
  bin.read(reinterpret_cast<char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (static_cast<std::uint64_t>(bin.gcount()) != t.data.size() * sizeof(double))
    throw std::runtime_error("load_tensor: short read on " + path);
  return t;
}

// Max relative error, second argument as reference in the denominator.
inline double compare(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims != b.dims) throw std::invalid_argument("compare: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double denom = std::max(std::fabs(b.data[i]), 1e-30);
    worst = std::max(worst, std::fabs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

// O = softmax_rowwise(Q K^T) V with max-subtraction, per (batch, head).
inline DenseTensor reference_attention(const DenseTensor& q, const DenseTensor& k,
                                       const DenseTensor& v) {
  const std::uint64_t B = q.dims[0], H = q.dims[1], N = q.dims[2], dk = q.dims[3];
  DenseTensor out = DenseTensor::zeros({B, H, N, dk});
  std::vector<double> row(N);
  for (std::uint64_t b = 0; b < B; ++b)
    for (std::uint64_t h = 0; h < H; ++h)
      for (std::uint64_t i = 0; i < N; ++i) {
        double mx = -HUGE_VAL;
        for (std::uint64_t j = 0; j < N; ++j) {
          double acc = 0.0;
          for (std::uint64_t d = 0; d < dk; ++d) acc += q.at(b, h, i, d) * k.at(b, h, j, d);
          row[j] = acc;
          mx = std::max(mx, acc);
        }
        double sum = 0.0;
        for (std::uint64_t j = 0; j < N; ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        for (std::uint64_t j = 0; j < N; ++j) row[j] /= sum;
        for (std::uint64_t d = 0; d < dk; ++d) {
          double acc = 0.0;
          for (std::uint64_t j = 0; j < N; ++j) acc += row[j] * v.at(b, h, j, d);
          out.at(b, h, i, d) = acc;
        }
      }
  return out;
}

// Per-tensor word counters at the two memory boundaries. Off-chip counts
// follow the staging rules (a staged tensor's resident prefix is fetched
// once per reuse scope, the remainder once per pass; spilled intermediate
// words make an off-chip round trip). SG counts follow the logical
// once-per-use convention: every tensor word enters the buffer once and is
// consumed once, independent of the dataflow; array-level re-streaming is
// a separate SL-level cost.
struct TouchCounter {
  std::uint64_t offchip_reads = 0;
  std::uint64_t offchip_writes = 0;
  std::uint64_t sg_reads = 0;
  std::uint64_t sg_writes = 0;
};

struct TouchCounters {
  TouchCounter q, k, v, logit, out;
  std::uint64_t offchip_total() const {
    return q.offchip_reads + q.offchip_writes + k.offchip_reads + k.offchip_writes +
           v.offchip_reads + v.offchip_writes + logit.offchip_reads + logit.offchip_writes +
           out.offchip_reads + out.offchip_writes;
  }
  std::uint64_t sg_total() const {
    return q.sg_reads + q.sg_writes + k.sg_reads + k.sg_writes + v.sg_reads + v.sg_writes +
           logit.sg_reads + logit.sg_writes + out.sg_reads + out.sg_writes;
  }
};

struct FusedResult {
  DenseTensor out;
  TouchCounters touches;
  double max_row_sum_err = 0.0;  // worst |sum(softmax row) - 1|
};

namespace detail {

// One schedule unit: a contiguous (batch range, head range, row range).
struct ChunkCoord {
  std::uint64_t b0, nb, h0, nh, row0, rows;
};

inline std::vector<ChunkCoord> chunk_coords(const AttentionWorkload& w,
                                            const DataflowConfig& cfg) {
  const std::uint64_t B = w.batch, H = w.heads, N = w.seq_len;
  GranKind kind = cfg.mode == DataflowConfig::Mode::Base ? GranKind::M : cfg.gran.kind;
  std::vector<ChunkCoord> cs;
  switch (kind) {
    case GranKind::M:
      cs.push_back({0, B, 0, H, 0, N});
      break;
    case GranKind::B:
      for (std::uint64_t b = 0; b < B; b += cfg.gran.batch_tile)
        cs.push_back({b, std::min(cfg.gran.batch_tile, B - b), 0, H, 0, N});
      break;
    case GranKind::H:
      for (std::uint64_t b = 0; b < B; ++b)
        for (std::uint64_t h = 0; h < H; h += cfg.gran.head_tile)
          cs.push_back({b, 1, h, std::min(cfg.gran.head_tile, H - h), 0, N});
      break;
    case GranKind::R:
      for (std::uint64_t b = 0; b < B; ++b)
        for (std::uint64_t h = 0; h < H; ++h)
          for (std::uint64_t r = 0; r < N; r += cfg.gran.rows)
            cs.push_back({b, 1, h, 1, r, std::min(cfg.gran.rows, N - r)});
      break;
  }
  return cs;
}

// Softmax over `n_rows` staged logit rows of head (b, h) starting at
// `row0`, followed by the attend product into the output rows.
inline void softmax_attend_rows(std::vector<double>& logits, std::uint64_t n_rows,
                                std::uint64_t N, const DenseTensor& v, std::uint64_t b,
                                std::uint64_t h, std::uint64_t row0, DenseTensor& out,
                                double& row_sum_err) {
  const std::uint64_t dk = v.dims[3];
  for (std::uint64_t r = 0; r < n_rows; ++r) {
    double* row = logits.data() + r * N;
    double mx = -HUGE_VAL;
    for (std::uint64_t j = 0; j < N; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::uint64_t j = 0; j < N; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    double check = 0.0;
    for (std::uint64_t j = 0; j < N; ++j) {
      row[j] /= sum;
      check += row[j];
    }
    row_sum_err = std::max(row_sum_err, std::fabs(check - 1.0));
    for (std::uint64_t d = 0; d < dk; ++d) {
      double acc = 0.0;
      for (std::uint64_t j = 0; j < N; ++j) acc += row[j] * v.at(b, h, j, d);
      out.at(b, h, row0 + r, d) = acc;
    }
  }
}

}  // namespace detail

// Executes the configured dataflow with real arithmetic and counts memory
// touches. Fused configs run logit -> softmax -> attend per chunk; unfused
// configs produce the entire logit tensor before attending. `chunk_order`
// optionally permutes the chunk visit order; chunks write disjoint output
// rows, so the result and the touch totals are order-invariant.
inline FusedResult fused_attention(const DenseTensor& q, const DenseTensor& k,
                                   const DenseTensor& v, const AttentionWorkload& w,
                                   const DataflowConfig& cfg, const HardwareConfig& hw,
                                   const std::vector<std::uint64_t>& chunk_order = {}) {
  const std::uint64_t B = w.batch, H = w.heads, N = w.seq_len, dk = w.head_dim();
  if (N > 512) throw std::invalid_argument("fused_attention: seq_len capped at 512");
  if (q.dims != std::vector<std::uint64_t>{B, H, N, dk} || k.dims != q.dims || v.dims != q.dims)
    throw std::invalid_argument("fused_attention: tensor shape does not match workload");
  {
    auto res = validate(cfg, w);
    if (!res.ok())
      throw std::invalid_argument("fused_attention: " + res.violations.front().message);
  }

  const bool fused = cfg.mode == DataflowConfig::Mode::Flat;
  if (!fused && B * H * N * N > (1ull << 27))
    throw std::invalid_argument("fused_attention: unfused intermediate too large to materialize");

  const std::vector<detail::ChunkCoord> chunks = detail::chunk_coords(w, cfg);
  std::vector<std::uint64_t> order(chunks.size());
  std::iota(order.begin(), order.end(), 0);
  if (!chunk_order.empty()) {
    if (chunk_order.size() != chunks.size())
      throw std::invalid_argument("fused_attention: chunk_order size mismatch");
    order = chunk_order;
  }

  FusedResult result;
  result.out = DenseTensor::zeros({B, H, N, dk});
  TouchCounters& tc = result.touches;

  const Residency res = staging_residency(w, cfg, hw);
  const std::uint64_t kv_words = N * dk;
  // A resident K/V prefix only matters when a head is revisited (R
  // granularity); otherwise each head streams exactly once regardless.
  const bool revisits = cfg.mode != DataflowConfig::Mode::Base && cfg.gran.kind == GranKind::R;
  const std::uint64_t res_k = revisits ? std::min(res.k, kv_words) : 0;
  const std::uint64_t res_v = revisits ? std::min(res.v, kv_words) : 0;
  // Unfused whole-tensor staging keeps a resident prefix of the
  // intermediate across both phases; fused staging holds one chunk.
  const bool whole_int =
      cfg.mode == DataflowConfig::Mode::BaseTiled && cfg.gran.kind == GranKind::M;
  const std::uint64_t res_int = res.logit;

  std::vector<char> k_prefix_paid(B * H, 0), v_prefix_paid(B * H, 0);
  std::vector<double> logits;
  std::vector<std::vector<double>> head_logits;  // unfused: full logit plane per head
  if (!fused) head_logits.assign(B * H, {});

  std::uint64_t int_produced = 0;  // cumulative words, for whole-tensor residency

  // Phase 1: logit, plus softmax/attend inline when fused.
  for (std::uint64_t ci : order) {
    const detail::ChunkCoord& cc = chunks[ci];
    std::uint64_t chunk_int = 0;
    for (std::uint64_t b = cc.b0; b < cc.b0 + cc.nb; ++b)
      for (std::uint64_t h = cc.h0; h < cc.h0 + cc.nh; ++h) {
        const std::uint64_t g = b * H + h;
        if (!k_prefix_paid[g]) {
          k_prefix_paid[g] = 1;
          tc.k.offchip_reads += res_k;
          tc.k.sg_writes += kv_words;
          tc.k.sg_reads += kv_words;
        }
        tc.k.offchip_reads += kv_words - res_k;  // non-resident K streams per pass
        if (fused) {
          if (!v_prefix_paid[g]) {
            v_prefix_paid[g] = 1;
            tc.v.offchip_reads += res_v;
            tc.v.sg_writes += kv_words;
            tc.v.sg_reads += kv_words;
          }
          tc.v.offchip_reads += kv_words - res_v;
        }

        const std::uint64_t q_words = cc.rows * dk;
        const std::uint64_t int_words = cc.rows * N;
        tc.q.offchip_reads += q_words;
        tc.q.sg_writes += q_words;
        tc.q.sg_reads += q_words;
        tc.logit.sg_writes += int_words;
        tc.logit.sg_reads += int_words;
        chunk_int += int_words;

        logits.assign(cc.rows * N, 0.0);
        for (std::uint64_t r = 0; r < cc.rows; ++r)
          for (std::uint64_t j = 0; j < N; ++j) {
            double acc = 0.0;
            for (std::uint64_t d = 0; d < dk; ++d)
              acc += q.at(b, h, cc.row0 + r, d) * k.at(b, h, j, d);
            logits[r * N + j] = acc;
          }

        if (fused) {
          detail::softmax_attend_rows(logits, cc.rows, N, v, b, h, cc.row0, result.out,
                                      result.max_row_sum_err);
          tc.out.sg_writes += q_words;
          tc.out.sg_reads += q_words;
          tc.out.offchip_writes += q_words;
        } else {
          if (head_logits[g].empty()) head_logits[g].assign(N * N, 0.0);
          std::copy(logits.begin(), logits.end(), head_logits[g].begin() + cc.row0 * N);
        }
      }

    if (fused) {
      // The chunk's intermediate lives in its staging slot; anything past
      // the resident words makes an off-chip round trip.
      const std::uint64_t spill = chunk_int > res_int ? chunk_int - res_int : 0;
      tc.logit.offchip_writes += spill;
      tc.logit.offchip_reads += spill;
    } else {
      // Unfused: the chunk's logits leave for the intermediate tensor;
      // resident capacity keeps the first words produced, the rest spills.
      const std::uint64_t keep = whole_int ? res_int : 0;
      const std::uint64_t start = int_produced, end = int_produced + chunk_int;
      const std::uint64_t lo = std::max(start, keep);
      tc.logit.offchip_writes += end > lo ? end - lo : 0;
      int_produced = end;
    }
  }

  if (fused) return result;

  // Phase 2: softmax and attend over the staged/fetched intermediate.
  std::uint64_t int_consumed = 0;
  for (std::uint64_t ci : order) {
    const detail::ChunkCoord& cc = chunks[ci];
    for (std::uint64_t b = cc.b0; b < cc.b0 + cc.nb; ++b)
      for (std::uint64_t h = cc.h0; h < cc.h0 + cc.nh; ++h) {
        const std::uint64_t g = b * H + h;
        if (!v_prefix_paid[g]) {
          v_prefix_paid[g] = 1;
          tc.v.offchip_reads += res_v;
          tc.v.sg_writes += kv_words;
          tc.v.sg_reads += kv_words;
        }
        tc.v.offchip_reads += kv_words - res_v;

        const std::uint64_t int_words = cc.rows * N;
        const std::uint64_t keep = whole_int ? res_int : 0;
        const std::uint64_t start = int_consumed, end = int_consumed + int_words;
        const std::uint64_t lo = std::max(start, keep);
        tc.logit.offchip_reads += end > lo ? end - lo : 0;
        int_consumed = end;

        logits.assign(head_logits[g].begin() + cc.row0 * N,
                      head_logits[g].begin() + (cc.row0 + cc.rows) * N);
        detail::softmax_attend_rows(logits, cc.rows, N, v, b, h, cc.row0, result.out,
                                    result.max_row_sum_err);
        tc.out.sg_writes += cc.rows * dk;
        tc.out.sg_reads += cc.rows * dk;
        tc.out.offchip_writes += cc.rows * dk;
      }
  }
  return result;
}

}  // namespace flatdse
