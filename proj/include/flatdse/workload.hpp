#pragma once

// Attention workload algebra: operator derivation, access counting,
// operational intensity and the roofline bound.
//
// One encoder block with batch B, sequence length N, embedding D, H heads
// (head depth dk = D/H) and FC expansion ff decomposes into:
//
//   Q/K/V proj   [B*N, D] x [D, D]            B*N*D^2 MACs each
//   L  (logit)   per (b,h): [N, dk] x [dk, N] B*H*N^2*dk = B*N^2*D MACs
//   Softmax      row-wise over B*H*N rows of length N, SFU work, no MACs
//   A  (attend)  per (b,h): [N, N] x [N, dk]  B*N^2*D MACs
//   O  proj      [B*N, D] x [D, D]            B*N*D^2 MACs
//   FC1          [B*N, D] x [D, ff*D]         ff*B*N*D^2 MACs
//   FC2          [B*N, ff*D] x [ff*D, D]      ff*B*N*D^2 MACs
//
// L and A are the fusion targets: their second operand is an activation
// (K^T resp. softmax output), their MAC count grows as N^2 while their
// operand traffic grows as B*H*N^2 words for the intermediate alone.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace flatdse {

struct AttentionWorkload {
  std::string name = "attention";
  std::uint64_t batch = 1;     // B
  std::uint64_t seq_len = 1;   // N
  std::uint64_t embed = 1;     // D
  std::uint64_t heads = 1;     // H
  std::uint64_t blocks = 1;    // encoder blocks in the model
  std::uint64_t ff_mult = 4;   // FC expansion factor
  std::uint32_t bits = 16;     // datatype width for every tensor

  std::uint64_t head_dim() const { return embed / heads; }
  std::uint64_t bytes_per_word() const { return bits / 8; }

  std::vector<std::string> violations() const {
    std::vector<std::string> v;
    if (batch < 1) v.push_back("batch must be >= 1");
    if (seq_len < 1) v.push_back("seq_len must be >= 1");
    if (embed < 1) v.push_back("embed must be >= 1");
    if (heads < 1) v.push_back("heads must be >= 1");
    if (blocks < 1) v.push_back("blocks must be >= 1");
    if (ff_mult < 1) v.push_back("ff_mult must be >= 1");
    if (bits != 8 && bits != 16 && bits != 32)
      v.push_back("bits must be one of 8, 16, 32");
    if (heads >= 1 && embed >= 1 && embed % heads != 0)
      v.push_back("embed must be divisible by heads");
    return v;
  }

  void validate() const {
    auto v = violations();
    if (!v.empty()) throw std::invalid_argument("workload: " + v.front());
  }
};

enum class OperatorKind { Q, K, V, Logit, Softmax, Attend, Out, Fc1, Fc2 };

inline const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::Q: return "Q";
    case OperatorKind::K: return "K";
    case OperatorKind::V: return "V";
    case OperatorKind::Logit: return "L";
    case OperatorKind::Softmax: return "Softmax";
    case OperatorKind::Attend: return "A";
    case OperatorKind::Out: return "O";
    case OperatorKind::Fc1: return "FC1";
    case OperatorKind::Fc2: return "FC2";
  }
  return "?";
}

enum class OperandRole { Activation, Weight };

// One operator of the block. GEMM kinds carry per-instance dims [m, k] x
// [k, n] plus an instance count (B*H independent GEMMs for L and A, one
// batched GEMM for the weight operators). Softmax carries m = number of
// rows and n = row length with k == 0.
struct OperatorSpec {
  OperatorKind kind = OperatorKind::Q;
  std::uint64_t instances = 1;
  std::uint64_t m = 0;
  std::uint64_t k = 0;
  std::uint64_t n = 0;
  std::uint64_t heads = 1;  // heads folded into `instances` (L/A/Softmax)
  OperandRole in2_role = OperandRole::Weight;

  bool is_gemm() const { return kind != OperatorKind::Softmax; }
  std::uint64_t macs() const { return is_gemm() ? instances * m * k * n : 0; }
};

struct AccessCounts {
  std::uint64_t in1_words = 0;
  std::uint64_t in2_words = 0;
  std::uint64_t out_words = 0;
  std::uint64_t total() const { return in1_words + in2_words + out_words; }
};

inline std::array<OperatorSpec, 9> derive_operators(const AttentionWorkload& w) {
  w.validate();
  const std::uint64_t B = w.batch, N = w.seq_len, D = w.embed, H = w.heads;
  const std::uint64_t dk = w.head_dim(), ff = w.ff_mult;
  auto proj = [&](OperatorKind kind) {
    return OperatorSpec{kind, 1, B * N, D, D, 1, OperandRole::Weight};
  };
  return {
      proj(OperatorKind::Q),
      proj(OperatorKind::K),
      proj(OperatorKind::V),
      OperatorSpec{OperatorKind::Logit, B * H, N, dk, N, H, OperandRole::Activation},
      OperatorSpec{OperatorKind::Softmax, B * H, N, 0, N, H, OperandRole::Activation},
      OperatorSpec{OperatorKind::Attend, B * H, N, N, dk, H, OperandRole::Activation},
      proj(OperatorKind::Out),
      OperatorSpec{OperatorKind::Fc1, 1, B * N, D, ff * D, 1, OperandRole::Weight},
      OperatorSpec{OperatorKind::Fc2, 1, B * N, ff * D, D, 1, OperandRole::Weight},
  };
}

// Words touched per full execution, counting every element of each operand
// exactly once. With multi_head (the default) L and A keep the per-head
// layout, so the intermediate is B*H*N^2 words. With multi_head = false the
// head dimension folds back into the contraction (L) or output (A) dim,
// giving the single-head layout with a B*N^2-word intermediate.
inline AccessCounts access_counts(const OperatorSpec& op, bool multi_head = true) {
  if (op.kind == OperatorKind::Softmax) {
    const std::uint64_t elems = op.instances * op.m * op.n;
    return {elems, 0, elems};
  }
  std::uint64_t inst = op.instances, m = op.m, k = op.k, n = op.n;
  if (!multi_head && op.heads > 1) {
    inst /= op.heads;
    if (op.kind == OperatorKind::Logit) k *= op.heads;
    if (op.kind == OperatorKind::Attend) n *= op.heads;
  }
  AccessCounts c;
  c.in1_words = inst * m * k;
  c.out_words = inst * m * n;
  // Weights are shared across the (single) instance; activations are per
  // instance. Either way in2 is inst * k * n here because weight operators
  // always have inst == 1.
  c.in2_words = inst * k * n;
  return c;
}

// MACs per word moved, the x-axis of the roofline. For multi-head L/A:
//
//   OI = B*N^2*D / (2*B*N*D + B*H*N^2)   =>   1/OI = 2/N + H/D
//
// independent of batch. For the weight operators:
//
//   OI = B*N*D^2 / (2*B*N*D + D^2)       =>   1/OI = 2/D + 1/(B*N)
//
// strictly increasing in batch.
inline double operational_intensity(const OperatorSpec& op, bool multi_head = true) {
  const AccessCounts c = access_counts(op, multi_head);
  if (c.total() == 0) throw std::invalid_argument("operational_intensity: zero access count");
  return static_cast<double>(op.macs()) / static_cast<double>(c.total());
}

// Attainable MAC rate under a bandwidth roof:
//
//   attainable = min(peak_macs_per_s, oi [MAC/word] * bw [B/s] / word_bytes)
//
// Staging on-chip swaps the off-chip bandwidth for the on-chip supply rate,
// i.e. it raises the sloped part of the roof; the flat part (peak) caps both.
inline double roofline_attainable(double oi_macs_per_word, double peak_macs_per_s,
                                  double effective_bw_bytes_per_s,
                                  std::uint32_t bits) {
  if (oi_macs_per_word < 0) throw std::invalid_argument("roofline_attainable: negative OI");
  const double words_per_s = effective_bw_bytes_per_s / (bits / 8.0);
  const double bw_bound = oi_macs_per_word * words_per_s;
  return bw_bound < peak_macs_per_s ? bw_bound : peak_macs_per_s;
}

// SFU element-visit costs. Softmax spends 5 visits per logit element
// (max-scan, subtract+exp, sum, divide amortized over two passes);
// normalization spends 2 visits per activation element. Visits are reported
// alongside MACs and only turn into cycles when the SFU rate is finite.
inline std::uint64_t softmax_sfu_visits(const AttentionWorkload& w) {
  return 5 * w.batch * w.heads * w.seq_len * w.seq_len;
}

inline std::uint64_t normalization_sfu_visits(const AttentionWorkload& w) {
  return 2 * w.batch * w.seq_len * w.embed;
}

inline std::uint64_t block_macs(const AttentionWorkload& w) {
  std::uint64_t total = 0;
  for (const auto& op : derive_operators(w)) total += op.macs();
  return total;
}

}  // namespace flatdse
