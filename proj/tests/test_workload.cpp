#include <catch2/catch_amalgamated.hpp>

#include <flatdse/workload.hpp>

#include "oracles.hpp"

using namespace flatdse;

namespace {

AttentionWorkload bert() {
  AttentionWorkload w;
  w.name = "bert-base";
  w.batch = 64;
  w.seq_len = 512;
  w.embed = 768;
  w.heads = 12;
  w.blocks = 12;
  return w;
}

const OperatorSpec& find_op(const std::array<OperatorSpec, 9>& ops, OperatorKind k) {
  for (const auto& op : ops)
    if (op.kind == k) return op;
  throw std::logic_error("operator kind missing");
}

}  // namespace

TEST_CASE("operator MAC counts match literal loop counting") {
  AttentionWorkload w;
  w.batch = 2;
  w.seq_len = 8;
  w.embed = 8;
  w.heads = 2;
  const auto ops = derive_operators(w);
  for (const auto& op : ops) {
    if (!op.is_gemm()) continue;
    std::uint64_t total = 0;
    for (std::uint64_t i = 0; i < op.instances; ++i) total += oracles::counted_macs(op.m, op.k, op.n);
    CHECK(op.macs() == total);
  }
  CHECK(find_op(ops, OperatorKind::Logit).macs() == 1024);
  CHECK(find_op(ops, OperatorKind::Softmax).macs() == 0);
}

TEST_CASE("operator dimensions and MAC totals on bert-base") {
  const auto ops = derive_operators(bert());
  const std::uint64_t proj = 19327352832ull;
  CHECK(find_op(ops, OperatorKind::Q).macs() == proj);
  CHECK(find_op(ops, OperatorKind::K).macs() == proj);
  CHECK(find_op(ops, OperatorKind::V).macs() == proj);
  CHECK(find_op(ops, OperatorKind::Out).macs() == proj);
  CHECK(find_op(ops, OperatorKind::Logit).macs() == 12884901888ull);
  CHECK(find_op(ops, OperatorKind::Attend).macs() == 12884901888ull);
  CHECK(find_op(ops, OperatorKind::Fc1).macs() == 77309411328ull);
  CHECK(find_op(ops, OperatorKind::Fc2).macs() == 77309411328ull);
  CHECK(block_macs(bert()) == 257698037760ull);

  const auto& logit = find_op(ops, OperatorKind::Logit);
  CHECK(logit.instances == 64 * 12);
  CHECK(logit.m == 512);
  CHECK(logit.k == 64);
  CHECK(logit.n == 512);
  CHECK(logit.in2_role == OperandRole::Activation);
  const auto& fc1 = find_op(ops, OperatorKind::Fc1);
  CHECK(fc1.instances == 1);
  CHECK(fc1.m == 64 * 512);
  CHECK(fc1.k == 768);
  CHECK(fc1.n == 4 * 768);
  CHECK(fc1.in2_role == OperandRole::Weight);
}

TEST_CASE("access counts for the logit operator, both layouts") {
  AttentionWorkload w;
  w.batch = 2;
  w.seq_len = 128;
  w.embed = 64;
  w.heads = 4;
  const auto ops = derive_operators(w);
  const auto& logit = find_op(ops, OperatorKind::Logit);
  CHECK(logit.macs() == 2097152);

  const AccessCounts multi = access_counts(logit, true);
  CHECK(multi.in1_words == 16384);
  CHECK(multi.in2_words == 16384);
  CHECK(multi.out_words == 131072);

  const AccessCounts single = access_counts(logit, false);
  CHECK(single.in1_words == 16384);
  CHECK(single.in2_words == 16384);
  CHECK(single.out_words == 32768);

  const auto& att = find_op(ops, OperatorKind::Attend);
  const AccessCounts am = access_counts(att, true);
  CHECK(am.in1_words == 131072);
  CHECK(am.in2_words == 16384);
  CHECK(am.out_words == 16384);
}

TEST_CASE("operational intensity of the fused pair") {
  AttentionWorkload w;
  w.batch = 2;
  w.seq_len = 128;
  w.embed = 64;
  w.heads = 4;
  const auto ops = derive_operators(w);
  const auto& logit = find_op(ops, OperatorKind::Logit);
  CHECK(operational_intensity(logit) == Catch::Approx(12.8).epsilon(1e-12));

  const double recip = 1.0 / operational_intensity(logit);
  const double law = 2.0 / static_cast<double>(w.seq_len) +
                     static_cast<double>(w.heads) / static_cast<double>(w.embed);
  CHECK(recip == Catch::Approx(law).margin(1e-12));
}

TEST_CASE("logit and attend intensity is batch-invariant, exactly") {
  for (std::uint64_t n : {32ull, 96ull, 256ull}) {
    AttentionWorkload a;
    a.seq_len = n;
    a.embed = 96;
    a.heads = 6;
    a.batch = 1;
    AttentionWorkload b = a;
    b.batch = 24;
    for (OperatorKind kind : {OperatorKind::Logit, OperatorKind::Attend}) {
      const auto& opa = find_op(derive_operators(a), kind);
      const auto& opb = find_op(derive_operators(b), kind);
      CHECK(oracles::same_ratio(opa.macs(), access_counts(opa).total(), opb.macs(),
                                access_counts(opb).total()));
    }
  }
}

TEST_CASE("projection intensity strictly increases with batch") {
  for (OperatorKind kind :
       {OperatorKind::Q, OperatorKind::K, OperatorKind::V, OperatorKind::Out, OperatorKind::Fc1,
        OperatorKind::Fc2}) {
    std::uint64_t prev_macs = 0, prev_total = 1;
    bool first = true;
    for (std::uint64_t batch : {1ull, 2ull, 4ull, 16ull, 64ull}) {
      AttentionWorkload w;
      w.batch = batch;
      w.seq_len = 64;
      w.embed = 128;
      w.heads = 4;
      const auto& op = find_op(derive_operators(w), kind);
      const std::uint64_t macs = op.macs(), total = access_counts(op).total();
      if (!first) CHECK(oracles::less_ratio(prev_macs, prev_total, macs, total));
      prev_macs = macs;
      prev_total = total;
      first = false;
    }
  }
}

TEST_CASE("roofline attainable rate") {
  const double peak = 256.0 * 256.0 * 1e9;
  CHECK(roofline_attainable(12.8, peak, 400e9, 16) == Catch::Approx(2.56e12).epsilon(1e-12));
  CHECK(roofline_attainable(12.8, peak, 400e9, 32) == Catch::Approx(1.28e12).epsilon(1e-12));
  CHECK(roofline_attainable(1e9, peak, 400e9, 16) == Catch::Approx(peak));
  CHECK(roofline_attainable(0.0, peak, 400e9, 16) == 0.0);
  CHECK_THROWS_AS(roofline_attainable(-1.0, peak, 400e9, 16), std::invalid_argument);
}

TEST_CASE("sfu visit counts") {
  const AttentionWorkload w = bert();
  CHECK(softmax_sfu_visits(w) == 5ull * 64 * 12 * 512 * 512);
  CHECK(softmax_sfu_visits(w) == 1006632960ull);
  CHECK(normalization_sfu_visits(w) == 2ull * 64 * 512 * 768);
  CHECK(normalization_sfu_visits(w) == 50331648ull);
}

TEST_CASE("workload validation") {
  AttentionWorkload w = bert();
  CHECK(w.violations().empty());
  CHECK(w.head_dim() == 64);
  CHECK(w.bytes_per_word() == 2);

  w.heads = 5;
  CHECK_FALSE(w.violations().empty());
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);

  AttentionWorkload z;
  z.batch = 0;
  CHECK_FALSE(z.violations().empty());

  AttentionWorkload b = bert();
  b.bits = 12;
  CHECK_FALSE(b.violations().empty());
}
