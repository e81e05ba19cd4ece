#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include <flatdse/dse.hpp>

using namespace flatdse;

namespace {

AttentionWorkload small8() {
  AttentionWorkload w;
  w.name = "small8";
  w.batch = 2;
  w.seq_len = 8;
  w.embed = 8;
  w.heads = 2;
  return w;
}

EvaluatedConfig mk(const std::string& key, double util, double dram_energy,
                   std::uint64_t peak) {
  EvaluatedConfig ec;
  ec.key = key;
  ec.report.util = util;
  ec.report.energy.dram = dram_energy;
  ec.report.peak_footprint_bytes = peak;
  return ec;
}

}  // namespace

TEST_CASE("objective scores order configs and break ties on the key") {
  EvaluatedConfig a = mk("a", 0.9, 50.0, 1000);
  EvaluatedConfig b = mk("b", 0.8, 10.0, 100);

  CHECK(better(Objective::MaxUtil, a, b));
  CHECK_FALSE(better(Objective::MaxUtil, b, a));
  CHECK(better(Objective::MinEnergy, b, a));
  CHECK(better(Objective::MinFootprint, b, a));
  CHECK(better(Objective::MaxUtilPerFootprint, b, a));  // 0.008 > 0.0009

  EvaluatedConfig tie = mk("aa", 0.9, 50.0, 1000);
  CHECK(better(Objective::MaxUtil, a, tie));  // "a" < "aa"
  CHECK_FALSE(better(Objective::MaxUtil, tie, a));

  EvaluatedConfig zero = mk("z", 0.5, 0.0, 0);
  CHECK(objective_score(Objective::MaxUtilPerFootprint, zero.report) == 0.5);

  CHECK(parse_objective("max-util") == Objective::MaxUtil);
  CHECK(parse_objective("min-energy") == Objective::MinEnergy);
  CHECK(parse_objective("min-footprint") == Objective::MinFootprint);
  CHECK(parse_objective("util-per-footprint") == Objective::MaxUtilPerFootprint);
  CHECK_THROWS_AS(parse_objective("fastest"), std::invalid_argument);
  for (Objective o : {Objective::MaxUtil, Objective::MinEnergy, Objective::MinFootprint,
                      Objective::MaxUtilPerFootprint})
    CHECK(parse_objective(to_string(o)) == o);
}

TEST_CASE("dominance requires no-worse everywhere and one strict edge") {
  CostReport a = mk("", 0.9, 10.0, 100).report;
  CostReport b = mk("", 0.8, 20.0, 200).report;
  CHECK(dominates(a, b));
  CHECK_FALSE(dominates(b, a));

  CostReport eq = a;
  CHECK_FALSE(dominates(a, eq));
  CHECK_FALSE(dominates(eq, a));

  CostReport trade = mk("", 0.95, 30.0, 100).report;  // better util, worse energy
  CHECK_FALSE(dominates(a, trade));
  CHECK_FALSE(dominates(trade, a));

  CostReport one_edge = mk("", 0.9, 10.0, 50).report;
  CHECK(dominates(one_edge, a));
}

TEST_CASE("search best matches an independent re-scan of the full dump") {
  const AttentionWorkload w = small8();
  HardwareConfig hw;
  hw.sg_bytes = 1 << 20;
  SearchBounds b;
  b.intra = {{Stationarity::Weight, 8, 8, 8}};

  for (Objective obj : {Objective::MaxUtil, Objective::MinEnergy, Objective::MinFootprint,
                        Objective::MaxUtilPerFootprint}) {
    std::vector<EvaluatedConfig> dump;
    SearchOptions opt;
    opt.jobs = 1;
    DseResult res = search(w, hw, b, obj, opt,
                           [&](const EvaluatedConfig& ec) { dump.push_back(ec); });
    REQUIRE(res.evaluated_count == 294);
    CHECK(res.skipped_count == 0);
    REQUIRE(dump.size() == res.evaluated_count);

    std::vector<EvaluatedConfig> sorted = dump;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [&](const EvaluatedConfig& x, const EvaluatedConfig& y) {
                       const double sx = objective_score(obj, x.report);
                       const double sy = objective_score(obj, y.report);
                       if (sx != sy) return sx > sy;
                       return x.key < y.key;
                     });
    CHECK(res.best.key == sorted.front().key);
    CHECK(objective_score(obj, res.best.report) ==
          objective_score(obj, sorted.front().report));
  }
}

TEST_CASE("the dump arrives in enumeration order and worker count changes nothing") {
  const AttentionWorkload w = small8();
  HardwareConfig hw;
  hw.sg_bytes = 1 << 20;
  SearchBounds b;
  b.intra = {{Stationarity::Weight, 8, 8, 8}};

  std::vector<std::string> order1, order8;
  SearchOptions j1;
  j1.jobs = 1;
  SearchOptions j8;
  j8.jobs = 8;
  DseResult r1 = search(w, hw, b, Objective::MaxUtil, j1,
                        [&](const EvaluatedConfig& ec) { order1.push_back(ec.key); });
  DseResult r8 = search(w, hw, b, Objective::MaxUtil, j8,
                        [&](const EvaluatedConfig& ec) { order8.push_back(ec.key); });

  CHECK(order1 == order8);
  CHECK(r1.best.key == r8.best.key);
  CHECK(r1.best.report.util == r8.best.report.util);
  CHECK(r1.evaluated_count == r8.evaluated_count);
  REQUIRE(r1.pareto.size() == r8.pareto.size());
  for (std::size_t i = 0; i < r1.pareto.size(); ++i)
    CHECK(r1.pareto[i].key == r8.pareto[i].key);

  const auto space = enumerate_space(w, hw, b);
  REQUIRE(space.size() == order1.size());
  for (std::size_t i = 0; i < space.size(); ++i)
    CHECK(canonical_key(space[i]) == order1[i]);
}

TEST_CASE("the Pareto front survives a brute-force dominance audit") {
  const AttentionWorkload w = small8();
  HardwareConfig hw;
  hw.sg_bytes = 1 << 20;
  SearchBounds b;
  b.intra = {{Stationarity::Weight, 8, 8, 8}, {Stationarity::Weight, 4, 4, 4}};

  std::vector<EvaluatedConfig> dump;
  SearchOptions opt;
  opt.jobs = 2;
  DseResult res = search(w, hw, b, Objective::MaxUtil, opt,
                         [&](const EvaluatedConfig& ec) { dump.push_back(ec); });
  REQUIRE_FALSE(res.pareto.empty());

  std::set<std::string> front_keys;
  for (const auto& p : res.pareto) front_keys.insert(p.key);
  CHECK(front_keys.size() == res.pareto.size());

  // Front members never dominate each other.
  for (const auto& p : res.pareto)
    for (const auto& q : res.pareto) CHECK_FALSE(dominates(p.report, q.report));

  // No evaluated config dominates a front member.
  for (const auto& ec : dump)
    for (const auto& p : res.pareto) CHECK_FALSE(dominates(ec.report, p.report));

  // Every non-member is dominated by, or ties exactly with, a front member.
  auto triple_eq = [](const CostReport& x, const CostReport& y) {
    return x.util == y.util && x.energy.total() == y.energy.total() &&
           x.peak_footprint_bytes == y.peak_footprint_bytes;
  };
  for (const auto& ec : dump) {
    if (front_keys.count(ec.key)) continue;
    bool covered = false;
    for (const auto& p : res.pareto) {
      if (dominates(p.report, ec.report) || triple_eq(p.report, ec.report)) {
        covered = true;
        break;
      }
    }
    CHECK(covered);
  }

  // Front ordering: util desc, then energy asc, then footprint asc.
  for (std::size_t i = 1; i < res.pareto.size(); ++i) {
    const auto& a = res.pareto[i - 1].report;
    const auto& c = res.pareto[i].report;
    const bool ordered =
        a.util > c.util ||
        (a.util == c.util &&
         (a.energy.total() < c.energy.total() ||
          (a.energy.total() == c.energy.total() &&
           a.peak_footprint_bytes <= c.peak_footprint_bytes)));
    CHECK(ordered);
  }
}

TEST_CASE("capacity rejections are skipped and an exhausted space throws") {
  const AttentionWorkload w = small8();
  HardwareConfig hw;
  hw.sg_bytes = 300;  // large chunks with the 8^3 tile need a 512B reserve
  SearchBounds b;
  b.intra = {{Stationarity::Weight, 4, 4, 4}, {Stationarity::Weight, 8, 8, 8}};

  SearchOptions opt;
  opt.jobs = 1;
  std::vector<EvaluatedConfig> dump;
  DseResult res = search(w, hw, b, Objective::MaxUtil, opt,
                         [&](const EvaluatedConfig& ec) { dump.push_back(ec); });
  const auto space = enumerate_space(w, hw, b);
  CHECK(res.evaluated_count + res.skipped_count == space.size());
  CHECK(res.skipped_count > 0);
  CHECK(res.evaluated_count > 0);
  for (const auto& ec : dump)
    CHECK(l2_reserved_words(w, ec.config) * w.bytes_per_word() <= hw.sg_bytes);

  DataflowConfig refused;
  refused.mode = DataflowConfig::Mode::Flat;
  refused.intra = {Stationarity::Weight, 8, 8, 8};
  CHECK_THROWS_AS(schedule(w, refused, hw), CapacityError);

  SearchOptions strict = opt;
  strict.spill_allowed = false;
  DseResult rs = search(w, hw, b, Objective::MaxUtil, strict);
  CHECK(rs.skipped_count > res.skipped_count);

  HardwareConfig starved = hw;
  starved.sg_bytes = 50;  // below even the smallest clipped tile reserve
  CHECK_THROWS_AS(search(w, starved, b, Objective::MaxUtil, opt), EmptySpaceError);

  SearchBounds empty;
  empty.modes = {DataflowConfig::Mode::Flat};
  empty.flat_grans = {GranKind::R};
  empty.rows = {16};  // exceeds seq_len
  CHECK_THROWS_AS(search(w, hw, empty, Objective::MaxUtil, opt), EmptySpaceError);
}

TEST_CASE("variant names select the advertised sub-spaces") {
  SearchBounds all = variant_bounds("opt");
  CHECK(all.modes.empty());
  CHECK(variant_bounds("all").modes.empty());

  SearchBounds base = variant_bounds("base");
  REQUIRE(base.modes.size() == 1);
  CHECK(base.modes[0] == DataflowConfig::Mode::Base);

  SearchBounds bopt = variant_bounds("base-opt");
  REQUIRE(bopt.modes.size() == 2);
  CHECK(bopt.modes[1] == DataflowConfig::Mode::BaseTiled);

  SearchBounds bm = variant_bounds("base-m");
  CHECK(bm.modes == std::vector<DataflowConfig::Mode>{DataflowConfig::Mode::BaseTiled});
  CHECK(bm.base_grans == std::vector<GranKind>{GranKind::M});
  CHECK(variant_bounds("base-b").base_grans == std::vector<GranKind>{GranKind::B});
  CHECK(variant_bounds("base-h").base_grans == std::vector<GranKind>{GranKind::H});

  SearchBounds fr = variant_bounds("flat-r");
  CHECK(fr.modes == std::vector<DataflowConfig::Mode>{DataflowConfig::Mode::Flat});
  CHECK(fr.flat_grans == std::vector<GranKind>{GranKind::R});
  CHECK(fr.rows.empty());

  SearchBounds fr64 = variant_bounds("flat-r64");
  CHECK(fr64.rows == std::vector<std::uint64_t>{64});

  CHECK(variant_bounds("flat-m").flat_grans == std::vector<GranKind>{GranKind::M});
  CHECK(variant_bounds("flat-opt").flat_grans.empty());

  CHECK_THROWS_AS(variant_bounds("bogus"), std::invalid_argument);
  CHECK_THROWS_AS(variant_bounds("flat-r0"), std::invalid_argument);
  CHECK_THROWS_AS(variant_bounds("flat-r7x"), std::invalid_argument);
  CHECK_THROWS_AS(variant_bounds("flat-rx"), std::invalid_argument);

  const auto& names = default_variants();
  CHECK(names.size() == 10);
  for (const auto& n : names) CHECK_NOTHROW(variant_bounds(n));
  CHECK(std::find(names.begin(), names.end(), "flat-opt") != names.end());
  CHECK(std::find(names.begin(), names.end(), "base-opt") != names.end());
}
