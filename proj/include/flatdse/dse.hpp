#pragma once

// Design-space exploration over the enumerated dataflow configs: evaluate
// every config with the cost model, pick the best under an objective, and
// keep the Pareto front over (utilization up, energy down, footprint down).
//
// Determinism: the enumeration order is fixed, results are reduced in
// enumeration order regardless of the worker count, and every tie on an
// objective or front position is broken by the lexicographically smallest
// canonical config key.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "flatdse/costmodel.hpp"
#include "flatdse/dataflow.hpp"

namespace flatdse {

enum class Objective { MaxUtil, MinEnergy, MinFootprint, MaxUtilPerFootprint };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::MaxUtil: return "max-util";
    case Objective::MinEnergy: return "min-energy";
    case Objective::MinFootprint: return "min-footprint";
    case Objective::MaxUtilPerFootprint: return "util-per-footprint";
  }
  return "?";
}

inline Objective parse_objective(const std::string& s) {
  if (s == "max-util") return Objective::MaxUtil;
  if (s == "min-energy") return Objective::MinEnergy;
  if (s == "min-footprint") return Objective::MinFootprint;
  if (s == "util-per-footprint") return Objective::MaxUtilPerFootprint;
  throw std::invalid_argument("unknown objective: " + s);
}

struct EvaluatedConfig {
  DataflowConfig config;
  CostReport report;
  std::string key;  // canonical config key
};

// Higher is better under every objective.
inline double objective_score(Objective o, const CostReport& r) {
  switch (o) {
    case Objective::MaxUtil: return r.util;
    case Objective::MinEnergy: return -r.energy.total();
    case Objective::MinFootprint: return -static_cast<double>(r.peak_footprint_bytes);
    case Objective::MaxUtilPerFootprint:
      return r.util / static_cast<double>(std::max<std::uint64_t>(r.peak_footprint_bytes, 1));
  }
  return 0;
}

inline bool better(Objective o, const EvaluatedConfig& a, const EvaluatedConfig& b) {
  const double sa = objective_score(o, a.report), sb = objective_score(o, b.report);
  if (sa != sb) return sa > sb;
  return a.key < b.key;
}

// a dominates b on (util, energy, footprint) with at least one strict edge.
inline bool dominates(const CostReport& a, const CostReport& b) {
  if (a.util < b.util || a.energy.total() > b.energy.total() ||
      a.peak_footprint_bytes > b.peak_footprint_bytes)
    return false;
  return a.util > b.util || a.energy.total() < b.energy.total() ||
         a.peak_footprint_bytes < b.peak_footprint_bytes;
}

struct SearchOptions {
  Scope scope = Scope::LA;
  unsigned jobs = 0;          // 0 = hardware concurrency, capped at 16
  bool spill_allowed = true;  // false: overflowing configs are skipped, not errors
};

struct DseResult {
  EvaluatedConfig best;
  std::vector<EvaluatedConfig> pareto;  // util desc, energy asc, footprint asc
  std::uint64_t evaluated_count = 0;
  std::uint64_t skipped_count = 0;  // configs rejected by capacity checks
};

namespace detail {

// Pareto front with duplicate (util, energy, footprint) triples collapsed
// to the lexicographically smallest key. Input must already be sorted by
// (util desc, energy asc, footprint asc, key asc).
inline std::vector<EvaluatedConfig> pareto_front(const std::vector<EvaluatedConfig>& sorted) {
  std::vector<EvaluatedConfig> front;
  // Staircase of kept (energy, footprint) pairs: energy ascending with
  // strictly descending footprint, so one lower_bound answers dominance.
  std::vector<std::pair<double, std::uint64_t>> stairs;
  auto dominated = [&](double e, std::uint64_t f) {
    auto it = std::upper_bound(stairs.begin(), stairs.end(), e,
                               [](double x, const auto& s) { return x < s.first; });
    if (it == stairs.begin()) return false;
    return std::prev(it)->second <= f;
  };
  auto insert_stair = [&](double e, std::uint64_t f) {
    auto it = std::upper_bound(stairs.begin(), stairs.end(), e,
                               [](double x, const auto& s) { return x < s.first; });
    if (it != stairs.begin() && std::prev(it)->second <= f) return;
    it = stairs.insert(it, {e, f});
    auto tail = std::next(it);
    while (tail != stairs.end() && tail->second >= f) tail = stairs.erase(tail);
  };
  double last_u = 0, last_e = 0;
  std::uint64_t last_f = 0;
  bool have_last = false;
  for (const auto& ec : sorted) {
    const double u = ec.report.util, e = ec.report.energy.total();
    const std::uint64_t f = ec.report.peak_footprint_bytes;
    if (have_last && u == last_u && e == last_e && f == last_f) continue;
    if (!dominated(e, f)) front.push_back(ec);
    insert_stair(e, f);
    last_u = u;
    last_e = e;
    last_f = f;
    have_last = true;
  }
  return front;
}

}  // namespace detail

// Evaluates the whole space. `sink`, when set, receives every successfully
// evaluated config in enumeration order (for space dumps).
inline DseResult search(const AttentionWorkload& w, const HardwareConfig& hw,
                        const SearchBounds& bounds, Objective objective,
                        const SearchOptions& opt = {},
                        const std::function<void(const EvaluatedConfig&)>& sink = {}) {
  const std::vector<DataflowConfig> space = enumerate_space(w, hw, bounds);
  std::vector<std::optional<EvaluatedConfig>> results(space.size());

  unsigned jobs = opt.jobs ? opt.jobs : std::thread::hardware_concurrency();
  jobs = std::max(1u, std::min({jobs, 16u, static_cast<unsigned>(space.size())}));

  ScheduleOptions sched_opt;
  sched_opt.scope = opt.scope;
  sched_opt.spill_allowed = opt.spill_allowed;
  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        EvaluatedConfig ec;
        ec.config = space[i];
        ec.report = schedule(w, space[i], hw, sched_opt);
        ec.key = canonical_key(space[i]);
        results[i] = std::move(ec);
      } catch (const CapacityError&) {
        // skipped; counted below
      }
    }
  };
  if (jobs == 1) {
    worker(0, space.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t stride = (space.size() + jobs - 1) / jobs;
    for (unsigned t = 0; t < jobs; ++t) {
      const std::size_t begin = t * stride;
      const std::size_t end = std::min(space.size(), begin + stride);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  DseResult out;
  std::vector<EvaluatedConfig> ok;
  ok.reserve(space.size());
  for (auto& r : results) {
    if (!r) {
      ++out.skipped_count;
      continue;
    }
    if (sink) sink(*r);
    ok.push_back(std::move(*r));
  }
  out.evaluated_count = ok.size();
  if (ok.empty()) throw EmptySpaceError("search: no config survived evaluation");

  out.best = ok.front();
  for (const auto& ec : ok)
    if (better(objective, ec, out.best)) out.best = ec;

  std::sort(ok.begin(), ok.end(), [](const EvaluatedConfig& a, const EvaluatedConfig& b) {
    if (a.report.util != b.report.util) return a.report.util > b.report.util;
    const double ea = a.report.energy.total(), eb = b.report.energy.total();
    if (ea != eb) return ea < eb;
    if (a.report.peak_footprint_bytes != b.report.peak_footprint_bytes)
      return a.report.peak_footprint_bytes < b.report.peak_footprint_bytes;
    return a.key < b.key;
  });
  out.pareto = detail::pareto_front(ok);
  return out;
}

// Named sub-spaces exposed by the CLI: each variant is the objective-best
// config within a filtered slice of the full space. "flat-r64" style names
// pin the row count.
inline SearchBounds variant_bounds(const std::string& name) {
  using Mode = DataflowConfig::Mode;
  SearchBounds b;
  if (name == "opt" || name == "all") return b;
  if (name == "base") {
    b.modes = {Mode::Base};
    return b;
  }
  if (name == "base-opt") {
    b.modes = {Mode::Base, Mode::BaseTiled};
    return b;
  }
  if (name == "base-m" || name == "base-b" || name == "base-h") {
    b.modes = {Mode::BaseTiled};
    b.base_grans = {name == "base-m" ? GranKind::M : name == "base-b" ? GranKind::B : GranKind::H};
    return b;
  }
  if (name == "flat-opt") {
    b.modes = {Mode::Flat};
    return b;
  }
  if (name == "flat-m" || name == "flat-b" || name == "flat-h") {
    b.modes = {Mode::Flat};
    b.flat_grans = {name == "flat-m" ? GranKind::M : name == "flat-b" ? GranKind::B : GranKind::H};
    return b;
  }
  if (name.rfind("flat-r", 0) == 0) {
    b.modes = {Mode::Flat};
    b.flat_grans = {GranKind::R};
    const std::string suffix = name.substr(6);
    if (!suffix.empty()) {
      std::size_t pos = 0;
      std::uint64_t rows = 0;
      try {
        rows = std::stoull(suffix, &pos);
      } catch (const std::exception&) {
        throw std::invalid_argument("unknown variant: " + name);
      }
      if (pos != suffix.size() || rows == 0)
        throw std::invalid_argument("unknown variant: " + name);
      b.rows = {rows};
    }
    return b;
  }
  throw std::invalid_argument("unknown variant: " + name);
}

inline const std::vector<std::string>& default_variants() {
  static const std::vector<std::string> v = {"base",   "base-m", "base-b", "base-h",
                                             "base-opt", "flat-m", "flat-b", "flat-h",
                                             "flat-r",   "flat-opt"};
  return v;
}

}  // namespace flatdse
