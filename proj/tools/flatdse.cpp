// flatdse: analytical cost model, sweeps and design-space exploration for
// fused attention dataflows on spatial accelerators.
//
//   flatdse analyze --config run.json [--out DIR]
//   flatdse sweep   --config run.json [--out DIR]
//   flatdse dse     --config run.json [--out DIR] [--objective NAME]
//                   [--jobs N] [--dump-space]
//   flatdse verify  --config run.json [--out DIR] [--seed N]
//                   [--golden PATH] [--write-golden]
//
// Every subcommand reads one JSON run config (sections it does not need are
// ignored) and writes its results under --out, which defaults to the
// FLATDSE_OUT environment variable and then to the current directory.
// Exit codes: 0 success, 1 failed run or invalid config, 2 usage error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <flatdse/flatdse.hpp>

namespace fs = std::filesystem;
using namespace flatdse;

namespace {

fs::path resolve_out(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("FLATDSE_OUT"); env && *env) return env;
  return ".";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_meta(const fs::path& out_dir, const std::string& command, const std::string& config,
                Json extra, double wall_ms) {
  extra["command"] = command;
  extra["config"] = config;
  extra["wall_ms"] = wall_ms;
  write_json(out_dir / "run_meta.json", extra);
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

int run_analyze(const std::string& config_path, const std::string& out_flag) {
  const RunConfig rc = load_run_config(config_path);
  if (!rc.dataflow)
    throw std::invalid_argument("analyze: config has no 'dataflow' section");
  const fs::path out = resolve_out(out_flag);
  fs::create_directories(out);

  Json reports;
  for (Scope scope : {Scope::LA, Scope::Block, Scope::Model}) {
    ScheduleOptions opt;
    opt.scope = scope;
    const CostReport r = schedule(rc.workload, *rc.dataflow, rc.hardware, opt);
    reports[to_string(scope)] = r;
    std::cout << "scope=" << to_string(scope) << " util=" << detail::fmt_double(r.util)
              << " cycles=" << detail::fmt_double(r.total_cycles)
              << " offchip_bytes=" << r.offchip_bytes
              << " energy=" << detail::fmt_double(r.energy.total()) << "\n";
  }
  Json j{{"workload", rc.workload},
         {"hardware", rc.hardware},
         {"dataflow", *rc.dataflow},
         {"reports", reports}};
  write_json(out / "report.json", j);
  std::cout << "wrote " << (out / "report.json").string() << "\n";
  return 0;
}

int run_sweep(const std::string& config_path, const std::string& out_flag) {
  Timer timer;
  const RunConfig rc = load_run_config(config_path);
  const fs::path out = resolve_out(out_flag);
  fs::create_directories(out);

  std::vector<std::uint64_t> seq_lens = rc.sweep_seq_lens;
  if (seq_lens.empty()) seq_lens = {rc.workload.seq_len};
  std::vector<std::uint64_t> batches = rc.sweep_batches;
  if (batches.empty()) batches = {rc.workload.batch};
  std::vector<std::string> variants = rc.variants;
  if (variants.empty()) variants = default_variants();

  SearchOptions so;
  so.scope = rc.scope;
  so.jobs = rc.jobs;

  std::string csv = csv_header();
  std::uint64_t rows = 0, skipped = 0;
  for (const auto n : seq_lens) {
    for (const auto b : batches) {
      AttentionWorkload w = rc.workload;
      w.seq_len = n;
      w.batch = b;
      for (const auto& variant : variants) {
        try {
          const DseResult res =
              search(w, rc.hardware, variant_bounds(variant), rc.objective, so);
          AttentionWorkload named = w;
          named.name = w.name + "/" + variant;
          csv += csv_row(named, rc.hardware, res.best.config, res.best.report);
          ++rows;
        } catch (const EmptySpaceError&) {
          std::cerr << "sweep: no feasible config for variant '" << variant
                    << "' at seq_len=" << n << " batch=" << b << "\n";
          ++skipped;
        }
      }
    }
  }
  write_text(out / "sweep.csv", csv);
  write_meta(out, "sweep", config_path, Json{{"rows", rows}, {"skipped", skipped}}, timer.ms());
  std::cout << "wrote " << (out / "sweep.csv").string() << " (" << rows << " rows)\n";
  return 0;
}

int run_dse(const std::string& config_path, const std::string& out_flag,
            const std::string& objective_flag, int jobs_flag, bool dump_space) {
  Timer timer;
  const RunConfig rc = load_run_config(config_path);
  const fs::path out = resolve_out(out_flag);
  fs::create_directories(out);

  const Objective objective =
      objective_flag.empty() ? rc.objective : parse_objective(objective_flag);
  SearchOptions so;
  so.scope = rc.scope;
  so.jobs = jobs_flag >= 0 ? static_cast<unsigned>(jobs_flag) : rc.jobs;

  std::string space_csv = csv_header();
  std::function<void(const EvaluatedConfig&)> sink;
  if (dump_space)
    sink = [&](const EvaluatedConfig& ec) {
      space_csv += csv_row(rc.workload, rc.hardware, ec.config, ec.report);
    };

  const DseResult res = search(rc.workload, rc.hardware, rc.bounds, objective, so, sink);

  Json best{{"workload", rc.workload},
            {"hardware", rc.hardware},
            {"objective", to_string(objective)},
            {"scope", to_string(rc.scope)},
            {"evaluated", res.evaluated_count},
            {"skipped", res.skipped_count},
            {"config", res.best.config},
            {"report", res.best.report}};
  write_json(out / "best.json", best);

  std::string pareto_csv = csv_header();
  for (const auto& ec : res.pareto)
    pareto_csv += csv_row(rc.workload, rc.hardware, ec.config, ec.report);
  write_text(out / "pareto.csv", pareto_csv);
  if (dump_space) write_text(out / "space.csv", space_csv);

  write_meta(out, "dse", config_path,
             Json{{"evaluated", res.evaluated_count},
                  {"skipped", res.skipped_count},
                  {"pareto", res.pareto.size()},
                  {"objective", to_string(objective)}},
             timer.ms());
  std::cout << "best " << res.best.key << " util=" << detail::fmt_double(res.best.report.util)
            << " (evaluated " << res.evaluated_count << ", skipped " << res.skipped_count
            << ", pareto " << res.pareto.size() << ")\n";
  std::cout << "wrote " << (out / "best.json").string() << "\n";
  return 0;
}

int run_verify(const std::string& config_path, const std::string& out_flag,
               std::int64_t seed_flag, const std::string& golden_flag, bool write_golden) {
  const RunConfig rc = load_run_config(config_path);
  if (!rc.dataflow)
    throw std::invalid_argument("verify: config has no 'dataflow' section");
  const fs::path out = resolve_out(out_flag);
  fs::create_directories(out);

  const AttentionWorkload& w = rc.workload;
  const std::uint64_t seed = seed_flag >= 0 ? static_cast<std::uint64_t>(seed_flag) : rc.seed;
  const std::vector<std::uint64_t> dims = {w.batch, w.heads, w.seq_len, w.head_dim()};
  const DenseTensor q = random_tensor(dims, seed);
  const DenseTensor k = random_tensor(dims, seed + 1);
  const DenseTensor v = random_tensor(dims, seed + 2);

  const DenseTensor ref = reference_attention(q, k, v);
  const FusedResult fused = fused_attention(q, k, v, w, *rc.dataflow, rc.hardware);
  const double max_rel_err = compare(ref, fused.out);

  const TrafficBreakdown model = traffic(w, *rc.dataflow, rc.hardware, Scope::LA);
  const auto& tc = fused.touches;
  const bool traffic_match =
      model.q.reads == tc.q.offchip_reads && model.q.writes == tc.q.offchip_writes &&
      model.k.reads == tc.k.offchip_reads && model.k.writes == tc.k.offchip_writes &&
      model.v.reads == tc.v.offchip_reads && model.v.writes == tc.v.offchip_writes &&
      model.logit.reads == tc.logit.offchip_reads &&
      model.logit.writes == tc.logit.offchip_writes &&
      model.out.reads == tc.out.offchip_reads && model.out.writes == tc.out.offchip_writes;
  const bool sg_match = scope_sg_words(w, Scope::LA) == tc.sg_total();

  std::string golden = golden_flag.empty() ? rc.golden_path : golden_flag;
  if (!golden.empty() && !fs::path(golden).is_absolute())
    golden = (fs::path(config_path).parent_path() / golden).string();
  double golden_err = 0.0;
  bool golden_checked = false;
  if (!golden.empty()) {
    if (write_golden) {
      fs::create_directories(fs::path(golden).parent_path());
      save_tensor(fused.out, golden);
    }
    golden_err = compare(load_tensor(golden), fused.out);
    golden_checked = true;
  }

  const bool ok = max_rel_err <= 1e-6 && fused.max_row_sum_err <= 1e-12 && traffic_match &&
                  sg_match && (!golden_checked || golden_err <= 1e-6);

  Json j{{"workload", w},
         {"dataflow", *rc.dataflow},
         {"seed", seed},
         {"max_rel_err", max_rel_err},
         {"max_row_sum_err", fused.max_row_sum_err},
         {"traffic_match", traffic_match},
         {"sg_match", sg_match},
         {"offchip_words", Json{{"q", tc.q.offchip_reads + tc.q.offchip_writes},
                                {"k", tc.k.offchip_reads + tc.k.offchip_writes},
                                {"v", tc.v.offchip_reads + tc.v.offchip_writes},
                                {"logit", tc.logit.offchip_reads + tc.logit.offchip_writes},
                                {"out", tc.out.offchip_reads + tc.out.offchip_writes},
                                {"total", tc.offchip_total()}}},
         {"sg_words", tc.sg_total()},
         {"ok", ok}};
  if (golden_checked) j["golden_err"] = golden_err;
  write_json(out / "verify.json", j);

  std::cout << (ok ? "PASS" : "FAIL") << " max_rel_err=" << detail::fmt_double(max_rel_err)
            << " row_sum_err=" << detail::fmt_double(fused.max_row_sum_err)
            << " traffic_match=" << (traffic_match ? "yes" : "no")
            << " sg_match=" << (sg_match ? "yes" : "no") << "\n";
  std::cout << "wrote " << (out / "verify.json").string() << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fused attention dataflow cost model and design-space explorer"};
  app.require_subcommand(1);

  std::string config_path, out_flag;

  auto* analyze = app.add_subcommand("analyze", "Cost one configured dataflow at all scopes");
  analyze->add_option("--config", config_path, "run config JSON")->required();
  analyze->add_option("--out", out_flag, "output directory");

  auto* sweep = app.add_subcommand("sweep", "Best config per variant over sweep axes, as CSV");
  sweep->add_option("--config", config_path, "run config JSON")->required();
  sweep->add_option("--out", out_flag, "output directory");

  std::string objective_flag;
  int jobs_flag = -1;
  bool dump_space = false;
  auto* dse = app.add_subcommand("dse", "Search the bounded config space");
  dse->add_option("--config", config_path, "run config JSON")->required();
  dse->add_option("--out", out_flag, "output directory");
  dse->add_option("--objective", objective_flag,
                  "max-util | min-energy | min-footprint | util-per-footprint");
  dse->add_option("--jobs", jobs_flag, "worker threads (0 = auto)");
  dse->add_flag("--dump-space", dump_space, "also write every evaluated config to space.csv");

  std::int64_t seed_flag = -1;
  std::string golden_flag;
  bool write_golden = false;
  auto* verify = app.add_subcommand("verify", "Run the numerical executor against the model");
  verify->add_option("--config", config_path, "run config JSON")->required();
  verify->add_option("--out", out_flag, "output directory");
  verify->add_option("--seed", seed_flag, "tensor seed (overrides config)");
  verify->add_option("--golden", golden_flag, "golden output tensor path");
  verify->add_flag("--write-golden", write_golden, "write the golden tensor before comparing");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(analyze)) return run_analyze(config_path, out_flag);
    if (app.got_subcommand(sweep)) return run_sweep(config_path, out_flag);
    if (app.got_subcommand(dse))
      return run_dse(config_path, out_flag, objective_flag, jobs_flag, dump_space);
    if (app.got_subcommand(verify))
      return run_verify(config_path, out_flag, seed_flag, golden_flag, write_golden);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
