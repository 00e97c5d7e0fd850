#include <CLI11.hpp>

#include <iostream>

#include "fsb/cli/commands.hpp"
#include "fsb/error.hpp"
#include "fsb/numkit/parallel.hpp"

namespace {

using namespace fsb::cli;

std::optional<fs::path> maybe(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast single-image body mesh recovery on toy models: pipelines, benchmarks, kinematic conversion."};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "RunConfig JSON (defaults when omitted)");

  std::string bary;
  auto add_bary = [&](CLI::App* sub) { sub->add_option("--bary", bary, "bary bundle from precompute-bary (default: computed)"); };

  SynthOptions so;
  std::string so_out;
  auto* synth_cmd = app.add_subcommand("synth", "scenes and (mesh, fitted parameters) pairs");
  synth_cmd->add_option("-n,--n", so.n, "number of scenes and pairs")->required();
  synth_cmd->add_option("--seed", so.seed);
  synth_cmd->add_option("--out", so_out)->required();
  add_bary(synth_cmd);

  std::string bary_out;
  auto* bary_cmd = app.add_subcommand("precompute-bary", "barycentric map from the source to the target topology");
  bary_cmd->add_option("--out", bary_out)->required();

  FitOptions fo;
  std::string fo_data, fo_out;
  auto* fit_cmd = app.add_subcommand("fit", "iterative fit of every pair in a synth dataset");
  fit_cmd->add_option("--data", fo_data)->required();
  fit_cmd->add_option("--out", fo_out)->required();
  fit_cmd->add_option("--max-error", fo.max_error);
  fit_cmd->add_option("--min-fraction", fo.min_fraction, "exit 4 when fewer fits reach --max-error");
  add_bary(fit_cmd);

  TrainProjectorOptions to;
  std::string to_data, to_held, to_out;
  auto* tp_cmd = app.add_subcommand("train-projector", "train the feedforward conversion network");
  tp_cmd->add_option("--data", to_data)->required();
  tp_cmd->add_option("--heldout-data", to_held, "separate held-out dataset");
  tp_cmd->add_option("--heldout", to.heldout, "pairs split off --data (default a tenth)");
  tp_cmd->add_option("--out", to_out)->required();
  tp_cmd->add_option("--max-ratio", to.max_ratio, "exit 4 above this projector / fit error ratio");
  add_bary(tp_cmd);

  TrainDenoiserOptions dn;
  std::string dn_out;
  auto* td_cmd = app.add_subcommand("train-denoiser", "train the pose denoiser on surrogate motion");
  td_cmd->add_option("--frames", dn.frames);
  td_cmd->add_option("--heldout", dn.heldout);
  td_cmd->add_option("--seed", dn.seed);
  td_cmd->add_option("--out", dn_out)->required();

  RunOptions ro;
  std::string ro_mode = "fast", ro_scene, ro_out;
  auto* run_cmd = app.add_subcommand("run", "one pipeline on one scene");
  run_cmd->add_option("--mode", ro_mode)->check(CLI::IsMember({"serial", "fast"}));
  run_cmd->add_option("--scene", ro_scene, "scene JSON (default: random scene from scene_seed)");
  run_cmd->add_option("--frames", ro.frames);
  run_cmd->add_option("--out", ro_out)->required();
  run_cmd->add_flag("--dump-intermediates", ro.dump_intermediates);

  BenchCliOptions bo;
  std::string bo_matrix, bo_csv, bo_json;
  auto* bench_cmd = app.add_subcommand("bench", "latency waterfall");
  bench_cmd->add_option("--matrix", bo_matrix, "rows JSON (default: built-in waterfall)");
  bench_cmd->add_option("--frames", bo.frames);
  bench_cmd->add_option("--warmup", bo.warmup);
  bench_cmd->add_option("--scenes", bo.scenes);
  bench_cmd->add_option("--csv", bo_csv);
  bench_cmd->add_option("--json", bo_json);
  bench_cmd->add_option("--min-speedup", bo.min_speedup, "exit 4 below this speedup or when not monotone");
  bench_cmd->add_option("--band", bo.band);

  BenchConvertOptions co;
  std::string co_data, co_proj, co_den, co_json;
  auto* bc_cmd = app.add_subcommand("bench-convert", "iterative fit against the projector");
  bc_cmd->add_option("--data", co_data)->required();
  bc_cmd->add_option("--projector", co_proj)->required();
  bc_cmd->add_option("--denoiser", co_den);
  bc_cmd->add_option("--meshes", co.meshes);
  bc_cmd->add_option("--repeats", co.repeats);
  bc_cmd->add_option("--json", co_json);
  bc_cmd->add_option("--min-speedup", co.min_speedup);
  add_bary(bc_cmd);

  ReportOptions rep;
  std::vector<std::string> rep_in;
  std::string rep_csv, rep_json;
  auto* report_cmd = app.add_subcommand("report", "tables from latency reports; speedups against the first");
  report_cmd->add_option("inputs", rep_in)->required();
  report_cmd->add_option("--csv", rep_csv);
  report_cmd->add_option("--json", rep_json);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    fsb::numkit::apply_thread_env();
    const RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::load(config_path);
    cfg.validate();
    std::ostream& log = std::cout;
    if (*synth_cmd) {
      so.out = so_out;
      so.bary = maybe(bary);
      return synth(cfg, so, log);
    }
    if (*bary_cmd) return precompute_bary(cfg, bary_out, log);
    if (*fit_cmd) {
      fo.data = fo_data;
      fo.out = fo_out;
      fo.bary = maybe(bary);
      return fit(cfg, fo, log);
    }
    if (*tp_cmd) {
      to.data = to_data;
      to.heldout_data = maybe(to_held);
      to.out = to_out;
      to.bary = maybe(bary);
      return train_projector(cfg, to, log);
    }
    if (*td_cmd) {
      dn.out = dn_out;
      return train_denoiser(cfg, dn, log);
    }
    if (*run_cmd) {
      ro.mode = parse_mode(ro_mode);
      ro.scene = maybe(ro_scene);
      ro.out = ro_out;
      return run(cfg, ro, log);
    }
    if (*bench_cmd) {
      bo.matrix = maybe(bo_matrix);
      bo.csv = maybe(bo_csv);
      bo.json = maybe(bo_json);
      return bench(cfg, bo, log);
    }
    if (*bc_cmd) {
      co.data = co_data;
      co.projector = co_proj;
      co.denoiser = maybe(co_den);
      co.json = maybe(co_json);
      co.bary = maybe(bary);
      return bench_convert(cfg, co, log);
    }
    if (*report_cmd) {
      rep.inputs.assign(rep_in.begin(), rep_in.end());
      rep.csv = maybe(rep_csv);
      rep.json = maybe(rep_json);
      return report(rep, log);
    }
  } catch (const fsb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fsb::UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fsb::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}
