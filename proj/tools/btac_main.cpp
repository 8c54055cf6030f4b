// btac: joint Bayesian inference of voxel-level activation and
// region-level connectivity for multi-subject tensor time series.
// Subcommands: simulate, fit, postprocess, report, benchmark.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <optional>

#include "btac/engine.hpp"
#include "btac/io.hpp"
#include "btac/postprocess.hpp"
#include "btac/simulate.hpp"

namespace fs = std::filesystem;
using namespace btac;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRunFailure = 3;
constexpr int kExitHashMismatch = 4;
constexpr int kExitEmptyResults = 5;

struct SimulateArgs {
  std::string config;
  std::string output;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& args) {
  SimSpec spec;
  std::uint64_t seed = 0;
  std::string echo;
  try {
    if (!args.config.empty()) {
      io::KvConfig kv = io::parse_config_file(args.config);
      spec = io::sim_spec_from_config(kv, &seed);
      for (const auto& [k, v] : kv) echo += k + " = " + v + "\n";
    }
    if (args.seed) seed = *args.seed;
    RngHandle rng(seed, 0);
    Dataset ds = generate_dataset(spec, rng);
    echo += "seed = " + std::to_string(seed) + "\n";
    io::write_dataset(args.output, ds, echo);
  } catch (const io::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cout << "dataset written to " << args.output << "\n";
  return kExitOk;
}

struct FitArgs {
  std::string dataset;
  std::string config;
  std::string output;
  std::optional<std::string> ranks;
  std::optional<int> iterations, burnin, thin_dic, workers, checkpoint_every;
  std::optional<std::uint64_t> seed;
  bool baseline = false;
  bool resume = false;
  int abort_after = 0;  // test hook: exit(3) after this many iterations
};

int fit_one_model(const RunConfig& cfg, const Dataset& ds, const EngineContext& ctx,
                  const ModelSpec& model, const fs::path& outdir, bool resume,
                  int abort_after) {
  const fs::path chain_path = outdir / (model.label() + ".chain");
  const fs::path state_path = outdir / (model.label() + ".state");
  const fs::path timing_path = outdir / (model.label() + ".chain.timing.csv");

  ChainMeta meta;
  meta.baseline = model.baseline;
  meta.rank = model.rank;
  meta.n = ds.n;
  meta.G = ds.G;
  meta.T = ds.T;
  meta.D = ds.D;
  meta.region_dims = ds.region_dims;
  meta.iterations = cfg.iterations;
  meta.burnin = cfg.burnin;
  meta.dic_stride = cfg.dic_stride;
  meta.griddy_m = cfg.griddy_m;
  meta.seed = cfg.seed;
  meta.hyper_scales = cfg.hyper_scales;
  meta.data_hash = ctx.data_hash;

  SamplerState st = init_sampler(ds, model, cfg, &ctx);
  bool resumed = false;
  if (resume && fs::exists(state_path) && fs::exists(chain_path)) {
    st = io::load_checkpoint(state_path, ds);
    if (st.model.baseline != model.baseline || st.model.rank != model.rank)
      throw std::runtime_error("checkpoint model does not match " + model.label());
    io::truncate_chain(chain_path, st.iteration);
    resumed = true;
    std::cout << model.label() << ": resuming from iteration " << st.iteration
              << "\n";
  }
  if (st.iteration >= cfg.iterations) {
    std::cout << model.label() << ": already complete\n";
    return kExitOk;
  }

  io::ChainWriter writer(chain_path, meta, resumed);
  bool timing_append = resumed;
  if (!resumed && fs::exists(timing_path)) fs::remove(timing_path);
  std::vector<double> secs;
  auto flush_timing = [&]() {
    io::write_timing(timing_path, secs, timing_append);
    timing_append = true;
    secs.clear();
  };

  for (int it = st.iteration; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      sweep(st, ctx, cfg);
    } catch (const std::exception& e) {
      std::cerr << "error: " << model.label() << " failed at iteration " << it
                << ": " << e.what() << "\n";
      return kExitRunFailure;
    }
    std::vector<double> rec = make_record(st);
    for (double v : rec)
      if (!std::isfinite(v)) {
        std::cerr << "error: " << model.label()
                  << ": non-finite value at iteration " << it << "\n";
        return kExitRunFailure;
      }
    writer.append(rec);
    secs.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    const int done = it + 1;
    if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 &&
        done < cfg.iterations) {
      writer.flush();
      flush_timing();
      io::save_checkpoint(state_path, st);
    }
    if (abort_after > 0 && done >= abort_after && done < cfg.iterations) {
      writer.flush();
      flush_timing();
      std::cerr << model.label() << ": aborted after " << done
                << " iterations (test hook)\n";
      return kExitRunFailure;
    }
  }
  writer.flush();
  flush_timing();
  if (fs::exists(state_path)) fs::remove(state_path);
  std::cout << model.label() << ": " << cfg.iterations << " iterations -> "
            << chain_path.string() << "\n";
  return kExitOk;
}

int cmd_fit(const FitArgs& args) {
  RunConfig cfg;
  Dataset ds;
  try {
    if (!args.config.empty())
      cfg = io::run_config_from_config(io::parse_config_file(args.config));
    if (args.ranks) cfg.ranks = io::parse_rank_list(*args.ranks);
    if (args.iterations) cfg.iterations = *args.iterations;
    if (args.burnin) cfg.burnin = *args.burnin;
    if (args.thin_dic) cfg.dic_stride = *args.thin_dic;
    if (args.workers) cfg.workers = *args.workers;
    if (args.checkpoint_every) cfg.checkpoint_every = *args.checkpoint_every;
    if (args.seed) cfg.seed = *args.seed;
    if (args.baseline) cfg.baseline = true;
    cfg.validate();
    ds = io::read_dataset(args.dataset);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  fs::create_directories(args.output);
  EngineContext ctx = prepare_context(ds);
  std::vector<ModelSpec> models;
  for (int r : cfg.ranks) models.push_back(ModelSpec{false, r});
  if (cfg.baseline) models.push_back(ModelSpec{true, 1});
  for (const ModelSpec& model : models) {
    const int rc = fit_one_model(cfg, ds, ctx, model, args.output, args.resume,
                                 args.abort_after);
    if (rc != kExitOk) return rc;
  }
  return kExitOk;
}

struct PostArgs {
  std::string chains;
  std::string dataset;
  std::string output;
  double b_tune = 0.0;
};

int cmd_postprocess(const PostArgs& args) {
  Dataset ds;
  std::vector<fs::path> chain_files;
  try {
    ds = io::read_dataset(args.dataset);
    for (const auto& entry : fs::directory_iterator(args.chains))
      if (entry.path().extension() == ".chain") chain_files.push_back(entry.path());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (chain_files.empty()) {
    std::cerr << "error: no .chain files in " << args.chains << "\n";
    return kExitEmptyResults;
  }
  std::sort(chain_files.begin(), chain_files.end());

  EngineContext ctx = prepare_context(ds);
  std::vector<std::pair<ModelSpec, ChainStore>> chains;
  for (const auto& path : chain_files) {
    ChainStore chain = io::read_chain(path);
    if (chain.meta().data_hash != ctx.data_hash) {
      std::cerr << "error: " << path.string()
                << " was fit on a different dataset (hash mismatch)\n";
      return kExitHashMismatch;
    }
    chains.emplace_back(ModelSpec{chain.meta().baseline, chain.meta().rank},
                        std::move(chain));
  }
  std::sort(chains.begin(), chains.end(), [](const auto& a, const auto& b) {
    if (a.first.baseline != b.first.baseline) return !a.first.baseline;
    return a.first.rank < b.first.rank;
  });

  fs::create_directories(args.output);
  std::vector<MetricsRow> rows;
  int best = -1;
  double best_dic = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < chains.size(); ++i) {
    rows.push_back(compute_metrics(chains[i].second, ctx, ds));
    const double d = dic(chains[i].second, ctx, chains[i].second.meta().dic_stride);
    if (!chains[i].first.baseline && d < best_dic) {
      best_dic = d;
      best = static_cast<int>(i);
    }
  }
  io::write_metrics_csv(fs::path(args.output) / "metrics.csv", rows);

  if (best >= 0) {
    const auto& [model, chain] = chains[best];
    PosteriorSummary summary = summarize_chain(chain, args.b_tune);
    io::write_selection_json(fs::path(args.output) / "selection.json", summary,
                             model.label());
    for (int g = 0; g < chain.meta().G; ++g) {
      io::write_svg_heatmap(
          fs::path(args.output) / ("activation_r" + std::to_string(g) + ".svg"),
          io::middle_slice(summary.b_selected[g]),
          model.label() + " region " + std::to_string(g) + " posterior median");
    }
    io::write_svg_heatmap(fs::path(args.output) / "partial_correlation.svg",
                          summary.connectivity.partial_corr,
                          model.label() + " selected partial correlations");
  }
  std::cout << "results written to " << args.output << "\n";
  return kExitOk;
}

int cmd_report(const std::string& results_dir) {
  const fs::path csv = fs::path(results_dir) / "metrics.csv";
  if (!fs::exists(csv)) {
    std::cerr << "error: no metrics.csv under " << results_dir << "\n";
    return kExitEmptyResults;
  }
  std::vector<MetricsRow> rows;
  try {
    rows = io::read_metrics_csv(csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  if (rows.empty()) {
    std::cerr << "error: metrics.csv is empty\n";
    return kExitEmptyResults;
  }
  std::sort(rows.begin(), rows.end(), [](const MetricsRow& a, const MetricsRow& b) {
    const bool na = std::isnan(a.log_dic), nb = std::isnan(b.log_dic);
    if (na != nb) return nb;
    return a.log_dic < b.log_dic;
  });
  std::printf("%-12s %10s %10s %8s %10s %12s %10s\n", "model", "log(DIC)", "RMSE(B)",
              "AUC", "CI length", "CI coverage", "hours");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    auto cell = [](double v) {
      return std::isnan(v) ? std::string("NA") : std::to_string(v).substr(0, 8);
    };
    std::printf("%-12s %10s %10s %8s %10s %12s %10s%s\n", r.label.c_str(),
                cell(r.log_dic).c_str(), cell(r.rmse_b).c_str(), cell(r.auc).c_str(),
                cell(r.ci_length).c_str(), cell(r.ci_coverage).c_str(),
                cell(r.wall_hours).c_str(), i == 0 ? "  <- best" : "");
  }
  return kExitOk;
}

struct BenchArgs {
  std::string dataset;
  int rank = 3;
  int sweeps = 20;
  int workers = 1;
};

int cmd_benchmark(const BenchArgs& args) {
  Dataset ds;
  try {
    ds = io::read_dataset(args.dataset);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  RunConfig cfg;
  cfg.ranks = {args.rank};
  cfg.iterations = args.sweeps;
  cfg.burnin = 0;
  cfg.workers = args.workers;
  EngineContext ctx = prepare_context(ds);
  SamplerState st = init_sampler(ds, ModelSpec{false, args.rank}, cfg, &ctx);
  sweep(st, ctx, cfg);  // warm-up
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 1; i < args.sweeps; ++i) sweep(st, ctx, cfg);
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("rank %d, %d workers: %.3f ms/sweep (%d sweeps)\n", args.rank,
              args.workers, 1000.0 * total / std::max(args.sweeps - 1, 1),
              args.sweeps);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian tensor activation and connectivity"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
  simulate->add_option("--config", sim.config, "key = value simulation config");
  std::uint64_t sim_seed = 0;
  auto* sim_seed_opt = simulate->add_option("--seed", sim_seed, "RNG seed override");
  simulate->add_option("--output", sim.output, "output dataset directory")
      ->required();

  FitArgs fit;
  auto* fitcmd = app.add_subcommand("fit", "run MCMC chains on a dataset");
  fitcmd->add_option("--dataset", fit.dataset, "dataset directory or manifest")
      ->required();
  fitcmd->add_option("--config", fit.config, "key = value fit config");
  std::string fit_ranks;
  auto* fit_ranks_opt =
      fitcmd->add_option("--ranks", fit_ranks, "rank list, e.g. 1..3 or 1,2,5");
  int fit_iters = 0, fit_burn = -1, fit_thin = 0, fit_workers = 0, fit_ckpt = -1;
  std::uint64_t fit_seed = 0;
  auto* fit_iters_opt = fitcmd->add_option("--iterations", fit_iters, "MCMC sweeps");
  auto* fit_burn_opt = fitcmd->add_option("--burnin", fit_burn, "burn-in sweeps");
  auto* fit_thin_opt = fitcmd->add_option("--thin-dic", fit_thin, "DIC thinning stride");
  auto* fit_workers_opt = fitcmd->add_option("--workers", fit_workers, "worker threads");
  auto* fit_seed_opt = fitcmd->add_option("--seed", fit_seed, "RNG seed");
  auto* fit_ckpt_opt = fitcmd->add_option("--checkpoint-every", fit_ckpt,
                                          "checkpoint stride (0 disables)");
  fitcmd->add_flag("--baseline", fit.baseline, "also fit the vectorized baseline");
  fitcmd->add_flag("--resume", fit.resume, "resume from checkpoints");
  fitcmd->add_option("--abort-after", fit.abort_after,
                     "stop after N iterations (checkpoint/resume testing)");
  fitcmd->add_option("--output", fit.output, "chain output directory")->required();

  PostArgs post;
  auto* postcmd = app.add_subcommand("postprocess", "summarize fitted chains");
  postcmd->add_option("--chains", post.chains, "directory of .chain files")
      ->required();
  postcmd->add_option("--dataset", post.dataset, "dataset directory or manifest")
      ->required();
  postcmd->add_option("--b-tune", post.b_tune,
                      "2-means separation parameter (0 = automatic)");
  postcmd->add_option("--output", post.output, "results directory")->required();

  std::string report_dir;
  auto* reportcmd = app.add_subcommand("report", "print a metrics table");
  reportcmd->add_option("--results", report_dir, "results directory")->required();

  BenchArgs bench;
  auto* benchcmd = app.add_subcommand("benchmark", "time sweeps on a dataset");
  benchcmd->add_option("--dataset", bench.dataset, "dataset directory")->required();
  benchcmd->add_option("--rank", bench.rank, "model rank");
  benchcmd->add_option("--sweeps", bench.sweeps, "number of timed sweeps");
  benchcmd->add_option("--workers", bench.workers, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (simulate->parsed()) {
    if (sim_seed_opt->count() > 0) sim.seed = sim_seed;
    return cmd_simulate(sim);
  }
  if (fitcmd->parsed()) {
    if (fit_ranks_opt->count() > 0) fit.ranks = fit_ranks;
    if (fit_iters_opt->count() > 0) fit.iterations = fit_iters;
    if (fit_burn_opt->count() > 0) fit.burnin = fit_burn;
    if (fit_thin_opt->count() > 0) fit.thin_dic = fit_thin;
    if (fit_workers_opt->count() > 0) fit.workers = fit_workers;
    if (fit_ckpt_opt->count() > 0) fit.checkpoint_every = fit_ckpt;
    if (fit_seed_opt->count() > 0) fit.seed = fit_seed;
    return cmd_fit(fit);
  }
  if (postcmd->parsed()) return cmd_postprocess(post);
  if (reportcmd->parsed()) return cmd_report(report_dir);
  if (benchcmd->parsed()) return cmd_benchmark(bench);
  return kExitOk;
}
