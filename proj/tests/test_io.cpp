#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "btac/engine.hpp"
#include "btac/io.hpp"

using namespace btac;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("btac_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BTAC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

Dataset tiny_ds(std::uint64_t seed) {
  SimSpec spec;
  spec.n = 2;
  spec.T = 15;
  spec.G = 2;
  spec.D = 2;
  spec.period = 5;
  spec.region_dims = std::vector<std::vector<int>>{{3, 2}, {2, 2}};
  spec.pairs = {{0, 1, 0.9}};
  RngHandle rng(seed, 0);
  return generate_dataset(spec, rng);
}

}  // namespace

TEST_CASE("config parser: comments, whitespace, duplicates") {
  fs::path dir = fresh_dir("cfg");
  write_text(dir / "a.cfg", "# comment\n n = 5 \nT=80  # trailing\n\ncnr = 1.5\n");
  io::KvConfig kv = io::parse_config_file(dir / "a.cfg");
  CHECK(kv.at("n") == "5");
  CHECK(kv.at("T") == "80");
  CHECK(kv.at("cnr") == "1.5");
  write_text(dir / "dup.cfg", "n = 1\nn = 2\n");
  CHECK_THROWS(io::parse_config_file(dir / "dup.cfg"));
  write_text(dir / "bad.cfg", "just some text\n");
  CHECK_THROWS(io::parse_config_file(dir / "bad.cfg"));
}

TEST_CASE("sim config: defaults, field validation, unknown keys") {
  io::KvConfig kv{{"n", "6"}, {"T", "50"}, {"G", "3"}, {"period", "25"},
                  {"pairs", "0-2:0.9"}, {"seed", "9"}};
  std::uint64_t seed = 0;
  SimSpec spec = io::sim_spec_from_config(kv, &seed);
  CHECK(spec.n == 6);
  CHECK(spec.pairs.size() == 1);
  CHECK(spec.pairs[0].b == 2);
  CHECK(seed == 9);

  io::KvConfig bad{{"cnr", "-1"}};
  try {
    io::sim_spec_from_config(bad, nullptr);
    FAIL("expected ConfigError");
  } catch (const io::ConfigError& e) {
    CHECK(e.field == "cnr");  // message names the field
  }
  io::KvConfig unknown{{"voxels", "10"}};
  CHECK_THROWS_AS(io::sim_spec_from_config(unknown, nullptr), io::ConfigError);
}

TEST_CASE("fit config and rank list parsing") {
  io::KvConfig kv{{"ranks", "1..3"}, {"baseline", "true"}, {"iterations", "200"},
                  {"burnin", "40"},  {"thin_dic", "2"},    {"scale_b_tau", "100"}};
  RunConfig cfg = io::run_config_from_config(kv);
  CHECK(cfg.ranks == std::vector<int>{1, 2, 3});
  CHECK(cfg.baseline);
  CHECK(cfg.dic_stride == 2);
  CHECK(cfg.hyper_scales.b_tau == 100.0);

  CHECK(io::parse_rank_list("2,5, 7") == std::vector<int>{2, 5, 7});
  CHECK_THROWS(io::parse_rank_list("5..2"));
  CHECK_THROWS(io::run_config_from_config(io::KvConfig{{"burnin", "10"},
                                                       {"iterations", "5"}}));
  CHECK_THROWS(io::run_config_from_config(io::KvConfig{{"mystery", "1"}}));
}

TEST_CASE("dataset round-trip preserves every value and the hash") {
  Dataset ds = tiny_ds(3);
  fs::path dir = fresh_dir("ds");
  io::write_dataset(dir, ds, "n = 2\n");
  Dataset back = io::read_dataset(dir);
  CHECK(back.n == ds.n);
  CHECK(back.region_dims == ds.region_dims);
  CHECK(back.covariate == ds.covariate);
  for (int i = 0; i < ds.n; ++i)
    for (int g = 0; g < ds.G; ++g) CHECK(back.y[i][g] == ds.y[i][g]);
  CHECK(back.truth.present);
  for (int g = 0; g < ds.G; ++g)
    CHECK(back.truth.coeff[g].data() == ds.truth.coeff[g].data());
  CHECK((back.truth.effects - ds.truth.effects).norm() == 0.0);
  CHECK((back.truth.precision - ds.truth.precision).norm() == 0.0);
  CHECK(dataset_hash(back) == dataset_hash(ds));
}

TEST_CASE("dataset read validates blob sizes") {
  Dataset ds = tiny_ds(4);
  fs::path dir = fresh_dir("dsbad");
  io::write_dataset(dir, ds, "");
  // truncate one series blob
  fs::resize_file(dir / "y_s0_r1.bin", 16);
  CHECK_THROWS(io::read_dataset(dir));
}

TEST_CASE("chain file round-trip and truncation") {
  Dataset ds = tiny_ds(5);
  RunConfig cfg;
  cfg.iterations = 25;
  cfg.burnin = 5;
  cfg.seed = 21;
  ChainStore chain = run_chain(cfg, ds, ModelSpec{false, 2});
  fs::path dir = fresh_dir("chain");
  io::write_chain(dir / "a.chain", chain);
  ChainStore back = io::read_chain(dir / "a.chain");
  CHECK(back.meta().rank == 2);
  CHECK(back.meta().seed == 21);
  CHECK(back.meta().data_hash == chain.meta().data_hash);
  CHECK(back.iterations_recorded() == 25);
  CHECK(back.buffer() == chain.buffer());

  io::truncate_chain(dir / "a.chain", 10);
  ChainStore cut = io::read_chain(dir / "a.chain");
  CHECK(cut.iterations_recorded() == 10);
  for (int s = 0; s < 10; ++s) {
    auto a = cut.record(s);
    auto b = chain.record(s);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k] == b[k]);
  }
}

TEST_CASE("checkpoint files restore the sampler bitwise") {
  Dataset ds = tiny_ds(6);
  RunConfig cfg;
  cfg.iterations = 30;
  cfg.burnin = 0;
  cfg.seed = 31;
  EngineContext ctx = prepare_context(ds);
  SamplerState st = init_sampler(ds, ModelSpec{false, 1}, cfg, &ctx);
  for (int i = 0; i < 7; ++i) sweep(st, ctx, cfg);
  fs::path dir = fresh_dir("ckpt");
  io::save_checkpoint(dir / "s.state", st);
  SamplerState back = io::load_checkpoint(dir / "s.state", ds);
  sweep(st, ctx, cfg);
  sweep(back, ctx, cfg);
  CHECK(make_record(st) == make_record(back));
}

TEST_CASE("metrics csv round-trips including NA cells") {
  std::vector<MetricsRow> rows(2);
  rows[0].label = "rank3";
  rows[0].log_dic = 21.808;
  rows[0].rmse_b = 0.0807;
  rows[0].auc = 0.9483;
  rows[0].ci_length = 0.0364;
  rows[0].ci_coverage = 0.8992;
  rows[0].wall_hours = 6.2;
  rows[1].label = "vectorized";
  rows[1].log_dic = 21.829;
  rows[1].rmse_b = std::numeric_limits<double>::quiet_NaN();
  rows[1].auc = std::numeric_limits<double>::quiet_NaN();
  rows[1].ci_length = 0.2115;
  rows[1].ci_coverage = 1.0;
  rows[1].wall_hours = 2.15;
  fs::path dir = fresh_dir("csv");
  io::write_metrics_csv(dir / "metrics.csv", rows);
  auto back = io::read_metrics_csv(dir / "metrics.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].label == "rank3");
  CHECK(back[0].auc == doctest::Approx(0.9483));
  CHECK(std::isnan(back[1].rmse_b));
  CHECK(back[1].ci_coverage == doctest::Approx(1.0));
}

TEST_CASE("middle slice and svg output") {
  DenseTensor t({3, 4, 5});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  Eigen::MatrixXd m = io::middle_slice(t);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 4);
  CHECK(m(1, 2) == t.at(std::vector<int>{1, 2, 2}));
  fs::path dir = fresh_dir("svg");
  io::write_svg_heatmap(dir / "h.svg", m, "slice");
  const std::string svg = slurp(dir / "h.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("rect") != std::string::npos);
}

TEST_CASE("cli: simulate determinism and validation exit codes") {
  fs::path dir = fresh_dir("cli_sim");
  write_text(dir / "sim.cfg",
             "n = 2\nT = 20\nG = 2\nD = 2\nperiod = 10\nseed = 7\n");
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() + " --output " +
                  (dir / "d1").string()) == 0);
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() + " --output " +
                  (dir / "d2").string()) == 0);
  // byte-identical blobs under the same seed
  for (const auto& entry : fs::directory_iterator(dir / "d1")) {
    if (entry.path().extension() != ".bin") continue;
    CHECK(slurp(entry.path()) == slurp(dir / "d2" / entry.path().filename()));
  }
  // invalid cnr: exit 2 and the message names the field
  write_text(dir / "bad.cfg", "cnr = -2\n");
  const std::string cmd = std::string(BTAC_CLI_PATH) + " simulate --config " +
                          (dir / "bad.cfg").string() + " --output " +
                          (dir / "nope").string() + " 2> " +
                          (dir / "err.txt").string();
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 2);
  CHECK(slurp(dir / "err.txt").find("cnr") != std::string::npos);
}

TEST_CASE("cli: fit worker counts give byte-identical chain files") {
  fs::path dir = fresh_dir("cli_fit");
  write_text(dir / "sim.cfg",
             "n = 3\nT = 20\nG = 3\nD = 2\nperiod = 10\npoisson_rate = 5\nseed = 3\n"
             "pairs = 0-1:0.9\n");
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() + " --output " +
                  (dir / "data").string()) == 0);
  REQUIRE(run_cli("fit --dataset " + (dir / "data").string() +
                  " --ranks 1 --baseline --iterations 40 --burnin 10 --seed 5 "
                  "--workers 1 --output " +
                  (dir / "w1").string()) == 0);
  REQUIRE(run_cli("fit --dataset " + (dir / "data").string() +
                  " --ranks 1 --baseline --iterations 40 --burnin 10 --seed 5 "
                  "--workers 4 --output " +
                  (dir / "w4").string()) == 0);
  CHECK(slurp(dir / "w1" / "rank1.chain") == slurp(dir / "w4" / "rank1.chain"));
  CHECK(slurp(dir / "w1" / "vectorized.chain") ==
        slurp(dir / "w4" / "vectorized.chain"));
}

TEST_CASE("cli: resume after an aborted run matches the uninterrupted chain") {
  fs::path dir = fresh_dir("cli_resume");
  write_text(dir / "sim.cfg", "n = 2\nT = 16\nG = 2\nD = 2\nperiod = 8\nseed = 11\n");
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() + " --output " +
                  (dir / "data").string()) == 0);
  const std::string common = "fit --dataset " + (dir / "data").string() +
                             " --ranks 2 --iterations 50 --burnin 10 --seed 13 "
                             "--checkpoint-every 15 --output ";
  REQUIRE(run_cli(common + (dir / "full").string()) == 0);
  // killed mid-run (exit 3), then resumed to completion
  CHECK(run_cli(common + (dir / "part").string() + " --abort-after 33") == 3);
  REQUIRE(run_cli(common + (dir / "part").string() + " --resume") == 0);
  CHECK(slurp(dir / "part" / "rank2.chain") == slurp(dir / "full" / "rank2.chain"));
}

TEST_CASE("cli: postprocess hash mismatch and empty report dir") {
  fs::path dir = fresh_dir("cli_post");
  write_text(dir / "sim.cfg", "n = 2\nT = 16\nG = 2\nD = 2\nperiod = 8\nseed = 1\n");
  write_text(dir / "sim2.cfg", "n = 2\nT = 16\nG = 2\nD = 2\nperiod = 8\nseed = 2\n");
  REQUIRE(run_cli("simulate --config " + (dir / "sim.cfg").string() + " --output " +
                  (dir / "data").string()) == 0);
  REQUIRE(run_cli("simulate --config " + (dir / "sim2.cfg").string() + " --output " +
                  (dir / "other").string()) == 0);
  REQUIRE(run_cli("fit --dataset " + (dir / "data").string() +
                  " --ranks 1 --iterations 60 --burnin 10 --seed 5 --output " +
                  (dir / "chains").string()) == 0);
  // wrong dataset: exit 4
  CHECK(run_cli("postprocess --chains " + (dir / "chains").string() + " --dataset " +
                (dir / "other").string() + " --output " + (dir / "r1").string()) == 4);
  // right dataset: works, report prints
  REQUIRE(run_cli("postprocess --chains " + (dir / "chains").string() +
                  " --dataset " + (dir / "data").string() + " --output " +
                  (dir / "r2").string()) == 0);
  CHECK(run_cli("report --results " + (dir / "r2").string()) == 0);
  // empty results dir: exit 5
  fs::create_directories(dir / "empty");
  CHECK(run_cli("report --results " + (dir / "empty").string()) == 5);
  fs::create_directories(dir / "nochains");
  CHECK(run_cli("postprocess --chains " + (dir / "nochains").string() +
                " --dataset " + (dir / "data").string() + " --output " +
                (dir / "r3").string()) == 5);
}
