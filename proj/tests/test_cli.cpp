#include <doctest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "drocc/experiment.hpp"

using namespace drocc;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("drocc_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig tiny_config() {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.data.n_train = 200;
  c.data.n_test = 200;
  c.data.eval_params = {0.5, 1.0};
  c.model.hidden = {16};
  c.trainer.base.epochs = 2;
  c.trainer.base.batch_size = 32;
  c.trainer.base.warmup_steps = 5;
  c.seeds = {0, 1, 2};
  return c;
}

struct CsvRows {
  std::vector<std::vector<double>> rows;
};

CsvRows parse_grid(const std::string& csv) {
  CsvRows out;
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<double> r;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) r.push_back(std::stod(cell));
    out.rows.push_back(r);
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DROCC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

}  // namespace

TEST_CASE("config: parse and serialise round-trip") {
  const ExperimentConfig d = ExperimentConfig::defaults();
  const std::string text = d.to_string();
  CHECK(ExperimentConfig::parse(text).to_string() == text);

  ExperimentConfig c = tiny_config();
  c.method = Method::lf;
  c.data.source = "noisy_sine10d";
  c.data.dim = 10;
  c.trainer.base.radius = 0.1 + 0.2;
  c.trainer.freeze_sigma = true;
  c.eval.fpr_targets = {0.01};
  c.model.activation = Activation::tanh;
  const ExperimentConfig back = ExperimentConfig::parse(c.to_string());
  CHECK(back.to_string() == c.to_string());
  CHECK(back.trainer.base.radius == c.trainer.base.radius);
  CHECK(back.method == Method::lf);
  CHECK(back.model.hidden == std::vector<std::size_t>{16});
}

TEST_CASE("config: partial documents fall back to defaults") {
  const ExperimentConfig c = ExperimentConfig::parse("[trainer]\nepochs = 7\n");
  CHECK(c.trainer.base.epochs == 7);
  CHECK(c.data.source == ExperimentConfig::defaults().data.source);
}

TEST_CASE("config: errors name the section and key") {
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse("[trainer]\nepochz = 3\n"), doctest::Contains("[trainer] epochz"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse("[trainer]\nepochs = lots\n"), doctest::Contains("[trainer] epochs"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse("[trainer]\ngamma = 0.5\n"), doctest::Contains("gamma"), ConfigError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse("[data]\nsource = mnist\n"), doctest::Contains("source"), ConfigError);
  CHECK_THROWS_WITH_AS(ExperimentConfig::parse("[run]\nseeds = \n"), doctest::Contains("seeds"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::parse("[bogus]\nx = 1\n"), ConfigError);
}

TEST_CASE("run record: aggregates match recomputed statistics and survive a round-trip") {
  const RunRecord rec = run_experiment(tiny_config());
  REQUIRE(rec.seeds.size() == 3);
  REQUIRE(rec.aggregate.size() == 2);
  for (std::size_t k = 0; k < rec.aggregate.size(); ++k) {
    std::vector<double> v;
    for (const auto& s : rec.seeds) v.push_back(s.rows[k].report.auroc);
    const double mean = (v[0] + v[1] + v[2]) / 3.0;
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    std::sort(v.begin(), v.end());
    CHECK(std::abs(rec.aggregate[k].auroc.mean - mean) < 1e-12);
    CHECK(std::abs(rec.aggregate[k].auroc.stddev - std::sqrt(var / 3.0)) < 1e-12);
    CHECK(rec.aggregate[k].auroc.median == v[1]);
  }
  const RunRecord back = RunRecord::parse(rec.to_string());
  CHECK(back.same_results(rec));
  CHECK(back.to_string() == rec.to_string());
  CHECK(back.version == kLibraryVersion);
  CHECK(rec.find_row("v=0.5") != nullptr);
  CHECK(rec.find_row("v=9") == nullptr);
}

TEST_CASE("same config twice gives identical records; thread count does not matter") {
  const ExperimentConfig c = tiny_config();
  const RunRecord a = run_experiment(c, 1);
  const RunRecord b = run_experiment(c, 1);
  const RunRecord t = run_experiment(c, 3);
  CHECK(a.same_results(b));
  CHECK(a.same_results(t));
  ExperimentConfig other = c;
  other.seeds = {5, 6, 7};
  CHECK_FALSE(a.same_results(run_experiment(other, 2)));
}

TEST_CASE("model snapshots round-trip and reject damage") {
  TempDir tmp("snap");
  Rng rng(3);
  const MlpModel m = MlpModel::init_uniform({10, 7, 5, 1}, Activation::tanh, rng);
  const fs::path p = tmp.path / "m.bin";
  save_model(p, m);
  CHECK(load_model(p) == m);

  const std::string bytes = read_file(p);
  write_text(tmp.path / "short.bin", bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_model(tmp.path / "short.bin"), IoError);
  write_text(tmp.path / "long.bin", bytes + "x");
  CHECK_THROWS_AS(load_model(tmp.path / "long.bin"), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  write_text(tmp.path / "magic.bin", bad);
  CHECK_THROWS_AS(load_model(tmp.path / "magic.bin"), IoError);
  CHECK_THROWS_AS(load_model(tmp.path / "absent.bin"), IoError);
}

TEST_CASE("train writes artifacts atomically and eval reproduces them") {
  TempDir tmp("train");
  ExperimentConfig c = tiny_config();
  c.seeds = {4, 9};
  c.out_dir = tmp.path.string();
  const RunRecord rec = cmd_train(c, 2);
  for (const char* f : {"config.txt", "run_record.txt", "model_seed4.bin", "model_seed9.bin"}) {
    CHECK(fs::exists(tmp.path / f));
  }
  for (const auto& e : fs::directory_iterator(tmp.path)) CHECK(e.path().extension() != ".tmp");
  CHECK(RunRecord::parse(read_file(tmp.path / "run_record.txt")).same_results(rec));
  CHECK(ExperimentConfig::parse(read_file(tmp.path / "config.txt")).to_string() == c.to_string());

  const auto rows = cmd_eval(tmp.path / "model_seed9.bin", c, 9);
  REQUIRE(rows.size() == rec.seeds[1].rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].row == rec.seeds[1].rows[k].row);
    CHECK(rows[k].report.auroc == rec.seeds[1].rows[k].report.auroc);
    CHECK(rows[k].report.f1 == rec.seeds[1].rows[k].report.f1);
  }
}

TEST_CASE("eval of a zero model gives AUC 0.5") {
  TempDir tmp("zero");
  const MlpModel zero({2, 16, 1}, Activation::relu);
  save_model(tmp.path / "zero.bin", zero);
  for (const auto& r : cmd_eval(tmp.path / "zero.bin", tiny_config(), 0)) CHECK(r.report.auroc == 0.5);
}

TEST_CASE("nearest-neighbour method scores every sine row perfectly") {
  ExperimentConfig c = tiny_config();
  c.method = Method::nn;
  c.data.n_train = 1000;
  c.data.eval_params = {0.2, 2.0};
  for (const auto& a : run_experiment(c).aggregate) CHECK(a.auroc.mean == 1.0);
}

TEST_CASE("boundary grid: size, determinism, slices and errors") {
  Rng rng(4);
  const MlpModel m2 = MlpModel::init_uniform({2, 8, 1}, Activation::relu, rng);
  const std::string g = cmd_boundary_grid(m2, {}, 100);
  const CsvRows rows = parse_grid(g);
  CHECK(rows.rows.size() == 10000);
  CHECK(g.rfind("x1,x2,score\n", 0) == 0);
  CHECK(cmd_boundary_grid(m2, {}, 100) == g);
  CHECK(rows.rows.front()[0] == -7.0);
  CHECK(rows.rows.front()[1] == -3.0);
  CHECK(rows.rows.back()[0] == 7.0);
  CHECK(rows.rows.back()[1] == 3.0);

  const MlpModel m10 = MlpModel::init_uniform({10, 8, 1}, Activation::relu, rng);
  const CsvRows r10 = parse_grid(cmd_boundary_grid(m10, {-1, 1, -2, 2}, 5));
  REQUIRE(r10.rows.size() == 25);
  for (const auto& r : r10.rows) {
    std::vector<double> x(10, 0.0);
    x[0] = r[0];
    x[1] = r[1];
    CHECK(r[2] == score(m10, Tensor2(1, 10, x))[0]);
  }
  const MlpModel m3 = MlpModel::init_uniform({3, 4, 1}, Activation::relu, rng);
  CHECK_THROWS_AS(cmd_boundary_grid(m3, {}, 10), ConfigError);
  CHECK_THROWS_AS(cmd_boundary_grid(m2, {1, 0, 0, 1}, 10), ConfigError);
}

TEST_CASE("boundary grid of a trained sine model is higher on the wave than one unit off it") {
  Rng rng(0);
  const MlpModel init = MlpModel::init_uniform({2, 64, 64, 1}, Activation::relu, rng);
  DroccConfig cfg;
  cfg.radius = 0.2;
  cfg.batch_size = 16;
  cfg.warmup_steps = 50;
  cfg.epochs = 40;
  Tensor2 x = gen_sine2d(1000, 1).features;
  for (std::size_t i = 0; i < x.rows(); ++i) x(i, 0) -= 2 * kPi;
  const MlpModel m = train(init, x, cfg).model;
  const CsvRows g = parse_grid(cmd_boundary_grid(m, {-2 * kPi, 2 * kPi, -3, 3}, 200));
  double near = 0, far = 0;
  std::size_t n_near = 0, n_far = 0;
  for (const auto& r : g.rows) {
    const double gap = std::abs(r[1] - std::sin(r[0] + 2 * kPi));
    if (gap < 0.05) near += r[2], ++n_near;
    if (std::abs(gap - 1.0) < 0.05) far += r[2], ++n_far;
  }
  REQUIRE(n_near > 0);
  REQUIRE(n_far > 0);
  CHECK(near / n_near > far / n_far);
}

TEST_CASE("suites emit the expected rows") {
  ReproOptions o;
  o.seeds = {0};
  o.epochs = 1;
  const auto sine = cmd_repro("sine_table", o);
  REQUIRE(sine.size() == 2);
  CHECK(sine[0].aggregate.size() == 6);
  CHECK(sine[0].find_row("v=0.2") != nullptr);
  CHECK(sine[0].find_row("v=2") != nullptr);
  const auto sphere = cmd_repro("sphere_table", o);
  REQUIRE(sphere.size() == 2);
  CHECK(sphere[0].aggregate.size() == 5);
  CHECK(sphere[0].find_row("rho=1.2") != nullptr);
  const auto ocln = cmd_repro("ocln_synthetic", o);
  REQUIRE(ocln.size() == 2);
  CHECK(ocln[0].config.method == Method::drocc);
  CHECK(ocln[1].config.method == Method::lf);
  CHECK(ocln[1].aggregate.size() == 1);
  CHECK(suite_configs("radius_sweep").size() == 5);
  CHECK(suite_configs("mu_sweep").size() == 4);
  CHECK(suite_configs("rand_ablation").size() == 2);
  CHECK(suite_configs("ocln_synthetic")[0].seeds.size() == 5);
  CHECK_THROWS_AS(suite_configs("table_99"), ContractError);
  const std::string table = format_table(sine);
  CHECK(table.find("v=0.2") != std::string::npos);
}

TEST_CASE("command-line exit codes") {
  TempDir tmp("exit");
  CHECK(run_cli("defaults") == 0);
  write_text(tmp.path / "bad.txt", "[trainer]\nepochz = 1\n");
  CHECK(run_cli("train --config " + (tmp.path / "bad.txt").string()) == 2);
  CHECK(run_cli("eval --model " + (tmp.path / "absent.bin").string()) == 4);
  CHECK(run_cli("train --config " + (tmp.path / "absent.txt").string()) == 4);

  // One Adam step of this size sends the weights, then the loss, out of range.
  write_text(tmp.path / "div.txt", "[run]\nseeds = 0\nout_dir = " + (tmp.path / "div").string() +
                                       "\n[data]\nn_train = 100\nn_test = 50\n[model]\nhidden = 16, 16\n"
                                       "[trainer]\nepochs = 1\nwarmup_steps = 3\nlearning_rate = 1e300\n");
  CHECK(run_cli("train --config " + (tmp.path / "div.txt").string()) == 3);

  ExperimentConfig c = tiny_config();
  c.seeds = {0};
  c.trainer.base.epochs = 1;
  write_text(tmp.path / "ok.txt", c.to_string());
  const fs::path out = tmp.path / "run";
  CHECK(run_cli("train --config " + (tmp.path / "ok.txt").string() + " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "model_seed0.bin"));
  CHECK(run_cli("eval --config " + (tmp.path / "ok.txt").string() + " --model " + (out / "model_seed0.bin").string() +
                " --out " + out.string()) == 0);
  CHECK(fs::exists(out / "eval_report.txt"));
  CHECK(run_cli("boundary-grid --model " + (out / "model_seed0.bin").string() + " --resolution 10 --out " +
                out.string()) == 0);
  CHECK(parse_grid(read_file(out / "boundary_grid.csv")).rows.size() == 100);
}

TEST_CASE("radii far beyond the data diameter degrade the sine AUC") {
  std::vector<double> medians;
  for (double r : {std::sqrt(2.0) / 2.0, 4.0, 40.0}) {
    ExperimentConfig c = suite_configs("sine_table")[0];
    c.trainer.base.radius = r;
    c.trainer.base.epochs = 30;
    c.data.eval_params = {0.2};
    medians.push_back(run_experiment(c, 3).aggregate[0].auroc.median);
  }
  CHECK(medians[0] > medians[1]);
  CHECK(medians[1] > medians[2]);
}
