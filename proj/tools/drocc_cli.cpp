// Command-line harness: train, eval, repro, boundary-grid, defaults.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "drocc/data.hpp"
#include "drocc/experiment.hpp"

namespace fs = std::filesystem;
using namespace drocc;

namespace {

ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return ExperimentConfig::defaults();
  return ExperimentConfig::parse(read_file(path));
}

void print_rows(const std::vector<RowResult>& rows) {
  for (const auto& r : rows) {
    std::cout << "[" << r.row << "]\n" << to_text(r.report);
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Deep robust one-class classification: training and reproduction harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;

  auto* train = app.add_subcommand("train", "Train every configured seed and write run artifacts");
  train->add_option("--config", config_path, "Config file (flat [section] key = value)");
  train->add_option("--seed", seed, "Run only this seed");
  train->add_option("--out", out_dir, "Output directory (overrides [run] out_dir)");

  std::string model_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a saved model on the configured test data");
  eval->add_option("--model", model_path, "Model snapshot")->required();
  eval->add_option("--config", config_path, "Config file describing data and metrics");
  eval->add_option("--seed", seed, "Seed selecting the generated test data (default: first configured)");
  eval->add_option("--out", out_dir, "Write eval_report.txt here");

  std::string suite;
  std::optional<std::size_t> epochs;
  auto* repro = app.add_subcommand("repro", "Run a canned reproduction suite and print its table");
  repro->add_option("--suite", suite, "Suite name")->required()->check(CLI::IsMember(
      std::vector<std::string>(kSuites.begin(), kSuites.end())));
  repro->add_option("--seed", seed, "Run only this seed");
  repro->add_option("--out", out_dir, "Write per-record files and table.txt here");
  repro->add_option("--epochs", epochs, "Override the training epochs (quick runs)");

  std::vector<double> bounds{-7.0, 7.0, -3.0, 3.0};
  std::size_t resolution = 100;
  auto* grid = app.add_subcommand("boundary-grid", "Export model scores over a 2-D grid as CSV");
  grid->add_option("--model", model_path, "Model snapshot")->required();
  grid->add_option("--bounds", bounds, "x_min x_max y_min y_max")->expected(4);
  grid->add_option("--resolution", resolution, "Points per axis");
  grid->add_option("--out", out_dir, "Write boundary_grid.csv here instead of stdout");

  auto* defaults = app.add_subcommand("defaults", "Print the default config");

  CLI11_PARSE(app, argc, argv);
  const std::size_t threads = threads_from_env();

  if (*train) {
    ExperimentConfig cfg = load_config(config_path);
    if (seed) cfg.seeds = {*seed};
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    const RunRecord rec = cmd_train(cfg, threads);
    std::cout << format_table({rec});
  } else if (*eval) {
    const ExperimentConfig cfg = load_config(config_path);
    const auto rows = cmd_eval(model_path, cfg, seed.value_or(cfg.seeds.front()));
    print_rows(rows);
    if (!out_dir.empty()) {
      std::string text;
      for (const auto& r : rows) text += "[" + r.row + "]\n" + to_text(r.report);
      write_file_atomic(fs::path(out_dir) / "eval_report.txt", text);
    }
  } else if (*repro) {
    ReproOptions opts;
    if (seed) opts.seeds = {*seed};
    opts.epochs = epochs;
    opts.threads = threads;
    opts.out_dir = out_dir;
    std::cout << format_table(cmd_repro(suite, opts));
  } else if (*grid) {
    const MlpModel model = load_model(model_path);
    const std::string csv = cmd_boundary_grid(model, {bounds[0], bounds[1], bounds[2], bounds[3]}, resolution);
    if (out_dir.empty()) {
      std::cout << csv;
    } else {
      write_file_atomic(fs::path(out_dir) / "boundary_grid.csv", csv);
    }
  } else if (*defaults) {
    std::cout << ExperimentConfig::defaults().to_string();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}
