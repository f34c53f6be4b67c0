#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "drocc/data.hpp"
#include "drocc/drocc_lf.hpp"
#include "drocc/kvtext.hpp"
#include "drocc/metrics.hpp"

namespace drocc {

inline constexpr std::string_view kLibraryVersion = "0.1.0";

/// Process exit codes of the command-line harness.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitDivergence = 3, kExitIo = 4 };

/// A config document is malformed; the message names section and key.
class ConfigError : public ContractError {
 public:
  using ContractError::ContractError;
};

enum class Method { drocc, lf, oe, nn };
std::string_view to_string(Method m);
Method method_from_string(std::string_view s);

enum class NormMode { none, center, standard };
std::string_view to_string(NormMode m);
NormMode norm_mode_from_string(std::string_view s);

/// Where rows come from. Synthetic sources pair each positive manifold with
/// its negative family: sine2d with displaced sine, noisy_sine10d with its
/// displaced variant (coordinate 2), ball with sphere surfaces.
struct DataSpec {
  std::string source = "sine2d";  // sine2d | noisy_sine10d | ball | csv
  std::size_t n_train = 1000;
  std::size_t n_test = 1000;       // per class, per evaluation row
  std::size_t dim = 2;             // ball and noisy_sine10d
  std::vector<double> eval_params{0.2, 0.4, 0.6, 0.8, 1.0, 2.0};  // displacement or sphere radius
  std::size_t train_negatives = 0;  // labelled negatives for lf / oe
  double train_negative_param = 0.5;
  std::uint64_t data_seed = 0;      // mixed with the run seed
  NormMode normalize = NormMode::center;

  std::string csv_path;
  std::string label_column = "label";
  std::string positive_value = "1";
  std::array<double, 3> split{0.6, 0.2, 0.2};
};

struct ModelSpec {
  std::vector<std::size_t> hidden{128, 128};
  Activation activation = Activation::relu;

  std::vector<std::size_t> dims(std::size_t input_dim) const;
};

struct ExperimentConfig {
  std::string name = "train";
  DataSpec data;
  ModelSpec model;
  Method method = Method::drocc;
  LfConfig trainer;  // trainer.base holds the plain DROCC settings
  EvalOptions eval;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string out_dir = "runs";

  /// Defaults of the sine suite with the library's trainer settings.
  static ExperimentConfig defaults();

  /// Throws ConfigError for unknown sections/keys and unparsable or invalid values.
  static ExperimentConfig from_document(const KvDocument& doc);
  static ExperimentConfig parse(std::string_view text);
  KvDocument to_document() const;
  std::string to_string() const;

  void validate() const;
};

/// Train / evaluation material for one seed.
struct PreparedData {
  Dataset train;  // normalised; may contain labelled negatives for lf / oe
  Tensor2 test_pos;
  std::vector<std::pair<std::string, Tensor2>> test_neg;  // one entry per evaluation row
  Tensor2 val_neg;  // empty for synthetic sources
  std::optional<NormStats> norm;
};

PreparedData prepare_data(const DataSpec& spec, std::uint64_t seed);

struct RowResult {
  std::string row;
  EvalReport report;
};

struct SeedResult {
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  std::vector<RowResult> rows;
};

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double median = 0.0;
};

Summary summarize(std::span<const double> values);

struct RowAggregate {
  std::string row;
  Summary auroc;
  Summary f1;
};

struct RunRecord {
  ExperimentConfig config;
  std::vector<SeedResult> seeds;
  std::vector<RowAggregate> aggregate;
  std::string version{kLibraryVersion};

  /// Recompute `aggregate` from `seeds`.
  void update_aggregate();
  const RowAggregate* find_row(std::string_view row) const;

  std::string to_string() const;
  static RunRecord parse(std::string_view text);

  /// Equal apart from wall times.
  bool same_results(const RunRecord& other) const;
};

// ---- model snapshots -------------------------------------------------------

/// Versioned binary: magic, format version, activation, layer dims, then
/// weights and biases of each layer as little-endian float64.
void save_model(const std::filesystem::path& path, const MlpModel& model);
MlpModel load_model(const std::filesystem::path& path);

/// Write to a sibling temporary file then rename over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

// ---- commands ----------------------------------------------------------------

struct SeedOutput {
  SeedResult result;
  MlpModel model;
};

/// Train and evaluate one seed of `cfg`. Pure apart from the clock.
SeedOutput run_seed(const ExperimentConfig& cfg, std::uint64_t seed);

/// Seeds run concurrently on up to `threads` workers; results keep seed order.
RunRecord run_experiment(const ExperimentConfig& cfg, std::size_t threads = 1);

/// run_experiment plus artifacts under cfg.out_dir: config.txt, run_record.txt
/// and model_seed<N>.bin per seed.
RunRecord cmd_train(const ExperimentConfig& cfg, std::size_t threads = 1);

/// Evaluate a saved model on the test material of `cfg` for `seed`.
std::vector<RowResult> cmd_eval(const std::filesystem::path& model_file, const ExperimentConfig& cfg,
                                std::uint64_t seed);

inline const std::vector<std::string_view> kSuites{"sine_table",     "sphere_table", "rand_ablation",
                                                   "ocln_synthetic", "radius_sweep", "mu_sweep"};

/// The experiments behind one reproduction suite, one config per method or
/// sweep value.
std::vector<ExperimentConfig> suite_configs(std::string_view suite);

struct ReproOptions {
  std::vector<std::uint64_t> seeds;   // empty keeps the suite's seeds
  std::optional<std::size_t> epochs;  // override for quick runs
  std::size_t threads = 1;
  std::filesystem::path out_dir;      // empty writes nothing
};

std::vector<RunRecord> cmd_repro(std::string_view suite, const ReproOptions& opts = {});

/// Plain-text table of aggregate AUC per row and record.
std::string format_table(const std::vector<RunRecord>& records);

struct GridBounds {
  double x_min = -7.0, x_max = 7.0, y_min = -3.0, y_max = 3.0;
};

/// CSV "x1,x2,score" over a resolution x resolution grid. Models of input dim
/// 2 are evaluated directly; wider models on coordinates 1-2 with the rest 0.
std::string cmd_boundary_grid(const MlpModel& model, const GridBounds& bounds, std::size_t resolution);

/// Thread count from DROCC_THREADS, defaulting to 1.
std::size_t threads_from_env();

}  // namespace drocc
