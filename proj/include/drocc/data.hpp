#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "drocc/mlp.hpp"
#include "drocc/tensor.hpp"

namespace drocc {

enum class Split : std::uint8_t { train, val, test };

struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

struct Dataset {
  Tensor2 features;
  std::vector<Label> labels;
  std::vector<Split> split;  // one tag per row
  std::optional<NormStats> norm_stats;
  std::optional<double> contamination;

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }

  /// Row indices matching the split and (optionally) the label.
  std::vector<std::size_t> indices(std::optional<Split> s, std::optional<Label> y = {}) const;

  /// Rows at `idx`, keeping labels, tags and normalisation stats.
  Dataset subset(const std::vector<std::size_t>& idx) const;

  /// Throws ContractError if lengths disagree or features are non-finite.
  void validate() const;
};

/// Rows of `a` followed by rows of `b`.
Dataset concat(const Dataset& a, const Dataset& b);

// ---- synthetic manifolds -------------------------------------------------

inline constexpr double kPi = 3.14159265358979323846;

struct SineParams {
  double t_min = 0.0;
  double t_max = 4.0 * kPi;
  double amplitude = 1.0;
};

/// (t, A sin t) with t ~ U[t_min, t_max]; labels +1.
Dataset gen_sine2d(std::size_t n, std::uint64_t seed, const SineParams& p = {});

/// (t, A sin t +/- v); signs alternate so the split is even; labels -1.
Dataset gen_sine_displaced(std::size_t n, double displacement, std::uint64_t seed,
                           const SineParams& p = {});

/// First two coordinates from the sine wave, the remaining dim-2 coordinates
/// i.i.d. N(0, 1); labels +1.
Dataset gen_noisy_sine(std::size_t n, std::uint64_t seed, std::size_t dim = 10,
                       const SineParams& p = {});

/// As gen_noisy_sine but coordinate 2 shifted by +/- v; labels -1.
Dataset gen_noisy_sine_displaced(std::size_t n, double displacement, std::uint64_t seed,
                                 std::size_t dim = 10, const SineParams& p = {});

/// Uniform over the volume of the unit ball in R^d; labels +1.
Dataset gen_ball(std::size_t n, std::size_t d, std::uint64_t seed);

/// Uniform over the sphere of radius rho in R^d; labels -1.
Dataset gen_sphere_surface(std::size_t n, std::size_t d, double rho, std::uint64_t seed);

enum class GeneratorKind { sine2d, sine_displaced, noisy_sine10d, noisy_sine10d_displaced, ball, sphere_surface };

std::string_view to_string(GeneratorKind k);
GeneratorKind generator_from_string(std::string_view s);

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::sine2d;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double displacement = 1.0;  // sine_displaced, noisy_sine10d_displaced
  double radius = 1.0;        // sphere_surface
  std::size_t dim = 2;        // ball, sphere_surface, noisy_sine10d
};

Dataset generate(const GeneratorSpec& spec);

// ---- tabular ingestion ---------------------------------------------------

/// CSV problem with a 1-based position (row 1 is the header; column 0 means
/// the whole row).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t col)
      : std::runtime_error(what + " (row " + std::to_string(row) + ", col " + std::to_string(col) + ")"),
        row_(row),
        col_(col) {}
  std::size_t row() const { return row_; }
  std::size_t col() const { return col_; }

 private:
  std::size_t row_;
  std::size_t col_;
};

/// Reads a header-first CSV of numeric features plus a label column. Rows whose
/// label cell equals `positive_label_value` become +1, all others -1. Files
/// ending in `.gz` are decompressed on the fly. Row order is preserved and all
/// rows are tagged `train`.
Dataset load_csv(const std::filesystem::path& path, std::string_view label_column,
                 std::string_view positive_label_value);

/// Writes features with a trailing `label` column holding 1 / -1, round-trip exact.
void write_csv(const std::filesystem::path& path, const Dataset& ds);

/// Fit per-feature mean/std on the train split and apply them to every row.
/// Constant features get std 1. With `scale` false only the mean is removed
/// (stddev is recorded as 1), which keeps distances unchanged. Throws if the
/// train split is empty.
Dataset normalize(const Dataset& ds, bool scale = true);

/// Apply previously fitted statistics to every row of `ds`.
Dataset apply_norm(const Dataset& ds, const NormStats& st);

/// Tag rows train/val/test by a seeded permutation with the given ratios;
/// row order is preserved. Ratios must be non-negative and sum to 1.
Dataset split(const Dataset& ds, std::array<double, 3> ratios, std::uint64_t seed);

}  // namespace drocc
