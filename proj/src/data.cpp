#include "drocc/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "drocc/rng.hpp"

namespace drocc {

std::vector<std::size_t> Dataset::indices(std::optional<Split> s, std::optional<Label> y) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) {
    if (s && split[i] != *s) continue;
    if (y && labels[i] != *y) continue;
    out.push_back(i);
  }
  return out;
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  Dataset out;
  out.features = features.gather_rows(idx);
  for (std::size_t i : idx) {
    out.labels.push_back(labels[i]);
    out.split.push_back(split[i]);
  }
  out.norm_stats = norm_stats;
  out.contamination = contamination;
  return out;
}

void Dataset::validate() const {
  if (labels.size() != size() || split.size() != size()) {
    throw ContractError("Dataset: labels/split length must equal row count");
  }
  if (!features.all_finite()) throw ContractError("Dataset: non-finite feature");
  if (norm_stats) {
    for (double s : norm_stats->stddev) {
      if (!(s > 0.0)) throw ContractError("Dataset: non-positive std in norm stats");
    }
  }
}

Dataset concat(const Dataset& a, const Dataset& b) {
  Dataset out;
  out.features = Tensor2::vstack(a.features, b.features);
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.split = a.split;
  out.split.insert(out.split.end(), b.split.begin(), b.split.end());
  out.norm_stats = a.norm_stats;
  return out;
}

namespace {

Dataset make(std::size_t n, std::size_t d, Label y) {
  Dataset ds;
  ds.features = Tensor2(n, d);
  ds.labels.assign(n, y);
  ds.split.assign(n, Split::train);
  return ds;
}

void fill_sine(Dataset& ds, Rng& rng, const SineParams& p, double displacement) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double t = rng.uniform(p.t_min, p.t_max);
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    ds.features(i, 0) = t;
    ds.features(i, 1) = p.amplitude * std::sin(t) + sign * displacement;
  }
}

void fill_noise(Dataset& ds, Rng& rng) {
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 2; j < ds.dim(); ++j) ds.features(i, j) = rng.normal();
  }
}

}  // namespace

Dataset gen_sine2d(std::size_t n, std::uint64_t seed, const SineParams& p) {
  if (n == 0) throw ContractError("gen_sine2d: n must be >= 1");
  Rng rng(seed);
  Dataset ds = make(n, 2, Label::positive);
  fill_sine(ds, rng, p, 0.0);
  return ds;
}

Dataset gen_sine_displaced(std::size_t n, double displacement, std::uint64_t seed,
                           const SineParams& p) {
  if (n == 0) throw ContractError("gen_sine_displaced: n must be >= 1");
  if (displacement < 0.0) throw ContractError("gen_sine_displaced: displacement must be >= 0");
  Rng rng(seed);
  Dataset ds = make(n, 2, Label::negative);
  fill_sine(ds, rng, p, displacement);
  return ds;
}

Dataset gen_noisy_sine(std::size_t n, std::uint64_t seed, std::size_t dim, const SineParams& p) {
  if (n == 0) throw ContractError("gen_noisy_sine: n must be >= 1");
  if (dim < 2) throw ContractError("gen_noisy_sine: dim must be >= 2");
  Rng rng(seed);
  Dataset ds = make(n, dim, Label::positive);
  fill_sine(ds, rng, p, 0.0);
  fill_noise(ds, rng);
  return ds;
}

Dataset gen_noisy_sine_displaced(std::size_t n, double displacement, std::uint64_t seed,
                                 std::size_t dim, const SineParams& p) {
  if (n == 0) throw ContractError("gen_noisy_sine_displaced: n must be >= 1");
  if (dim < 2) throw ContractError("gen_noisy_sine_displaced: dim must be >= 2");
  Rng rng(seed);
  Dataset ds = make(n, dim, Label::negative);
  fill_sine(ds, rng, p, displacement);
  fill_noise(ds, rng);
  return ds;
}

Dataset gen_ball(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n == 0 || d == 0) throw ContractError("gen_ball: n and d must be >= 1");
  Rng rng(seed);
  Dataset ds = make(n, d, Label::positive);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.features.row(i);
    rng.unit_vector(row);
    const double rho = std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
    for (double& v : row) v *= rho;
  }
  return ds;
}

Dataset gen_sphere_surface(std::size_t n, std::size_t d, double rho, std::uint64_t seed) {
  if (n == 0 || d == 0) throw ContractError("gen_sphere_surface: n and d must be >= 1");
  if (!(rho > 0.0)) throw ContractError("gen_sphere_surface: radius must be > 0");
  Rng rng(seed);
  Dataset ds = make(n, d, Label::negative);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = ds.features.row(i);
    rng.unit_vector(row);
    for (double& v : row) v *= rho;
  }
  return ds;
}

std::string_view to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::sine2d: return "sine2d";
    case GeneratorKind::sine_displaced: return "sine_displaced";
    case GeneratorKind::noisy_sine10d: return "noisy_sine10d";
    case GeneratorKind::noisy_sine10d_displaced: return "noisy_sine10d_displaced";
    case GeneratorKind::ball: return "ball";
    case GeneratorKind::sphere_surface: return "sphere_surface";
  }
  return "?";
}

GeneratorKind generator_from_string(std::string_view s) {
  for (auto k : {GeneratorKind::sine2d, GeneratorKind::sine_displaced, GeneratorKind::noisy_sine10d,
                 GeneratorKind::noisy_sine10d_displaced, GeneratorKind::ball, GeneratorKind::sphere_surface}) {
    if (to_string(k) == s) return k;
  }
  throw ContractError("unknown generator '" + std::string(s) + "'");
}

Dataset generate(const GeneratorSpec& spec) {
  switch (spec.kind) {
    case GeneratorKind::sine2d: return gen_sine2d(spec.n, spec.seed);
    case GeneratorKind::sine_displaced: return gen_sine_displaced(spec.n, spec.displacement, spec.seed);
    case GeneratorKind::noisy_sine10d: return gen_noisy_sine(spec.n, spec.seed, spec.dim);
    case GeneratorKind::noisy_sine10d_displaced:
      return gen_noisy_sine_displaced(spec.n, spec.displacement, spec.seed, spec.dim);
    case GeneratorKind::ball: return gen_ball(spec.n, spec.dim, spec.seed);
    case GeneratorKind::sphere_surface: return gen_sphere_surface(spec.n, spec.dim, spec.radius, spec.seed);
  }
  throw ContractError("generate: bad kind");
}

// ---- CSV -----------------------------------------------------------------

namespace {

std::string read_all(const std::filesystem::path& path) {
  if (path.extension() == ".gz") {
    gzFile f = gzopen(path.string().c_str(), "rb");
    if (!f) throw IoError("cannot open " + path.string());
    std::string out;
    char buf[1 << 15];
    int got = 0;
    while ((got = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(got));
    const bool bad = got < 0;
    gzclose(f);
    if (bad) throw IoError("gzip read error in " + path.string());
    return out;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      cells.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return cells;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::string_view label_column,
                 std::string_view positive_label_value) {
  const std::string text = read_all(path);
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const auto nl = rest.find('\n');
      lines.push_back(rest.substr(0, nl));
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  // Skip a UTF-8 byte order mark.
  if (!lines.empty() && lines[0].substr(0, 3) == "\xEF\xBB\xBF") lines[0].remove_prefix(3);
  if (lines.empty() || trim(lines[0]).empty()) throw ParseError("empty file: no header", 1, 0);

  const auto header = split_line(lines[0]);
  std::size_t label_idx = header.size();
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == label_column) label_idx = c;
  }
  if (label_idx == header.size()) {
    throw ParseError("missing label column '" + std::string(label_column) + "'", 1, 0);
  }
  const std::size_t d = header.size() - 1;
  if (d == 0) throw ParseError("no feature columns", 1, 0);

  std::vector<double> values;
  std::vector<Label> labels;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const std::size_t row = li + 1;
    const auto cells = split_line(lines[li]);
    if (cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(cells.size()), row, 0);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c == label_idx) {
        labels.push_back(cells[c] == positive_label_value ? Label::positive : Label::negative);
        continue;
      }
      double v = 0.0;
      const char* b = cells[c].data();
      const char* e = b + cells[c].size();
      if (!cells[c].empty() && *b == '+') ++b;
      const auto [ptr, ec] = std::from_chars(b, e, v);
      if (cells[c].empty() || ec != std::errc() || ptr != e || !std::isfinite(v)) {
        throw ParseError("non-numeric cell '" + std::string(cells[c]) + "'", row, c + 1);
      }
      values.push_back(v);
    }
  }
  if (labels.empty()) throw ParseError("empty dataset: header only", 1, 0);

  Dataset ds;
  const std::size_t n = labels.size();
  ds.features = Tensor2(n, d, std::move(values));
  ds.labels = std::move(labels);
  ds.split.assign(n, Split::train);
  return ds;
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t j = 0; j < ds.dim(); ++j) out << "x" << j << ',';
  out << "label\n";
  char buf[64];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof buf, ds.features(i, j));
      out.write(buf, res.ptr - buf);
      out << ',';
    }
    out << (ds.labels[i] == Label::positive ? "1" : "-1") << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Dataset normalize(const Dataset& ds, bool scale) {
  const auto train = ds.indices(Split::train);
  if (train.empty()) throw ContractError("normalize: empty train split");
  const std::size_t d = ds.dim();
  NormStats st{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (std::size_t i : train) {
    for (std::size_t j = 0; j < d; ++j) st.mean[j] += ds.features(i, j);
  }
  for (double& m : st.mean) m /= static_cast<double>(train.size());
  for (std::size_t i : train) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = ds.features(i, j) - st.mean[j];
      st.stddev[j] += c * c;
    }
  }
  for (double& s : st.stddev) {
    s = std::sqrt(s / static_cast<double>(train.size()));
    if (!(s > 1e-12) || !scale) s = 1.0;
  }
  return apply_norm(ds, st);
}

Dataset apply_norm(const Dataset& ds, const NormStats& st) {
  const std::size_t d = ds.dim();
  if (st.mean.size() != d || st.stddev.size() != d) throw ContractError("apply_norm: stats dim mismatch");
  Dataset out = ds;
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      out.features(i, j) = (out.features(i, j) - st.mean[j]) / st.stddev[j];
    }
  }
  out.norm_stats = st;
  return out;
}

Dataset split(const Dataset& ds, std::array<double, 3> ratios, std::uint64_t seed) {
  double total = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ContractError("split: negative ratio");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ContractError("split: ratios must sum to 1");
  const std::size_t n = ds.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng.engine());
  const auto n_train = static_cast<std::size_t>(std::llround(ratios[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::llround(ratios[1] * static_cast<double>(n))));
  Dataset out = ds;
  out.split.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    out.split[perm[k]] = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
  }
  return out;
}

}  // namespace drocc
