#include "drocc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <functional>
#include <fstream>
#include <sstream>
#include <thread>

namespace drocc {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::drocc: return "drocc";
    case Method::lf: return "lf";
    case Method::oe: return "oe";
    case Method::nn: return "nn";
  }
  return "drocc";
}

Method method_from_string(std::string_view s) {
  if (s == "drocc") return Method::drocc;
  if (s == "lf") return Method::lf;
  if (s == "oe") return Method::oe;
  if (s == "nn") return Method::nn;
  throw ContractError("unknown method '" + std::string(s) + "' (expected drocc, lf, oe or nn)");
}

std::string_view to_string(NormMode m) {
  switch (m) {
    case NormMode::none: return "none";
    case NormMode::center: return "center";
    case NormMode::standard: return "standard";
  }
  return "none";
}

NormMode norm_mode_from_string(std::string_view s) {
  if (s == "none") return NormMode::none;
  if (s == "center") return NormMode::center;
  if (s == "standard") return NormMode::standard;
  throw ContractError("unknown normalization '" + std::string(s) + "' (expected none, center or standard)");
}

std::vector<std::size_t> ModelSpec::dims(std::size_t input_dim) const {
  std::vector<std::size_t> d{input_dim};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(1);
  return d;
}

// ---- config ----------------------------------------------------------------

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig c;
  DroccConfig& b = c.trainer.base;
  b.radius = 0.2;
  b.batch_size = 16;
  b.warmup_steps = 50;
  b.epochs = 300;
  return c;
}

namespace {

template <typename T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(v[i]);
    } else {
      out += std::to_string(v[i]);
    }
  }
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

bool parse_bool(std::string_view s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("not a boolean: '" + std::string(s) + "'");
}

std::size_t parse_count(std::string_view s) {
  const long long v = parse_int(s);
  if (v < 0) throw std::invalid_argument("must be >= 0, got " + std::string(s));
  return static_cast<std::size_t>(v);
}

std::vector<double> parse_doubles(std::string_view s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) out.push_back(parse_double(item));
  return out;
}

std::vector<std::size_t> parse_counts(std::string_view s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) out.push_back(parse_count(item));
  return out;
}

/// Applies the entries of a document to a config, reporting the section and
/// key of anything it cannot use.
class ConfigReader {
 public:
  explicit ConfigReader(const KvDocument& doc) : doc_(doc) {}

  template <typename Fn>
  void field(const std::string& section, const std::string& key, Fn&& apply) {
    known_.emplace_back(section, key);
    const std::string* v = doc_.find(section, key);
    if (!v) return;
    try {
      apply(*v);
    } catch (const std::exception& e) {
      throw ConfigError("config [" + section + "] " + key + ": " + e.what());
    }
  }

  void reject_unknown() const {
    for (const auto& [section, entries] : doc_.sections()) {
      for (const auto& [key, value] : entries) {
        const bool ok = std::any_of(known_.begin(), known_.end(),
                                    [&](const auto& k) { return k.first == section && k.second == key; });
        if (!ok) throw ConfigError("config [" + section + "] " + key + ": unknown key");
      }
    }
  }

 private:
  const KvDocument& doc_;
  std::vector<std::pair<std::string, std::string>> known_;
};

}  // namespace

ExperimentConfig ExperimentConfig::from_document(const KvDocument& doc) {
  ExperimentConfig c = defaults();
  ConfigReader r(doc);
  DataSpec& d = c.data;
  DroccConfig& b = c.trainer.base;

  r.field("run", "name", [&](const std::string& v) { c.name = v; });
  r.field("run", "seeds", [&](const std::string& v) {
    c.seeds.clear();
    for (std::size_t s : parse_counts(v)) c.seeds.push_back(s);
  });
  r.field("run", "out_dir", [&](const std::string& v) { c.out_dir = v; });

  r.field("data", "source", [&](const std::string& v) { d.source = v; });
  r.field("data", "n_train", [&](const std::string& v) { d.n_train = parse_count(v); });
  r.field("data", "n_test", [&](const std::string& v) { d.n_test = parse_count(v); });
  r.field("data", "dim", [&](const std::string& v) { d.dim = parse_count(v); });
  r.field("data", "eval_params", [&](const std::string& v) { d.eval_params = parse_doubles(v); });
  r.field("data", "train_negatives", [&](const std::string& v) { d.train_negatives = parse_count(v); });
  r.field("data", "train_negative_param", [&](const std::string& v) { d.train_negative_param = parse_double(v); });
  r.field("data", "data_seed", [&](const std::string& v) { d.data_seed = parse_count(v); });
  r.field("data", "normalize", [&](const std::string& v) { d.normalize = norm_mode_from_string(v); });
  r.field("data", "csv_path", [&](const std::string& v) { d.csv_path = v; });
  r.field("data", "label_column", [&](const std::string& v) { d.label_column = v; });
  r.field("data", "positive_value", [&](const std::string& v) { d.positive_value = v; });
  r.field("data", "split", [&](const std::string& v) {
    const auto s = parse_doubles(v);
    if (s.size() != 3) throw std::invalid_argument("expected three ratios");
    d.split = {s[0], s[1], s[2]};
  });

  r.field("model", "hidden", [&](const std::string& v) { c.model.hidden = parse_counts(v); });
  r.field("model", "activation", [&](const std::string& v) { c.model.activation = activation_from_string(v); });

  r.field("trainer", "method", [&](const std::string& v) { c.method = method_from_string(v); });
  r.field("trainer", "radius", [&](const std::string& v) { b.radius = parse_double(v); });
  r.field("trainer", "gamma", [&](const std::string& v) { b.gamma = parse_double(v); });
  r.field("trainer", "lambda", [&](const std::string& v) { b.lambda = parse_double(v); });
  r.field("trainer", "mu", [&](const std::string& v) { b.mu = parse_double(v); });
  r.field("trainer", "ascent_step", [&](const std::string& v) { b.ascent_step = parse_double(v); });
  r.field("trainer", "ascent_iters", [&](const std::string& v) { b.ascent_iters = parse_count(v); });
  r.field("trainer", "warmup_steps", [&](const std::string& v) { b.warmup_steps = parse_count(v); });
  r.field("trainer", "epochs", [&](const std::string& v) { b.epochs = parse_count(v); });
  r.field("trainer", "batch_size", [&](const std::string& v) { b.batch_size = parse_count(v); });
  r.field("trainer", "optimizer", [&](const std::string& v) { b.optimizer = optimizer_from_string(v); });
  r.field("trainer", "learning_rate", [&](const std::string& v) { b.learning_rate = parse_double(v); });
  r.field("trainer", "mode", [&](const std::string& v) { b.mode = negative_mode_from_string(v); });
  r.field("trainer", "adversarial_every", [&](const std::string& v) { b.adversarial_every = parse_count(v); });
  r.field("trainer", "grid_points", [&](const std::string& v) { c.trainer.grid_points = parse_count(v); });
  r.field("trainer", "freeze_sigma", [&](const std::string& v) { c.trainer.freeze_sigma = parse_bool(v); });
  r.field("trainer", "sigma_floor", [&](const std::string& v) { c.trainer.sigma_floor = parse_double(v); });
  r.field("trainer", "negative_weight", [&](const std::string& v) { c.trainer.negative_weight = parse_double(v); });

  r.field("eval", "fpr_targets", [&](const std::string& v) { c.eval.fpr_targets = parse_doubles(v); });
  r.field("eval", "contamination", [&](const std::string& v) { c.eval.contamination = parse_double(v); });

  r.reject_unknown();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::parse(std::string_view text) {
  KvDocument doc;
  try {
    doc = KvDocument::parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return from_document(doc);
}

KvDocument ExperimentConfig::to_document() const {
  KvDocument doc;
  const DataSpec& d = data;
  const DroccConfig& b = trainer.base;
  doc.set("run", "name", name);
  doc.set("run", "seeds", join(seeds));
  doc.set("run", "out_dir", out_dir);

  doc.set("data", "source", d.source);
  doc.set("data", "n_train", std::to_string(d.n_train));
  doc.set("data", "n_test", std::to_string(d.n_test));
  doc.set("data", "dim", std::to_string(d.dim));
  doc.set("data", "eval_params", join(d.eval_params));
  doc.set("data", "train_negatives", std::to_string(d.train_negatives));
  doc.set("data", "train_negative_param", format_double(d.train_negative_param));
  doc.set("data", "data_seed", std::to_string(d.data_seed));
  doc.set("data", "normalize", std::string(drocc::to_string(d.normalize)));
  doc.set("data", "csv_path", d.csv_path);
  doc.set("data", "label_column", d.label_column);
  doc.set("data", "positive_value", d.positive_value);
  doc.set("data", "split", join(std::vector<double>(d.split.begin(), d.split.end())));

  doc.set("model", "hidden", join(model.hidden));
  doc.set("model", "activation", std::string(drocc::to_string(model.activation)));

  doc.set("trainer", "method", std::string(drocc::to_string(method)));
  doc.set("trainer", "radius", format_double(b.radius));
  doc.set("trainer", "gamma", format_double(b.gamma));
  doc.set("trainer", "lambda", format_double(b.lambda));
  doc.set("trainer", "mu", format_double(b.mu));
  doc.set("trainer", "ascent_step", format_double(b.ascent_step));
  doc.set("trainer", "ascent_iters", std::to_string(b.ascent_iters));
  doc.set("trainer", "warmup_steps", std::to_string(b.warmup_steps));
  doc.set("trainer", "epochs", std::to_string(b.epochs));
  doc.set("trainer", "batch_size", std::to_string(b.batch_size));
  doc.set("trainer", "optimizer", std::string(drocc::to_string(b.optimizer)));
  doc.set("trainer", "learning_rate", format_double(b.learning_rate));
  doc.set("trainer", "mode", std::string(drocc::to_string(b.mode)));
  doc.set("trainer", "adversarial_every", std::to_string(b.adversarial_every));
  doc.set("trainer", "grid_points", std::to_string(trainer.grid_points));
  doc.set("trainer", "freeze_sigma", bool_text(trainer.freeze_sigma));
  doc.set("trainer", "sigma_floor", format_double(trainer.sigma_floor));
  doc.set("trainer", "negative_weight", format_double(trainer.negative_weight));

  doc.set("eval", "fpr_targets", join(eval.fpr_targets));
  doc.set("eval", "contamination", format_double(eval.contamination));
  return doc;
}

std::string ExperimentConfig::to_string() const { return to_document().to_string(); }

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& where, const std::string& why) {
    throw ConfigError("config " + where + ": " + why);
  };
  const DataSpec& d = data;
  static const std::vector<std::string_view> sources{"sine2d", "noisy_sine10d", "ball", "csv"};
  if (std::find(sources.begin(), sources.end(), d.source) == sources.end()) {
    fail("[data] source", "unknown source '" + d.source + "' (expected sine2d, noisy_sine10d, ball or csv)");
  }
  if (d.source == "csv") {
    if (d.csv_path.empty()) fail("[data] csv_path", "required when source = csv");
  } else {
    if (d.n_train == 0) fail("[data] n_train", "must be >= 1");
    if (d.n_test == 0) fail("[data] n_test", "must be >= 1");
    if (d.eval_params.empty()) fail("[data] eval_params", "need at least one value");
    if (d.source == "noisy_sine10d" && d.dim < 2) fail("[data] dim", "must be >= 2");
    if (d.source == "ball" && d.dim < 1) fail("[data] dim", "must be >= 1");
    for (double v : d.eval_params) {
      if (!std::isfinite(v) || v < 0.0) fail("[data] eval_params", "values must be finite and >= 0");
    }
  }
  if (seeds.empty()) fail("[run] seeds", "need at least one seed");
  for (double f : eval.fpr_targets) {
    if (!(f > 0.0 && f < 1.0)) fail("[eval] fpr_targets", "values must lie in (0, 1)");
  }
  if (!(eval.contamination < 1.0)) fail("[eval] contamination", "must be < 1");
  for (std::size_t h : model.hidden) {
    if (h == 0) fail("[model] hidden", "layer widths must be >= 1");
  }
  if (method != Method::nn) {
    try {
      trainer.validate();
      if (!(trainer.base.radius >= 0.0)) throw ContractError("config field 'radius': must be >= 0 (0 selects sqrt(d)/2)");
    } catch (const ConfigError&) {
      throw;
    } catch (const ContractError& e) {
      throw ConfigError(std::string("config [trainer] ") + e.what());
    }
  }
}

// ---- data ------------------------------------------------------------------

namespace {

std::uint64_t mix_seed(std::uint64_t data_seed, std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finaliser over the combined inputs
  std::uint64_t z = data_seed * 0x9E3779B97F4A7C15ull + seed * 0xBF58476D1CE4E5B9ull + stream + 1;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string row_name(const DataSpec& spec, double param) {
  return (spec.source == "ball" ? "rho=" : "v=") + format_double(param);
}

Dataset positives_for(const DataSpec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.source == "sine2d") return gen_sine2d(n, seed);
  if (spec.source == "noisy_sine10d") return gen_noisy_sine(n, seed, spec.dim);
  return gen_ball(n, spec.dim, seed);
}

Dataset negatives_for(const DataSpec& spec, std::size_t n, double param, std::uint64_t seed) {
  if (spec.source == "sine2d") return gen_sine_displaced(n, param, seed);
  if (spec.source == "noisy_sine10d") return gen_noisy_sine_displaced(n, param, seed, spec.dim);
  return gen_sphere_surface(n, spec.dim, param, seed);
}

Dataset apply_mode(const Dataset& ds, NormMode mode) {
  if (mode == NormMode::none) return ds;
  return normalize(ds, mode == NormMode::standard);
}

Tensor2 rows_of(const Dataset& ds, Split s, Label y) { return ds.features.gather_rows(ds.indices(s, y)); }

}  // namespace

PreparedData prepare_data(const DataSpec& spec, std::uint64_t seed) {
  PreparedData out;
  if (spec.source == "csv") {
    Dataset all = load_csv(spec.csv_path, spec.label_column, spec.positive_value);
    all = split(all, spec.split, mix_seed(spec.data_seed, seed, 0));
    all = apply_mode(all, spec.normalize);
    out.norm = all.norm_stats;
    out.train = all.subset(all.indices(Split::train));
    out.test_pos = rows_of(all, Split::test, Label::positive);
    out.test_neg.emplace_back("test", rows_of(all, Split::test, Label::negative));
    out.val_neg = rows_of(all, Split::val, Label::negative);
    if (out.test_pos.rows() == 0 || out.test_neg.front().second.rows() == 0) {
      throw ConfigError("config [data] split: the test split needs rows of both labels");
    }
    return out;
  }

  Dataset train = positives_for(spec, spec.n_train, mix_seed(spec.data_seed, seed, 1));
  if (spec.train_negatives > 0) {
    train = concat(train, negatives_for(spec, spec.train_negatives, spec.train_negative_param,
                                        mix_seed(spec.data_seed, seed, 2)));
  }
  train = apply_mode(train, spec.normalize);
  out.norm = train.norm_stats;
  out.train = std::move(train);

  auto transform = [&](const Dataset& ds) { return out.norm ? apply_norm(ds, *out.norm).features : ds.features; };
  out.test_pos = transform(positives_for(spec, spec.n_test, mix_seed(spec.data_seed, seed, 3)));
  for (std::size_t k = 0; k < spec.eval_params.size(); ++k) {
    const double p = spec.eval_params[k];
    out.test_neg.emplace_back(row_name(spec, p),
                              transform(negatives_for(spec, spec.n_test, p, mix_seed(spec.data_seed, seed, 10 + k))));
  }
  return out;
}

// ---- records ---------------------------------------------------------------

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  for (double v : values) s.stddev += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(s.stddev / n);
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
  return s;
}

void RunRecord::update_aggregate() {
  aggregate.clear();
  if (seeds.empty()) return;
  for (std::size_t k = 0; k < seeds.front().rows.size(); ++k) {
    std::vector<double> auc, f1;
    for (const auto& s : seeds) {
      if (s.rows.size() <= k || s.rows[k].row != seeds.front().rows[k].row) {
        throw ContractError("run record: seeds disagree on evaluation rows");
      }
      auc.push_back(s.rows[k].report.auroc);
      f1.push_back(s.rows[k].report.f1);
    }
    aggregate.push_back({seeds.front().rows[k].row, summarize(auc), summarize(f1)});
  }
}

const RowAggregate* RunRecord::find_row(std::string_view row) const {
  for (const auto& a : aggregate) {
    if (a.row == row) return &a;
  }
  return nullptr;
}

namespace {

void append_summary(KvDocument& doc, const std::string& section, const std::string& metric, const Summary& s) {
  doc.set(section, metric + "_mean", format_double(s.mean));
  doc.set(section, metric + "_std", format_double(s.stddev));
  doc.set(section, metric + "_median", format_double(s.median));
}

Summary read_summary(const KvDocument& doc, const std::string& section, const std::string& metric) {
  auto get = [&](const std::string& key) {
    const std::string* v = doc.find(section, key);
    if (!v) throw std::invalid_argument("run record: missing [" + section + "] " + key);
    return parse_double(*v);
  };
  return {get(metric + "_mean"), get(metric + "_std"), get(metric + "_median")};
}

const std::string& require(const KvDocument& doc, const std::string& section, const std::string& key) {
  const std::string* v = doc.find(section, key);
  if (!v) throw std::invalid_argument("run record: missing [" + section + "] " + key);
  return *v;
}

}  // namespace

std::string RunRecord::to_string() const {
  KvDocument doc;
  doc.set("record", "version", version);
  doc.set("record", "n_seeds", std::to_string(seeds.size()));
  std::string rows;
  for (std::size_t k = 0; k < aggregate.size(); ++k) rows += (k ? ", " : "") + aggregate[k].row;
  doc.set("record", "rows", rows);

  // The config goes under "config.<section>" so the record is one document.
  const KvDocument cfg_doc = config.to_document();
  for (const auto& [section, entries] : cfg_doc.sections()) {
    for (const auto& [k, v] : entries) doc.set("config." + section, k, v);
  }
  for (const auto& a : aggregate) {
    const std::string sec = "aggregate." + a.row;
    append_summary(doc, sec, "auroc", a.auroc);
    append_summary(doc, sec, "f1", a.f1);
  }
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const std::string sec = "seed." + std::to_string(i);
    doc.set(sec, "seed", std::to_string(seeds[i].seed));
    doc.set(sec, "wall_seconds", format_double(seeds[i].wall_seconds));
    for (const auto& r : seeds[i].rows) append_eval(doc, sec + "." + r.row, r.report);
  }
  return doc.to_string();
}

RunRecord RunRecord::parse(std::string_view text) {
  const KvDocument doc = KvDocument::parse(text);
  RunRecord rec;
  rec.version = require(doc, "record", "version");
  KvDocument cfg_doc;
  const std::string prefix = "config.";
  for (const auto& [section, entries] : doc.sections()) {
    if (section.rfind(prefix, 0) != 0) continue;
    for (const auto& [k, v] : entries) cfg_doc.set(section.substr(prefix.size()), k, v);
  }
  rec.config = ExperimentConfig::from_document(cfg_doc);
  const auto rows = split_list(require(doc, "record", "rows"));
  const auto n_seeds = static_cast<std::size_t>(parse_int(require(doc, "record", "n_seeds")));
  for (std::size_t i = 0; i < n_seeds; ++i) {
    const std::string sec = "seed." + std::to_string(i);
    SeedResult s;
    s.seed = static_cast<std::uint64_t>(parse_int(require(doc, sec, "seed")));
    s.wall_seconds = parse_double(require(doc, sec, "wall_seconds"));
    for (const auto& row : rows) s.rows.push_back({row, read_eval(doc, sec + "." + row)});
    rec.seeds.push_back(std::move(s));
  }
  for (const auto& row : rows) {
    const std::string sec = "aggregate." + row;
    rec.aggregate.push_back({row, read_summary(doc, sec, "auroc"), read_summary(doc, sec, "f1")});
  }
  return rec;
}

bool RunRecord::same_results(const RunRecord& other) const {
  auto strip_times = [](RunRecord r) {
    for (auto& s : r.seeds) s.wall_seconds = 0.0;
    return r.to_string();
  };
  return strip_times(*this) == strip_times(other);
}

// ---- files -----------------------------------------------------------------

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    f.flush();
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  if (f.bad()) throw IoError("read failed: " + path.string());
  return ss.str();
}

namespace {

constexpr char kMagic[8] = {'D', 'R', 'O', 'C', 'C', 'M', 'L', 'P'};
constexpr std::uint32_t kSnapshotVersion = 1;

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U u = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  Reader(std::string_view data, const std::filesystem::path& path) : data_(data), path_(path) {}

  template <typename T>
  T get() {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
    if (pos_ + sizeof(U) > data_.size()) throw IoError("model snapshot truncated: " + path_.string());
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      u |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return std::bit_cast<T>(u);
  }

  std::string_view bytes(std::size_t n) {
    if (pos_ + n > data_.size()) throw IoError("model snapshot truncated: " + path_.string());
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool at_end() const { return pos_ == data_.size(); }

 private:
  std::string_view data_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const std::filesystem::path& path, const MlpModel& model) {
  std::string out(kMagic, sizeof kMagic);
  put_le(out, kSnapshotVersion);
  put_le(out, static_cast<std::uint32_t>(model.activation() == Activation::relu ? 0 : 1));
  put_le(out, static_cast<std::uint32_t>(model.layer_dims().size()));
  for (std::size_t d : model.layer_dims()) put_le(out, static_cast<std::uint64_t>(d));
  for (const auto& layer : model.layers()) {
    for (double w : layer.weight.data()) put_le(out, w);
    for (double b : layer.bias) put_le(out, b);
  }
  write_file_atomic(path, out);
}

MlpModel load_model(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  Reader in(data, path);
  if (in.bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) {
    throw IoError("not a model snapshot: " + path.string());
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kSnapshotVersion) {
    throw IoError("unsupported snapshot version " + std::to_string(version) + ": " + path.string());
  }
  const auto act = in.get<std::uint32_t>();
  if (act > 1) throw IoError("bad activation tag in " + path.string());
  const auto n_dims = in.get<std::uint32_t>();
  if (n_dims < 2 || n_dims > 1024) throw IoError("bad layer count in " + path.string());
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < n_dims; ++i) {
    const auto d = in.get<std::uint64_t>();
    if (d == 0 || d > (1u << 24)) throw IoError("bad layer width in " + path.string());
    dims.push_back(static_cast<std::size_t>(d));
  }
  if (dims.back() != 1) throw IoError("snapshot output width must be 1: " + path.string());
  MlpModel m(dims, act == 0 ? Activation::relu : Activation::tanh);
  for (auto& layer : m.layers()) {
    for (double& w : layer.weight.data()) w = in.get<double>();
    for (double& b : layer.bias) b = in.get<double>();
  }
  if (!in.at_end()) throw IoError("trailing bytes in model snapshot: " + path.string());
  return m;
}

// ---- commands --------------------------------------------------------------

namespace {

std::vector<RowResult> evaluate_rows(const PreparedData& data, const EvalOptions& opts,
                                     const std::function<std::vector<double>(const Tensor2&)>& scorer) {
  const auto pos = scorer(data.test_pos);
  std::vector<double> val_neg;
  if (data.val_neg.rows() > 0) val_neg = scorer(data.val_neg);
  std::vector<RowResult> rows;
  for (const auto& [name, neg] : data.test_neg) {
    rows.push_back({name, evaluate(ScoredSet::from(pos, scorer(neg)), opts, val_neg)});
  }
  return rows;
}

}  // namespace

SeedOutput run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  const PreparedData data = prepare_data(cfg.data, seed);
  const Tensor2 positives = data.train.features.gather_rows(data.train.indices(std::nullopt, Label::positive));
  if (positives.rows() == 0) throw ConfigError("config [data]: the training split has no positive rows");

  SeedOutput out;
  out.result.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  std::function<std::vector<double>(const Tensor2&)> scorer;
  if (cfg.method == Method::nn) {
    scorer = [&](const Tensor2& q) { return nn_scores(positives, q); };
  } else {
    Rng init_rng(mix_seed(seed, 0, 0xA11CE));
    MlpModel model = MlpModel::init_uniform(cfg.model.dims(data.train.dim()), cfg.model.activation, init_rng);
    LfConfig tc = cfg.trainer;
    tc.base.seed = seed;
    switch (cfg.method) {
      case Method::drocc: out.model = train(std::move(model), positives, tc.base).model; break;
      case Method::lf: tc.variant = LfVariant::lf; out.model = train_lf(std::move(model), data.train, tc).model; break;
      case Method::oe: out.model = train_oe(std::move(model), data.train, tc).model; break;
      case Method::nn: break;
    }
    scorer = [&](const Tensor2& q) { return score(out.model, q); };
  }
  out.result.rows = evaluate_rows(data, cfg.eval, scorer);
  out.result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

namespace {

std::vector<SeedOutput> run_seeds(const ExperimentConfig& cfg, std::size_t threads) {
  cfg.validate();
  const std::size_t n = cfg.seeds.size();
  std::vector<SeedOutput> outputs(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        outputs[i] = run_seed(cfg, cfg.seeds[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, n);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return outputs;
}

RunRecord record_from(const ExperimentConfig& cfg, const std::vector<SeedOutput>& outputs) {
  RunRecord rec;
  rec.config = cfg;
  for (const auto& o : outputs) rec.seeds.push_back(o.result);
  rec.update_aggregate();
  return rec;
}

}  // namespace

RunRecord run_experiment(const ExperimentConfig& cfg, std::size_t threads) {
  return record_from(cfg, run_seeds(cfg, threads));
}

RunRecord cmd_train(const ExperimentConfig& cfg, std::size_t threads) {
  const auto outputs = run_seeds(cfg, threads);
  RunRecord rec = record_from(cfg, outputs);
  const std::filesystem::path dir(cfg.out_dir);
  write_file_atomic(dir / "config.txt", cfg.to_string());
  if (cfg.method != Method::nn) {
    for (const auto& o : outputs) save_model(dir / ("model_seed" + std::to_string(o.result.seed) + ".bin"), o.model);
  }
  write_file_atomic(dir / "run_record.txt", rec.to_string());
  return rec;
}

std::vector<RowResult> cmd_eval(const std::filesystem::path& model_file, const ExperimentConfig& cfg,
                                std::uint64_t seed) {
  cfg.validate();
  const MlpModel model = load_model(model_file);
  const PreparedData data = prepare_data(cfg.data, seed);
  if (model.input_dim() != data.train.dim()) {
    throw ConfigError("model input dim " + std::to_string(model.input_dim()) + " does not match data dim " +
                      std::to_string(data.train.dim()));
  }
  return evaluate_rows(data, cfg.eval, [&](const Tensor2& q) { return score(model, q); });
}

// ---- suites ----------------------------------------------------------------

namespace {

ExperimentConfig sine_suite() {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.name = "sine_table/drocc";
  return c;
}

ExperimentConfig sphere_suite() {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.name = "sphere_table/drocc";
  c.data.source = "ball";
  c.data.dim = 2;
  c.data.eval_params = {1.2, 1.4, 1.6, 1.8, 2.0};
  c.data.normalize = NormMode::none;
  DroccConfig& b = c.trainer.base;
  b.radius = 0.0;
  b.batch_size = 128;
  b.epochs = 50;
  return c;
}

ExperimentConfig ocln_suite() {
  ExperimentConfig c = ExperimentConfig::defaults();
  c.data.source = "noisy_sine10d";
  c.data.dim = 10;
  c.data.n_train = 1024;
  c.data.train_negatives = 512;
  c.data.train_negative_param = 0.5;
  c.data.eval_params = {0.5};
  DroccConfig& b = c.trainer.base;
  b.radius = std::sqrt(10.0);
  b.batch_size = 32;
  b.epochs = 50;
  c.seeds = {0, 1, 2, 3, 4};
  return c;
}

ExperimentConfig with_method(ExperimentConfig c, Method m, const std::string& name) {
  c.method = m;
  c.name = name;
  return c;
}

}  // namespace

std::vector<ExperimentConfig> suite_configs(std::string_view suite) {
  std::vector<ExperimentConfig> out;
  if (suite == "sine_table") {
    out.push_back(sine_suite());
    out.push_back(with_method(sine_suite(), Method::nn, "sine_table/nn"));
  } else if (suite == "sphere_table") {
    out.push_back(sphere_suite());
    out.push_back(with_method(sphere_suite(), Method::nn, "sphere_table/nn"));
  } else if (suite == "rand_ablation") {
    ExperimentConfig a = sphere_suite();
    a.name = "rand_ablation/ascent";
    ExperimentConfig r = sphere_suite();
    r.name = "rand_ablation/random";
    r.trainer.base.mode = NegativeMode::random;
    out = {a, r};
  } else if (suite == "ocln_synthetic") {
    out.push_back(with_method(ocln_suite(), Method::drocc, "ocln_synthetic/drocc"));
    out.push_back(with_method(ocln_suite(), Method::lf, "ocln_synthetic/lf"));
  } else if (suite == "radius_sweep") {
    const double base = std::sqrt(2.0) / 2.0;
    for (double f : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      ExperimentConfig c = sine_suite();
      c.trainer.base.radius = f * base;
      c.name = "radius_sweep/r=" + format_double(f) + "x";
      out.push_back(c);
    }
  } else if (suite == "mu_sweep") {
    for (double mu : {0.25, 0.5, 1.0, 2.0}) {
      ExperimentConfig c = sine_suite();
      c.trainer.base.mu = mu;
      c.name = "mu_sweep/mu=" + format_double(mu);
      out.push_back(c);
    }
  } else {
    std::string known;
    for (auto s : kSuites) known += (known.empty() ? "" : ", ") + std::string(s);
    throw ConfigError("unknown suite '" + std::string(suite) + "' (expected one of " + known + ")");
  }
  return out;
}

std::vector<RunRecord> cmd_repro(std::string_view suite, const ReproOptions& opts) {
  std::vector<RunRecord> records;
  for (ExperimentConfig cfg : suite_configs(suite)) {
    if (!opts.seeds.empty()) cfg.seeds = opts.seeds;
    if (opts.epochs) cfg.trainer.base.epochs = *opts.epochs;
    if (!opts.out_dir.empty()) cfg.out_dir = (opts.out_dir / cfg.name).string();
    records.push_back(run_experiment(cfg, opts.threads));
    if (!opts.out_dir.empty()) {
      write_file_atomic(std::filesystem::path(cfg.out_dir) / "run_record.txt", records.back().to_string());
    }
  }
  if (!opts.out_dir.empty()) {
    write_file_atomic(opts.out_dir / std::string(suite) / "table.txt", format_table(records));
  }
  return records;
}

std::string format_table(const std::vector<RunRecord>& records) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %-10s %16s %10s %6s\n", "record", "row", "auroc mean+-std", "median",
                "seeds");
  out << line;
  for (const auto& rec : records) {
    for (const auto& a : rec.aggregate) {
      std::snprintf(line, sizeof line, "%-28s %-10s %8.2f +- %5.2f %10.2f %6zu\n", rec.config.name.c_str(),
                    a.row.c_str(), 100 * a.auroc.mean, 100 * a.auroc.stddev, 100 * a.auroc.median,
                    rec.seeds.size());
      out << line;
    }
  }
  return out.str();
}

std::string cmd_boundary_grid(const MlpModel& model, const GridBounds& b, std::size_t resolution) {
  const std::size_t d = model.input_dim();
  if (d != 2 && d != 10) {
    throw ConfigError("boundary grid supports input dim 2 or 10, model has " + std::to_string(d));
  }
  if (resolution < 2) throw ConfigError("boundary grid resolution must be >= 2");
  if (!(b.x_max > b.x_min) || !(b.y_max > b.y_min)) throw ConfigError("boundary grid bounds are empty");
  Tensor2 pts(resolution * resolution, d);
  auto at = [&](double lo, double hi, std::size_t k) {
    return lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(resolution - 1);
  };
  for (std::size_t iy = 0; iy < resolution; ++iy) {
    for (std::size_t ix = 0; ix < resolution; ++ix) {
      pts(iy * resolution + ix, 0) = at(b.x_min, b.x_max, ix);
      pts(iy * resolution + ix, 1) = at(b.y_min, b.y_max, iy);
    }
  }
  const auto s = score(model, pts);
  std::string out = "x1,x2,score\n";
  for (std::size_t i = 0; i < pts.rows(); ++i) {
    out += format_double(pts(i, 0)) + ',' + format_double(pts(i, 1)) + ',' + format_double(s[i]) + '\n';
  }
  return out;
}

std::size_t threads_from_env() {
  const char* v = std::getenv("DROCC_THREADS");
  if (!v || !*v) return 1;
  try {
    const long long n = parse_int(v);
    return n >= 1 ? static_cast<std::size_t>(n) : 1;
  } catch (const std::invalid_argument&) {
    return 1;
  }
}

}  // namespace drocc
