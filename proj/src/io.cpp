#include "firth/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <system_error>

#include "firth/error.hpp"
#include "firth/rng.hpp"

namespace firth {

namespace fs = std::filesystem;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + k])) << (8 * k);
  }
  return v;
}

std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xFFFFFFFFu) throw InvalidInput(std::string(what) + " does not fit the file format");
  return static_cast<std::uint32_t>(v);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  if (s.empty()) return false;
  if constexpr (std::is_unsigned_v<T>) {
    if (s.front() == '-' || s.front() == '+') return false;
  }
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

// Shortest text that reads back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

// ---------------------------------------------------------------- features

std::string features_binary(const FeatureSet& set) {
  const std::size_t n = set.size();
  const std::size_t d = set.dim();
  std::string out;
  out.reserve(kFeatureHeaderBytes + 4 * n + 4 * n * d);
  out.append("FSF1", 4);
  put_u32(out, kFeatureFormatVersion);
  put_u32(out, checked_u32(n, "row count"));
  put_u32(out, checked_u32(d, "dimension"));
  put_u32(out, checked_u32(set.num_classes(), "class count"));
  for (auto label : set.labels()) put_u32(out, label);
  for (double v : set.features().values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

FeatureSet parse_features_binary(std::string_view bytes) {
  if (bytes.size() < kFeatureHeaderBytes) {
    throw FormatError("truncated header: expected " + std::to_string(kFeatureHeaderBytes) +
                      " bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes.substr(0, 4) != "FSF1") throw FormatError("bad magic at byte offset 0");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFeatureFormatVersion) {
    throw FormatError("unsupported version " + std::to_string(version) + " at byte offset 4");
  }
  const std::uint32_t rows = get_u32(bytes, 8);
  const std::uint32_t dim = get_u32(bytes, 12);
  const std::uint32_t classes = get_u32(bytes, 16);
  if (rows == 0) throw FormatError("row count must be >= 1 (byte offset 8)");
  if (dim == 0) throw FormatError("dimension must be >= 1 (byte offset 12)");
  if (classes == 0) throw FormatError("class count must be >= 1 (byte offset 16)");
  const std::uint64_t expected = kFeatureHeaderBytes + 4ull * rows + 4ull * rows * dim;
  if (bytes.size() != expected) {
    throw FormatError("payload size mismatch: expected " + std::to_string(expected) +
                      " bytes, got " + std::to_string(bytes.size()));
  }
  std::vector<std::uint32_t> labels(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t offset = kFeatureHeaderBytes + 4 * i;
    labels[i] = get_u32(bytes, offset);
    if (labels[i] >= classes) {
      throw FormatError("label " + std::to_string(labels[i]) + " >= class count " +
                        std::to_string(classes) + " at byte offset " + std::to_string(offset));
    }
  }
  Matrix x(rows, dim);
  auto values = x.values();
  const std::size_t base = kFeatureHeaderBytes + 4 * std::size_t{rows};
  for (std::size_t k = 0; k < values.size(); ++k) {
    const float f = std::bit_cast<float>(get_u32(bytes, base + 4 * k));
    if (!std::isfinite(f)) {
      throw FormatError("non-finite feature at byte offset " + std::to_string(base + 4 * k));
    }
    values[k] = f;
  }
  return FeatureSet(std::move(x), std::move(labels), classes);
}

std::string features_csv(const FeatureSet& set) {
  std::string out = "# classes=" + std::to_string(set.num_classes()) + "\nlabel";
  for (std::size_t a = 0; a < set.dim(); ++a) out += ",f" + std::to_string(a);
  out += '\n';
  char buf[32];
  for (std::size_t i = 0; i < set.size(); ++i) {
    out += std::to_string(set.label(i));
    for (double v : set.row(i)) {
      // 9 significant digits round-trip any float32 exactly.
      std::snprintf(buf, sizeof buf, ",%.9g", static_cast<double>(static_cast<float>(v)));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

FeatureSet parse_features_csv(std::string_view text) {
  std::optional<std::size_t> declared;
  std::optional<std::size_t> dim;
  std::vector<std::uint32_t> labels;
  std::vector<double> values;
  std::vector<std::size_t> label_lines;
  bool header_seen = false;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    auto fail = [&](const std::string& msg) {
      throw FormatError("line " + std::to_string(line_no) + ": " + msg);
    };
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '#') {
      const std::string body = trim(std::string_view(line).substr(1));
      if (body.rfind("classes=", 0) == 0) {
        std::size_t k = 0;
        if (!parse_number(std::string_view(body).substr(8), k) || k == 0) {
          fail("malformed class count '" + body + "'");
        }
        declared = k;
      }
      continue;
    }
    const auto fields = split(line, ',');
    if (!header_seen) {
      header_seen = true;
      if (fields.front() == "label") {
        if (fields.size() < 2) fail("header has no feature columns");
        dim = fields.size() - 1;
        continue;
      }
    }
    if (fields.size() < 2) fail("expected a label and at least one feature");
    if (!dim) dim = fields.size() - 1;
    if (fields.size() - 1 != *dim) {
      fail("expected " + std::to_string(*dim) + " features, got " +
           std::to_string(fields.size() - 1));
    }
    std::uint32_t label = 0;
    if (!parse_number(std::string_view(fields[0]), label)) fail("malformed label '" + fields[0] + "'");
    if (declared && label >= *declared) {
      fail("label " + std::to_string(label) + " >= declared class count " +
           std::to_string(*declared));
    }
    labels.push_back(label);
    label_lines.push_back(line_no);
    for (std::size_t a = 1; a < fields.size(); ++a) {
      double v = 0.0;
      if (!parse_number(std::string_view(fields[a]), v) || !std::isfinite(v)) {
        fail("malformed feature '" + fields[a] + "' in column " + std::to_string(a));
      }
      values.push_back(static_cast<float>(v));
    }
  }
  if (labels.empty()) throw FormatError("no data rows");
  const std::size_t classes =
      declared ? *declared : static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  const std::size_t rows = labels.size();
  return FeatureSet(Matrix(rows, *dim, std::move(values)), std::move(labels), classes);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path.string());
  return std::move(ss).str();
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  const fs::path parent = path.has_parent_path() ? path.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(parent, ec)) {
    throw IoError("directory " + parent.string() + " does not exist (writing " + path.string() + ")");
  }
  std::random_device rd;
  const fs::path tmp = path.string() + ".tmp" + std::to_string(rd());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      fs::remove(tmp, ec);
      throw IoError("write failed: " + path.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    fs::remove(tmp, ignored);
    throw IoError("cannot rename into " + path.string() + ": " + ec.message());
  }
}

FeatureSet read_features(const fs::path& path) {
  const std::string bytes = read_file(path);
  try {
    if (path.extension() == ".csv") return parse_features_csv(bytes);
    return parse_features_binary(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_features(const FeatureSet& set, const fs::path& path) {
  write_file_atomic(path, path.extension() == ".csv" ? features_csv(set) : features_binary(set));
}

// ------------------------------------------------------------------ config

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) {
    double v = 0.0;
    if (!parse_number(std::string_view(item), v) || !std::isfinite(v)) {
      throw ConfigError("malformed number '" + item + "' in list");
    }
    out.push_back(v);
  }
  return out;
}

void ExperimentConfig::sync() {
  episode.seed = derive_seed(seed, "episodes");
  train.seed = derive_seed(seed, "train");
  sweep.spec = episode;
  sweep.train = train;
  sweep.trial_options = TrialOptions{arch, workers};
}

FeatureSet load_source(const ExperimentConfig& config, SourceSplit split) {
  const SourceConfig& s = config.source;
  if (s.synthetic()) {
    // Validation and novel classes come from independent generators, so
    // they share no class means.
    const std::uint64_t seed =
        derive_seed(config.seed, split == SourceSplit::validation ? "synth-val" : "synth-novel");
    return synth_features(s.synth_classes, s.synth_dim, s.synth_per_class, s.synth_separation, seed);
  }
  return read_features(split == SourceSplit::validation ? s.val_path : s.novel_path);
}

void ExperimentConfig::validate() const {
  episode.validate();
  train.validate();
  if (arms.empty()) throw ConfigError("arms: need at least one arm");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (sweep.grid.empty()) throw ConfigError("sweep grid must not be empty");
  for (double l : sweep.grid)
    if (!(l >= 0.0)) throw ConfigError("sweep grid values must be >= 0");
  if (sweep.kind == PenaltyKind::none) throw ConfigError("sweep kind must name a penalty");
  if (sweep.val_trials < 1 || sweep.novel_trials < 2) {
    throw ConfigError("sweep needs val_trials >= 1 and novel_trials >= 2");
  }
  if (source.val_path.empty() != source.novel_path.empty()) {
    throw ConfigError("source: set both val and novel, or neither for synthetic data");
  }
  if (source.synthetic()) {
    if (source.synth_classes < 1 || source.synth_dim < 1 || source.synth_per_class < 1) {
      throw ConfigError("source: synthetic sizes must be >= 1");
    }
    if (!(source.synth_separation >= 0.0)) throw ConfigError("source: separation must be >= 0");
  }
}

namespace {

struct Pending {
  std::optional<std::size_t> ways;
  std::optional<std::size_t> shots;
  std::optional<ImbalanceScheme> imbalance;
  std::optional<double> heldout;
  std::optional<std::size_t> query;
  bool grid_set = false;
};

}  // namespace

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig cfg;
  Pending pending;
  std::size_t line_no = 0;
  std::string section;

  using Handler = std::function<void(const std::string&)>;
  const std::map<std::string, std::map<std::string, Handler>> table = [&] {
    auto as_size = [](std::size_t& dst) {
      return Handler([&dst](const std::string& v) {
        if (!parse_number(std::string_view(v), dst)) throw ConfigError("expected a non-negative integer");
      });
    };
    auto as_opt_size = [](std::optional<std::size_t>& dst) {
      return Handler([&dst](const std::string& v) {
        std::size_t x = 0;
        if (!parse_number(std::string_view(v), x)) throw ConfigError("expected a non-negative integer");
        dst = x;
      });
    };
    auto as_double = [](double& dst) {
      return Handler([&dst](const std::string& v) {
        if (!parse_number(std::string_view(v), dst) || !std::isfinite(dst)) {
          throw ConfigError("expected a number");
        }
      });
    };
    auto as_bool = [](bool& dst) {
      return Handler([&dst](const std::string& v) {
        if (v == "true" || v == "1" || v == "yes") dst = true;
        else if (v == "false" || v == "0" || v == "no") dst = false;
        else throw ConfigError("expected true or false");
      });
    };
    auto as_string = [](std::string& dst) { return Handler([&dst](const std::string& v) { dst = v; }); };

    std::map<std::string, std::map<std::string, Handler>> t;
    t["run"]["seed"] = [&](const std::string& v) {
      if (!parse_number(std::string_view(v), cfg.seed)) throw ConfigError("expected a 64-bit unsigned seed");
    };
    t["run"]["workers"] = as_size(cfg.workers);
    t["run"]["trials"] = as_size(cfg.trials);

    t["source"]["val"] = as_string(cfg.source.val_path);
    t["source"]["novel"] = as_string(cfg.source.novel_path);
    t["source"]["synth_classes"] = as_size(cfg.source.synth_classes);
    t["source"]["synth_dim"] = as_size(cfg.source.synth_dim);
    t["source"]["synth_per_class"] = as_size(cfg.source.synth_per_class);
    t["source"]["synth_separation"] = as_double(cfg.source.synth_separation);

    t["episode"]["ways"] = as_opt_size(pending.ways);
    t["episode"]["shots"] = as_opt_size(pending.shots);
    t["episode"]["imbalance"] = [&](const std::string& v) { pending.imbalance = parse_imbalance_scheme(v); };
    t["episode"]["heldout_fraction"] = [&](const std::string& v) {
      double x = 0.0;
      if (!parse_number(std::string_view(v), x)) throw ConfigError("expected a number");
      pending.heldout = x;
    };
    t["episode"]["query_per_class"] = as_opt_size(pending.query);
    t["episode"]["fixed_classes"] = [&](const std::string& v) {
      cfg.episode.fixed_classes.clear();
      if (v.empty()) return;
      for (const auto& item : split(v, ',')) {
        std::uint32_t c = 0;
        if (!parse_number(std::string_view(item), c)) throw ConfigError("malformed class index '" + item + "'");
        cfg.episode.fixed_classes.push_back(c);
      }
    };

    t["train"]["arch"] = [&](const std::string& v) { cfg.arch = parse_arch(v); };
    t["train"]["learning_rate"] = as_double(cfg.train.learning_rate);
    t["train"]["batch_size"] = as_size(cfg.train.batch_size);
    t["train"]["epochs"] = as_size(cfg.train.epochs);
    t["train"]["shuffle"] = as_bool(cfg.train.shuffle);
    t["train"]["intercept"] = as_bool(cfg.train.intercept);
    t["train"]["cosine_scale"] = as_double(cfg.train.cosine_scale);
    t["train"]["hidden1"] = as_size(cfg.train.hidden1);
    t["train"]["hidden2"] = as_size(cfg.train.hidden2);

    t["arms"]["list"] = [&](const std::string& v) {
      cfg.arms.clear();
      for (const auto& item : split(v, ',')) cfg.arms.push_back(parse_arm(item));
    };

    t["sweep"]["kind"] = [&](const std::string& v) {
      cfg.sweep.kind = parse_penalty_kind(v);
      cfg.sweep.prior_from_support = cfg.sweep.kind == PenaltyKind::kl_prior;
    };
    t["sweep"]["grid"] = [&](const std::string& v) {
      cfg.sweep.grid = parse_double_list(v);
      pending.grid_set = true;
    };
    t["sweep"]["val_trials"] = as_size(cfg.sweep.val_trials);
    t["sweep"]["novel_trials"] = as_size(cfg.sweep.novel_trials);

    t["output"]["path"] = as_string(cfg.output);
    return t;
  }();

  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view raw = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    const auto hash = raw.find_first_of("#;");
    const std::string line = trim(raw.substr(0, hash));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!table.count(section)) throw ConfigError(where + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const std::string qualified = section.empty() ? key : section + "." + key;
    if (section.empty()) throw ConfigError(where + ": key '" + key + "' outside any section");
    const auto& keys = table.at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + ": unknown key '" + qualified + "'");
    try {
      it->second(value);
    } catch (const Error& e) {
      throw ConfigError(where + ": key '" + qualified + "': " + e.what());
    }
  }

  // Episode shape is assembled once every key is known.
  if (pending.shots && pending.imbalance) {
    throw ConfigError("episode: 'shots' and 'imbalance' are mutually exclusive");
  }
  if (pending.heldout && pending.query) {
    throw ConfigError("episode: 'heldout_fraction' and 'query_per_class' are mutually exclusive");
  }
  const std::size_t ways = pending.ways.value_or(kDefaultWays);
  cfg.episode.ways = ways;
  cfg.imbalance = pending.imbalance;
  cfg.episode.counts = pending.imbalance ? imbalanced_counts(*pending.imbalance)
                                         : std::vector<std::size_t>(ways, pending.shots.value_or(1));
  if (pending.query) {
    cfg.episode.heldout_fraction.reset();
    cfg.episode.query_per_class = pending.query;
  } else {
    cfg.episode.heldout_fraction = pending.heldout.value_or(kDefaultHeldoutFraction);
  }
  if (!pending.grid_set) {
    cfg.sweep.grid = cfg.sweep.kind == PenaltyKind::l2_mean_squared ? kDefaultL2Grid : kDefaultFirthGrid;
  }
  cfg.sync();

  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string echo_config(const ExperimentConfig& c, std::string_view prefix) {
  std::ostringstream o;
  const std::string p(prefix);
  auto kv = [&](std::string_view key, const std::string& value) { o << p << key << " = " << value << '\n'; };
  auto list = [](const auto& values, auto fmt) {
    std::string s;
    for (std::size_t k = 0; k < values.size(); ++k) s += (k ? "," : "") + fmt(values[k]);
    return s;
  };
  o << p << "# " << kVersionString << '\n';
  o << p << "[run]\n";
  kv("seed", std::to_string(c.seed));
  kv("workers", std::to_string(c.workers));
  kv("trials", std::to_string(c.trials));
  o << p << "[source]\n";
  if (c.source.synthetic()) {
    kv("synth_classes", std::to_string(c.source.synth_classes));
    kv("synth_dim", std::to_string(c.source.synth_dim));
    kv("synth_per_class", std::to_string(c.source.synth_per_class));
    kv("synth_separation", format_double(c.source.synth_separation));
  } else {
    kv("val", c.source.val_path);
    kv("novel", c.source.novel_path);
  }
  o << p << "[episode]\n";
  kv("ways", std::to_string(c.episode.ways));
  if (c.imbalance) {
    kv("imbalance", *c.imbalance == ImbalanceScheme::avg7_5 ? "avg7_5" : "avg15");
  } else {
    kv("shots", std::to_string(c.episode.counts.empty() ? 1 : c.episode.counts.front()));
  }
  if (c.episode.query_per_class) kv("query_per_class", std::to_string(*c.episode.query_per_class));
  else kv("heldout_fraction", format_double(c.episode.heldout_fraction.value_or(kDefaultHeldoutFraction)));
  if (!c.episode.fixed_classes.empty()) {
    kv("fixed_classes", list(c.episode.fixed_classes, [](std::uint32_t v) { return std::to_string(v); }));
  }
  o << p << "[train]\n";
  kv("arch", std::string(to_string(c.arch)));
  kv("learning_rate", format_double(c.train.learning_rate));
  kv("batch_size", std::to_string(c.train.batch_size));
  kv("epochs", std::to_string(c.train.effective_epochs(c.arch)));
  kv("shuffle", c.train.shuffle ? "true" : "false");
  kv("intercept", c.train.intercept ? "true" : "false");
  kv("cosine_scale", format_double(c.train.cosine_scale));
  kv("hidden1", std::to_string(c.train.hidden1));
  kv("hidden2", std::to_string(c.train.hidden2));
  o << p << "[arms]\n";
  kv("list", list(c.arms, [](const Arm& a) { return a.label; }));
  o << p << "[sweep]\n";
  kv("kind", std::string(to_string(c.sweep.kind)));
  kv("grid", list(c.sweep.grid, format_double));
  kv("val_trials", std::to_string(c.sweep.val_trials));
  kv("novel_trials", std::to_string(c.sweep.novel_trials));
  if (!c.output.empty()) {
    o << p << "[output]\n";
    kv("path", c.output);
  }
  return std::move(o).str();
}

}  // namespace firth
