#include "toothseg/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "toothseg/mesh_io.hpp"

namespace toothseg {

namespace fs = std::filesystem;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

// A raw value plus where it came from, converted on demand by the key's setter.
struct Value {
  std::string key;
  std::string text;
  std::size_t line;

  [[noreturn]] void fail(const std::string& expected) const {
    throw ConfigError("line " + std::to_string(line) + ": " + key + " = " + text + ": expected " + expected);
  }

  double as_double() const {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) fail("a number");
    return v;
  }

  std::int64_t as_int() const {
    std::int64_t v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) fail("an integer");
    return v;
  }

  std::uint64_t as_u64() const {
    std::uint64_t v = 0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) fail("a non-negative integer");
    return v;
  }

  int as_positive_int() const {
    const auto v = as_int();
    if (v < 1 || v > std::numeric_limits<int>::max()) fail("a positive integer");
    return static_cast<int>(v);
  }

  bool as_bool() const {
    if (text == "true") return true;
    if (text == "false") return false;
    fail("true or false");
  }

  std::string as_string() const {
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') {
      std::string out;
      for (std::size_t i = 1; i + 1 < text.size(); ++i) {
        if (text[i] == '\\' && i + 2 < text.size()) ++i;
        out += text[i];
      }
      return out;
    }
    if (text.empty() || text.front() == '[') fail("a string");
    return text;
  }

  std::pair<double, double> as_pair() const {
    std::string_view body = text;
    if (body.size() >= 2 && body.front() == '[' && body.back() == ']') body = body.substr(1, body.size() - 2);
    else if (body.size() >= 2 && body.front() == '"' && body.back() == '"') body = body.substr(1, body.size() - 2);
    const auto comma = body.find(',');
    if (comma == std::string_view::npos) fail("two numbers such as [0.9, 1.1]");
    Value a{key, std::string(trim(body.substr(0, comma))), line};
    Value b{key, std::string(trim(body.substr(comma + 1))), line};
    try {
      return {a.as_double(), b.as_double()};
    } catch (const ConfigError&) {
      fail("two numbers such as [0.9, 1.1]");
    }
  }
};

std::string strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) quoted = !quoted;
    if (line[i] == '#' && !quoted) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  // Keep a decimal point so the value reads back as a float.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const fs::path& p) {
  std::string out = "\"";
  for (char c : p.generic_string()) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

}  // namespace

RunConfig parse_run_config(std::string_view text, const fs::path& base_dir) {
  RunConfig cfg;
  auto path = [&base_dir](const Value& v) {
    fs::path p = v.as_string();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return p.lexically_normal();
  };

  TrainConfig& t = cfg.train;
  const std::map<std::string, std::function<void(const Value&)>> setters = {
      {"out_dir", [&](const Value& v) { cfg.out_dir = path(v); }},
      {"data.labeled_dir", [&](const Value& v) { cfg.labeled_dir = path(v); }},
      {"data.unlabeled_dir", [&](const Value& v) { cfg.unlabeled_dir = path(v); }},
      {"data.test_dir", [&](const Value& v) { cfg.test_dir = path(v); }},
      {"data.cluster_cache", [&](const Value& v) { cfg.cluster_cache = path(v); }},
      {"train.epochs", [&](const Value& v) { t.epochs = v.as_positive_int(); }},
      {"train.augment", [&](const Value& v) { t.augment = v.as_bool(); }},
      {"model.hidden", [&](const Value& v) { t.model.hidden = v.as_positive_int(); }},
      {"model.classes", [&](const Value& v) { t.model.classes = v.as_positive_int(); }},
      {"model.embed", [&](const Value& v) { t.model.embed = v.as_positive_int(); }},
      {"optim.learning_rate", [&](const Value& v) { t.learning_rate = v.as_double(); }},
      {"optim.beta1", [&](const Value& v) { t.beta1 = v.as_double(); }},
      {"optim.beta2", [&](const Value& v) { t.beta2 = v.as_double(); }},
      {"optim.epsilon", [&](const Value& v) { t.adam_epsilon = v.as_double(); }},
      {"loss.lambda", [&](const Value& v) { t.loss.lambda = v.as_double(); }},
      {"loss.margin", [&](const Value& v) { t.loss.margin = v.as_double(); }},
      {"loss.pairs_per_step", [&](const Value& v) { t.loss.pairs_per_step = static_cast<std::size_t>(v.as_positive_int()); }},
      {"loss.dice_epsilon", [&](const Value& v) { t.loss.dice_epsilon = v.as_double(); }},
      {"augment.rotation_max_rad", [&](const Value& v) { t.augment_ranges.rotation_max_rad = v.as_double(); }},
      {"augment.translation_max", [&](const Value& v) { t.augment_ranges.translation_max = v.as_double(); }},
      {"augment.scale_range",
       [&](const Value& v) { std::tie(t.augment_ranges.scale_min, t.augment_ranges.scale_max) = v.as_pair(); }},
      {"spectral.k", [&](const Value& v) { t.spectral.k = v.as_positive_int(); }},
      {"spectral.delta", [&](const Value& v) { t.spectral.delta = v.as_double(); }},
      {"spectral.eta", [&](const Value& v) { t.spectral.eta = v.as_double(); }},
      {"spectral.embed_dims", [&](const Value& v) { t.spectral.embed_dims = v.as_positive_int(); }},
      {"decimate.target_faces", [&](const Value& v) { t.decimate_target = static_cast<std::size_t>(v.as_positive_int()); }},
      {"seeds.model", [&](const Value& v) { t.seeds.model = v.as_u64(); }},
      {"seeds.order", [&](const Value& v) { t.seeds.order = v.as_u64(); }},
      {"seeds.augment", [&](const Value& v) { t.seeds.augment = v.as_u64(); }},
      {"seeds.pairs", [&](const Value& v) { t.loss.seed = v.as_u64(); }},
      {"seeds.kmeans", [&](const Value& v) { t.spectral.seed = v.as_u64(); }},
  };

  std::set<std::string> seen;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string stripped = strip_comment(raw);
    const std::string_view line = trim(stripped);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '" + std::string(line) + "'");
    }
    const std::string name = std::string(trim(line.substr(0, eq)));
    const std::string key = section.empty() ? name : section + "." + name;
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": '" + key + "' is set twice");
    }
    it->second(Value{key, std::string(trim(line.substr(eq + 1))), line_no});
  }

  if (cfg.labeled_dir.empty()) throw ConfigError("data.labeled_dir is required");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir is required");
  cfg.train.validate();
  cfg.train.spectral.validate(kMaxSpectralFaces);
  return cfg;
}

RunConfig load_run_config(const fs::path& file) {
  std::string text;
  try {
    text = read_file(file);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  try {
    return parse_run_config(text, file.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

std::string format_run_config(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  std::ostringstream out;
  out << "out_dir = " << quote(cfg.out_dir) << "\n\n[data]\n";
  out << "labeled_dir = " << quote(cfg.labeled_dir) << "\n";
  if (cfg.unlabeled_dir) out << "unlabeled_dir = " << quote(*cfg.unlabeled_dir) << "\n";
  if (cfg.test_dir) out << "test_dir = " << quote(*cfg.test_dir) << "\n";
  out << "cluster_cache = " << quote(cfg.cache_dir()) << "\n";
  out << "\n[train]\nepochs = " << t.epochs << "\naugment = " << (t.augment ? "true" : "false") << "\n";
  out << "\n[model]\nhidden = " << t.model.hidden << "\nclasses = " << t.model.classes
      << "\nembed = " << t.model.embed << "\n";
  out << "\n[optim]\nlearning_rate = " << fmt_double(t.learning_rate) << "\nbeta1 = " << fmt_double(t.beta1)
      << "\nbeta2 = " << fmt_double(t.beta2) << "\nepsilon = " << fmt_double(t.adam_epsilon) << "\n";
  out << "\n[loss]\nlambda = " << fmt_double(t.loss.lambda) << "\nmargin = " << fmt_double(t.loss.margin)
      << "\npairs_per_step = " << t.loss.pairs_per_step << "\ndice_epsilon = " << fmt_double(t.loss.dice_epsilon)
      << "\n";
  out << "\n[augment]\nrotation_max_rad = " << fmt_double(t.augment_ranges.rotation_max_rad)
      << "\ntranslation_max = " << fmt_double(t.augment_ranges.translation_max) << "\nscale_range = ["
      << fmt_double(t.augment_ranges.scale_min) << ", " << fmt_double(t.augment_ranges.scale_max) << "]\n";
  out << "\n[spectral]\nk = " << t.spectral.k << "\ndelta = " << fmt_double(t.spectral.delta)
      << "\neta = " << fmt_double(t.spectral.eta) << "\nembed_dims = " << t.spectral.effective_embed_dims() << "\n";
  out << "\n[decimate]\ntarget_faces = " << t.decimate_target << "\n";
  out << "\n[seeds]\nmodel = " << t.seeds.model << "\norder = " << t.seeds.order << "\naugment = " << t.seeds.augment
      << "\npairs = " << t.loss.seed << "\nkmeans = " << t.spectral.seed << "\n";
  return out.str();
}

}  // namespace toothseg
