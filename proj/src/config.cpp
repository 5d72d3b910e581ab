#include "mmssl/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "mmssl/error.hpp"

namespace mmssl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::InvalidConfig,
              "key '" + key + "': cannot parse '" + value + "' as " + expected);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw 0;
    return d;
  } catch (...) {
    bad_value(key, v, "a finite number");
  }
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') throw 0;
    const unsigned long long u = std::stoull(v, &used);
    if (used != v.size()) throw 0;
    return u;
  } catch (...) {
    bad_value(key, v, "a non-negative integer");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::string fmt(double v) { return format_double(v); }

std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(std::uint64_t v) { return std::to_string(v); }

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define MMSSL_DOUBLE(name, field)                                                        \
  Entry {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.field = to_double(name, v); },     \
        [](const RunConfig& c) { return fmt(static_cast<double>(c.field)); }            \
  }
#define MMSSL_SIZE(name, field)                                                          \
  Entry {                                                                                \
    name,                                                                                \
        [](RunConfig& c, const std::string& v) {                                         \
          c.field = static_cast<decltype(c.field)>(to_u64(name, v));                     \
        },                                                                               \
        [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.field)); }     \
  }
#define MMSSL_BOOL(name, field)                                                          \
  Entry {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.field = to_bool(name, v); },       \
        [](const RunConfig& c) { return fmt(c.field); }                                  \
  }
#define MMSSL_STRING(name, field)                                                        \
  Entry {                                                                                \
    name, [](RunConfig& c, const std::string& v) { c.field = v; },                       \
        [](const RunConfig& c) { return c.field; }                                       \
  }

const std::vector<Entry>& registry() {
  static const std::vector<Entry> entries = {
      Entry{"seed",
            [](RunConfig& c, const std::string& v) {
              if (v.empty()) c.seed.reset();
              else c.seed = to_u64("seed", v);
            },
            [](const RunConfig& c) { return c.seed ? fmt(*c.seed) : std::string(); }},
      MMSSL_STRING("dataset", dataset),
      MMSSL_STRING("query_dataset", query_dataset),
      MMSSL_STRING("model", model),
      MMSSL_STRING("out", out),
      MMSSL_BOOL("binary", binary),
      MMSSL_SIZE("data_seed", data_seed),
      MMSSL_SIZE("n_classes", synthetic.n_classes),
      MMSSL_SIZE("patients_per_class", synthetic.patients_per_class),
      Entry{"image_size",
            [](RunConfig& c, const std::string& v) {
              c.synthetic.height = c.synthetic.width = static_cast<std::size_t>(to_u64("image_size", v));
            },
            [](const RunConfig& c) { return fmt(static_cast<std::uint64_t>(c.synthetic.height)); }},
      MMSSL_SIZE("class_pattern_seed", synthetic.class_pattern_seed),
      MMSSL_DOUBLE("class_contrast", synthetic.class_contrast),
      MMSSL_DOUBLE("within_class_noise_sigma", synthetic.within_class_noise_sigma),
      MMSSL_DOUBLE("modality_noise_sigma", synthetic.modality_noise_sigma),
      MMSSL_DOUBLE("noise_correlation_length", synthetic.noise_correlation_length),
      MMSSL_DOUBLE("eye_flip_prob", synthetic.eye_flip_prob),
      MMSSL_DOUBLE("illumination_min", synthetic.illumination_min),
      MMSSL_DOUBLE("illumination_max", synthetic.illumination_max),
      MMSSL_DOUBLE("brightness_offset", synthetic.brightness_offset),
      Entry{"encoder_dims",
            [](RunConfig& c, const std::string& v) { c.encoder_dims = parse_dims(v); },
            [](const RunConfig& c) { return format_dims(c.encoder_dims); }},
      MMSSL_DOUBLE("tau", loss.tau),
      MMSSL_DOUBLE("margin", loss.margin),
      MMSSL_BOOL("use_transform_term", loss.use_transform_term),
      MMSSL_BOOL("use_modality_term", loss.use_modality_term),
      MMSSL_BOOL("use_negative_terms", loss.use_negative_terms),
      Entry{"mode", [](RunConfig& c, const std::string& v) { c.mode = parse_loss_mode(v); },
            [](const RunConfig& c) { return std::string(loss_mode_name(c.mode)); }},
      MMSSL_SIZE("batch_patients", batch_patients),
      MMSSL_SIZE("epochs", epochs),
      MMSSL_SIZE("batches_per_epoch", batches_per_epoch),
      MMSSL_DOUBLE("lr", adam.base_lr),
      MMSSL_DOUBLE("beta1", adam.beta1),
      MMSSL_DOUBLE("beta2", adam.beta2),
      MMSSL_DOUBLE("adam_eps", adam.eps),
      MMSSL_DOUBLE("lr_decay_factor", adam.decay_factor),
      MMSSL_SIZE("lr_decay_every", adam.decay_every),
      MMSSL_DOUBLE("crop_scale_min", augment.crop_scale_min),
      MMSSL_DOUBLE("crop_scale_max", augment.crop_scale_max),
      MMSSL_DOUBLE("flip_prob", augment.flip_prob),
      MMSSL_DOUBLE("grayscale_prob", augment.grayscale_prob),
      MMSSL_DOUBLE("jitter_min", augment.jitter_min),
      MMSSL_DOUBLE("jitter_max", augment.jitter_max),
      MMSSL_SIZE("knn_k", knn.k),
      Entry{"knn_vote", [](RunConfig& c, const std::string& v) { c.knn.vote = parse_knn_vote(v); },
            [](const RunConfig& c) { return std::string(knn_vote_name(c.knn.vote)); }},
      MMSSL_DOUBLE("knn_weight_tau", knn.weight_tau),
      MMSSL_SIZE("folds", folds),
      MMSSL_SIZE("eval_fold", eval_fold),
      MMSSL_SIZE("probe_epochs", probe.epochs),
      MMSSL_DOUBLE("probe_lr", probe.lr),
  };
  return entries;
}

#undef MMSSL_DOUBLE
#undef MMSSL_SIZE
#undef MMSSL_BOOL
#undef MMSSL_STRING

const Entry& find_entry(const std::string& key) {
  for (const auto& e : registry())
    if (e.key == key) return e;
  throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& e : registry()) out.push_back(e.key);
    return out;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  find_entry(trim(key)).set(*this, trim(value));
}

std::string RunConfig::get(const std::string& key) const { return find_entry(key).get(*this); }

void RunConfig::parse_text(const std::string& text, const std::string& origin) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig,
                  origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::InvalidConfig, origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::IoError, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  parse_text(ss.str(), path);
}

std::string RunConfig::dump() const {
  std::string out;
  for (const auto& e : registry()) out += e.key + " = " + e.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  loss.validate();
  adam.validate();
  augment.validate();
  if (dataset.empty()) synthetic.validate();
  if (encoder_dims.size() < 2 || encoder_dims.back() < 2) {
    throw Error(ErrorCode::InvalidConfig, "encoder_dims needs an input size and an embedding size >= 2");
  }
  if (dataset.empty() && encoder_dims.front() != synthetic.height * synthetic.width) {
    throw Error(ErrorCode::InvalidConfig,
                "encoder input " + std::to_string(encoder_dims.front()) + " does not match image_size^2 = " +
                    std::to_string(synthetic.height * synthetic.width));
  }
  if (batch_patients == 0) throw Error(ErrorCode::InvalidConfig, "batch_patients must be >= 1");
  if (knn.k == 0) throw Error(ErrorCode::InvalidConfig, "knn_k must be >= 1");
  if (!(knn.weight_tau > 0.0)) throw Error(ErrorCode::InvalidConfig, "knn_weight_tau must be positive");
  if (folds < 2) throw Error(ErrorCode::InvalidConfig, "folds must be >= 2");
  if (eval_fold >= folds) throw Error(ErrorCode::InvalidConfig, "eval_fold must be below folds");
}

std::uint64_t RunConfig::require_seed() const {
  if (!seed) throw Error(ErrorCode::InvalidConfig, "a seed is required (--seed N or 'seed = N')");
  return *seed;
}

}  // namespace mmssl
