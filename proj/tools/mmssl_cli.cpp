#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mmssl/mmssl.h"

namespace {

constexpr int kExitUsage = 1;

struct ConfigDeleter {
  void operator()(mmssl_config* c) const { mmssl_config_free(c); }
};
using ConfigPtr = std::unique_ptr<mmssl_config, ConfigDeleter>;

struct CliError {
  int code;
  std::string message;
};

void check(mmssl_status status) {
  if (status != MMSSL_OK) throw CliError{status, mmssl_last_error()};
}

std::string take(char* s) {
  std::string out = s == nullptr ? "" : s;
  mmssl_string_free(s);
  return out;
}

bool is_key(const std::string& key) {
  for (size_t i = 0; i < mmssl_config_key_count(); ++i) {
    if (key == mmssl_config_key(i)) return true;
  }
  return false;
}

// Applies "--key value" / "--key=value" pairs left over after CLI11 parsing.
void apply_overrides(mmssl_config* cfg, const std::vector<std::string>& extras) {
  for (size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) {
      throw CliError{kExitUsage, "unexpected argument '" + arg + "'"};
    }
    std::string key = arg.substr(2), value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.resize(eq);
    } else if (i + 1 < extras.size()) {
      value = extras[++i];
    } else {
      throw CliError{MMSSL_ERR_CONFIG, "--" + key + " needs a value"};
    }
    for (char& c : key) c = c == '-' ? '_' : c;
    if (!is_key(key)) throw CliError{MMSSL_ERR_CONFIG, "unknown option '--" + key + "'"};
    check(mmssl_config_set(cfg, key.c_str(), value.c_str()));
  }
}

ConfigPtr resolve(const std::string& config_file, const std::vector<std::string>& extras) {
  mmssl_config* raw = nullptr;
  check(mmssl_config_new(&raw));
  ConfigPtr cfg(raw);
  if (!config_file.empty()) check(mmssl_config_load_file(cfg.get(), config_file.c_str()));
  apply_overrides(cfg.get(), extras);
  check(mmssl_config_validate(cfg.get()));
  std::cerr << "# resolved config\n" << take([&] {
    char* text = nullptr;
    check(mmssl_config_dump(cfg.get(), &text));
    return text;
  }());
  return cfg;
}

std::string config_value(const mmssl_config* cfg, const char* key) {
  char* v = nullptr;
  check(mmssl_config_get(cfg, key, &v));
  return take(v);
}

using Runner = mmssl_status (*)(const mmssl_config*, char**);

std::string run(Runner runner, const mmssl_config* cfg) {
  char* report = nullptr;
  check(runner(cfg, &report));
  return take(report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-modal self-supervised patient embedding engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", mmssl_version());

  std::string config_file;
  struct Command {
    const char* name;
    const char* help;
    Runner runner;
  };
  const std::vector<Command> commands = {
      {"generate", "Write a synthetic two-modality dataset to --out", mmssl_run_generate},
      {"train", "Self-supervised training; writes params.bin, loss.csv, config.txt to --out", mmssl_run_train},
      {"eval-knn", "KNN on frozen features of --model", mmssl_run_eval_knn},
      {"eval-probe", "Linear probe on frozen features of --model", mmssl_run_eval_probe},
      {"cross-validate", "k-fold train + KNN evaluation", mmssl_run_cross_validate},
      {"export-embeddings", "CSV of embeddings and 2-D projection (to --out or stdout)",
       mmssl_run_export_embeddings},
  };
  std::vector<std::pair<CLI::App*, Runner>> subs;
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, std::string(c.help) + "; any config key can be set with --key value");
    sub->add_option("-c,--config", config_file, "key = value config file");
    sub->allow_extras();
    subs.emplace_back(sub, c.runner);
  }

  std::string path_a, path_b, metric = "accuracy";
  CLI::App* ttest = app.add_subcommand("ttest", "Independent two-sample t-test between two sample files");
  ttest->add_option("a", path_a, "numbers, or a cross-validation report")->required();
  ttest->add_option("b", path_b, "numbers, or a cross-validation report")->required();
  ttest->add_option("--metric", metric, "report metric compared per fold")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (ttest->parsed()) {
      std::cerr << "# resolved arguments\na = " << path_a << "\nb = " << path_b << "\nmetric = " << metric << "\n";
      char* report = nullptr;
      check(mmssl_run_ttest(path_a.c_str(), path_b.c_str(), metric.c_str(), &report));
      std::cout << take(report);
      return 0;
    }
    for (const auto& [sub, runner] : subs) {
      if (!sub->parsed()) continue;
      const ConfigPtr cfg = resolve(config_file, sub->remaining());
      std::string out = run(runner, cfg.get());
      if (runner == mmssl_run_export_embeddings) {
        const std::string path = config_value(cfg.get(), "out");
        if (!path.empty()) {
          std::ofstream os(path, std::ios::binary | std::ios::trunc);
          if (!(os << out)) throw CliError{MMSSL_ERR_IO, "cannot write '" + path + "'"};
          out = "out = " + path + "\n";
        }
      }
      std::cout << out;
      return 0;
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  }
  return kExitUsage;
}
