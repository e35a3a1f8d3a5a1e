#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecosel/dataset.hpp"
#include "ecosel/econ.hpp"
#include "ecosel/errors.hpp"
#include "ecosel/gprior.hpp"

namespace ecosel {

/// Minimal INI reader: [section] headers, key = value lines, '#'/';'
/// comments. Keys are addressed as "section.key".
class IniFile {
 public:
  static IniFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_config("cannot open config file '" + path + "'");
    IniFile ini;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#' || t[0] == ';') continue;
      if (t.front() == '[') {
        if (t.back() != ']') throw_config("malformed section at line " + std::to_string(lineno));
        section = trim(t.substr(1, t.size() - 2));
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw_config("expected 'key = value' at line " + std::to_string(lineno) + " of '" + path + "'");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) throw_config("empty key at line " + std::to_string(lineno));
      ini.values_[section.empty() ? key : section + "." + key] = value;
    }
    return ini;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get(const std::string& key, const std::string& fallback = "") const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return parse_double(get(key), key);
  }

  int get_int(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const double v = parse_double(get(key), key);
    if (v != static_cast<int>(v)) throw_config("key '" + key + "' must be an integer");
    return static_cast<int>(v);
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    try {
      return std::stoull(get(key));
    } catch (const std::exception&) {
      throw_config("key '" + key + "' must be a nonnegative integer");
    }
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  static double parse_double(const std::string& s, const std::string& key) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw_config("key '" + key + "' has non-numeric value '" + s + "'");
    }
  }

  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string field;
    for (char c : s) {
      if (c == ',') {
        out.push_back(trim(field));
        field.clear();
      } else {
        field += c;
      }
    }
    const std::string last = trim(field);
    if (!last.empty() || !out.empty()) out.push_back(last);
    for (const auto& f : out)
      if (f.empty()) throw_config("empty element in list '" + s + "'");
    return out;
  }

  std::vector<double> get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split_list(get(key))) out.push_back(parse_double(item, key));
    return out;
  }

 private:
  std::map<std::string, std::string> values_;
};

/// Cost model declaration by predictor name; resolved to indices once the
/// dataset's column order is known.
struct CostDecl {
  std::string kind = "none";  // none | uniform | itemized | grouped
  double price = 0.0;
  std::vector<std::pair<std::string, double>> prices;                // name:price
  std::vector<std::pair<std::vector<std::string>, double>> groups;   // members:price

  CostModel resolve(const std::vector<std::string>& names) const {
    const int p = static_cast<int>(names.size());
    auto index_of = [&](const std::string& name) {
      for (int j = 0; j < p; ++j)
        if (names[j] == name) return j;
      throw_config("cost model references unknown predictor '" + name + "'");
    };
    if (kind == "none") return CostModel::uniform(0.0);
    if (kind == "uniform") return CostModel::uniform(price);
    Eigen::VectorXd per = Eigen::VectorXd::Zero(p);
    for (const auto& [name, value] : prices) per(index_of(name)) = value;
    if (kind == "itemized") {
      auto cm = CostModel::itemized(per);
      cm.validate(p);
      return cm;
    }
    if (kind == "grouped") {
      std::vector<std::pair<PredictorSet, double>> gs;
      for (const auto& [members, value] : groups) {
        PredictorSet set = PredictorSet::empty_set(p);
        for (const auto& name : members) set = set.with(index_of(name));
        gs.emplace_back(set, value);
      }
      auto cm = CostModel::grouped(per, std::move(gs));
      cm.validate(p);
      return cm;
    }
    throw_config("unknown cost kind '" + kind + "' (expected none|uniform|itemized|grouped)");
  }
};

/// Everything one reproducible run needs, read from a single config file.
/// Command-line flags may override out/seed/folds/threads.
struct RunConfig {
  // [data]
  std::string csv_path;
  std::string response;
  std::vector<std::string> predictors;  // empty = all other columns
  std::string wave_column;

  // [cv]
  int folds = 10;
  std::uint64_t seed = 1;
  bool per_fold_standardize = false;

  // [model]
  GPriorConfig gprior;  // defaults: g = n, prior p = 0.5

  // [cost]
  CostDecl cost;

  // [sweep]
  std::vector<double> sweep_grid;

  // [timed]
  std::string timed_target;
  std::vector<double> timed_deltas{0.0};
  std::vector<double> timed_prices{0.0};
  bool timed_standardize_per_wave = true;

  // [run]
  std::string out_dir = "out";
  int threads = 0;

  // [extended]
  std::string ext_mean_csv, ext_cov_csv;
  int ext_draws = 100000;
  std::uint64_t ext_seed = 42;

  // [check]
  int check_datasets = 50;
  int check_n_min = 8, check_n_max = 20, check_k_max = 3;
  int check_prop1_designs = 100;
  int check_prop1_n = 101, check_prop1_m = 2;
  std::uint64_t check_seed = 7;

  static RunConfig from_file(const std::string& path) {
    const IniFile ini = IniFile::parse_file(path);
    RunConfig cfg;
    cfg.csv_path = ini.get("data.csv");
    cfg.response = ini.get("data.response");
    if (ini.has("data.predictors")) cfg.predictors = IniFile::split_list(ini.get("data.predictors"));
    cfg.wave_column = ini.get("data.wave");

    cfg.folds = ini.get_int("cv.folds", 10);
    cfg.seed = ini.get_u64("cv.seed", 1);
    const std::string mode = ini.get("cv.standardize", "global");
    if (mode == "per_fold")
      cfg.per_fold_standardize = true;
    else if (mode != "global")
      throw_config("cv.standardize must be 'global' or 'per_fold'");

    const std::string g = ini.get("model.g", "n");
    if (g == "n")
      cfg.gprior.fixed_g.reset();
    else
      cfg.gprior.fixed_g = IniFile::parse_double(g, "model.g");
    cfg.gprior.model_prior_p = ini.get_double("model.prior_p", 0.5);
    cfg.gprior.validate();

    cfg.cost.kind = ini.get("cost.kind", "none");
    cfg.cost.price = ini.get_double("cost.price", 0.0);
    if (ini.has("cost.prices")) {
      for (const auto& item : IniFile::split_list(ini.get("cost.prices"))) {
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) throw_config("cost.prices entries must look like name:price");
        cfg.cost.prices.emplace_back(IniFile::trim(item.substr(0, colon)),
                                     IniFile::parse_double(item.substr(colon + 1), "cost.prices"));
      }
    }
    if (ini.has("cost.groups")) {
      for (const auto& item : IniFile::split_list(ini.get("cost.groups"))) {
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) throw_config("cost.groups entries must look like a+b+c:price");
        std::vector<std::string> members;
        std::string field;
        for (char c : item.substr(0, colon)) {
          if (c == '+') {
            members.push_back(IniFile::trim(field));
            field.clear();
          } else {
            field += c;
          }
        }
        members.push_back(IniFile::trim(field));
        cfg.cost.groups.emplace_back(std::move(members),
                                     IniFile::parse_double(item.substr(colon + 1), "cost.groups"));
      }
    }

    if (ini.has("sweep.grid")) cfg.sweep_grid = ini.get_double_list("sweep.grid");

    cfg.timed_target = ini.get("timed.target");
    if (ini.has("timed.deltas")) cfg.timed_deltas = ini.get_double_list("timed.deltas");
    if (ini.has("timed.prices")) cfg.timed_prices = ini.get_double_list("timed.prices");
    const std::string wmode = ini.get("timed.standardize", "per_wave");
    if (wmode == "global")
      cfg.timed_standardize_per_wave = false;
    else if (wmode != "per_wave")
      throw_config("timed.standardize must be 'per_wave' or 'global'");

    cfg.out_dir = ini.get("run.out", "out");
    cfg.threads = ini.get_int("run.threads", 0);

    cfg.ext_mean_csv = ini.get("extended.mean_csv");
    cfg.ext_cov_csv = ini.get("extended.cov_csv");
    cfg.ext_draws = ini.get_int("extended.draws", 100000);
    cfg.ext_seed = ini.get_u64("extended.seed", 42);

    cfg.check_datasets = ini.get_int("check.datasets", 50);
    cfg.check_n_min = ini.get_int("check.n_min", 8);
    cfg.check_n_max = ini.get_int("check.n_max", 20);
    cfg.check_k_max = ini.get_int("check.k_max", 3);
    cfg.check_prop1_designs = ini.get_int("check.prop1_designs", 100);
    cfg.check_prop1_n = ini.get_int("check.prop1_n", 101);
    cfg.check_prop1_m = ini.get_int("check.prop1_m", 2);
    cfg.check_seed = ini.get_u64("check.seed", 7);
    return cfg;
  }

  /// Expand an empty predictor list to every column except response and wave.
  std::vector<std::string> resolve_predictors() const {
    if (!predictors.empty()) return predictors;
    std::ifstream in(csv_path);
    if (!in) throw_data("cannot open CSV file '" + csv_path + "'");
    std::string line;
    if (!std::getline(in, line) || line.empty()) throw_data("CSV file '" + csv_path + "' is empty");
    std::vector<std::string> out;
    for (const auto& name : detail::split_csv_line(line))
      if (name != response && name != wave_column && !name.empty()) out.push_back(name);
    if (out.empty()) throw_config("no predictor columns left after excluding response/wave");
    return out;
  }
};

}  // namespace ecosel
