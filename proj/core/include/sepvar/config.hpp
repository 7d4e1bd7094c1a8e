#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sepvar/lattice.hpp"

// Experiment configuration: an archivable key = value file with [section]
// tables. Values are JSON fragments (numbers, strings, arrays), so rate
// tables and grids stay readable without a bespoke grammar. Flags override
// file keys through override_value before the typed load.

namespace sep {

class ConfigTable {
 public:
  static ConfigTable parse_file(const std::string& path);
  static ConfigTable parse_text(const std::string& text);

  bool has(const std::string& key) const;
  // raw JSON fragment for a key ("section.key" for sectioned entries)
  const std::string& raw(const std::string& key) const;
  void override_value(const std::string& key, std::string json_fragment);

  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::string get_string(const std::string& key, std::string fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  std::vector<double> fallback) const;

  std::vector<std::string> keys() const;

 private:
  std::map<std::string, std::string> entries_;
};

// Everything a run needs, with the cross-field checks done at load time.
// side / resolutions / times left at 0 or empty mean "derive the default".
struct ExperimentConfig {
  int dimension = 1;
  int side = 0;
  double rho = 0.5;
  std::vector<std::pair<Site, double>> rate_table;
  std::vector<double> times;
  int trials = 1000;
  int particles = 0;  // fixed-count modes (exact torus, canonical start)
  std::uint64_t seed = 1;
  std::vector<double> lambdas;
  int res_single = 0, res_double = 0;
  Site tilt{1, 0};
  long state_cap = 3000000;
  int threads = 1;
  std::string output_dir = ".";

  static ExperimentConfig load(const ConfigTable& t);

  JumpRates jump_rates() const;
  int resolved_res_single() const;  // spec defaults: 2^10 (d=1), 2^8 (d=2)
  int resolved_res_double() const;  // 2^6 per axis
};

// name of the environment variable that overrides output_dir
extern const char* const kOutputDirEnv;

}  // namespace sep
