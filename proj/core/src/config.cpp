#include "sepvar/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sep {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// cut an unquoted '#' comment; values are JSON fragments, so '#' may appear
// inside string literals
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.' &&
        c != '-')
      return false;
  return true;
}

json parse_fragment(const std::string& key, const std::string& raw) {
  json v = json::parse(raw, nullptr, false);
  if (v.is_discarded())
    throw std::invalid_argument("config key '" + key +
                                "' holds an unparsable value: " + raw);
  return v;
}

}  // namespace

ConfigTable ConfigTable::parse_text(const std::string& text) {
  ConfigTable t;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (!valid_key(section))
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": bad section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (!valid_key(key))
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": bad key '" + key + "'");
    if (val.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty value for '" + key + "'");
    if (!section.empty()) key = section + "." + key;
    if (!t.entries_.emplace(key, val).second)
      throw std::invalid_argument("config key '" + key + "' appears twice");
  }
  return t;
}

ConfigTable ConfigTable::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_text(buf.str());
}

bool ConfigTable::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

const std::string& ConfigTable::raw(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw std::out_of_range("config key '" + key + "' is not set");
  return it->second;
}

void ConfigTable::override_value(const std::string& key,
                                 std::string json_fragment) {
  if (!valid_key(key))
    throw std::invalid_argument("bad config key '" + key + "'");
  entries_[key] = std::move(json_fragment);
}

double ConfigTable::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  json v = parse_fragment(key, raw(key));
  if (!v.is_number())
    throw std::invalid_argument("config key '" + key + "' must be a number");
  return v.get<double>();
}

int ConfigTable::get_int(const std::string& key, int fallback) const {
  if (!has(key)) return fallback;
  json v = parse_fragment(key, raw(key));
  if (!v.is_number_integer())
    throw std::invalid_argument("config key '" + key + "' must be an integer");
  return v.get<int>();
}

std::uint64_t ConfigTable::get_u64(const std::string& key,
                                   std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  json v = parse_fragment(key, raw(key));
  if (!(v.is_number_integer() && v.get<std::int64_t>() >= 0) &&
      !v.is_number_unsigned())
    throw std::invalid_argument("config key '" + key +
                                "' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

std::string ConfigTable::get_string(const std::string& key,
                                    std::string fallback) const {
  if (!has(key)) return fallback;
  json v = parse_fragment(key, raw(key));
  if (!v.is_string())
    throw std::invalid_argument("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> ConfigTable::get_doubles(const std::string& key,
                                             std::vector<double> fallback) const {
  if (!has(key)) return fallback;
  json v = parse_fragment(key, raw(key));
  if (!v.is_array())
    throw std::invalid_argument("config key '" + key +
                                "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number())
      throw std::invalid_argument("config key '" + key +
                                  "' must be an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<std::string> ConfigTable::keys() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, v] : entries_) out.push_back(k);
  return out;
}

const char* const kOutputDirEnv = "SEPVAR_OUTPUT_DIR";

ExperimentConfig ExperimentConfig::load(const ConfigTable& t) {
  ExperimentConfig c;
  c.dimension = t.get_int("dimension", c.dimension);
  if (c.dimension != 1 && c.dimension != 2)
    throw std::invalid_argument("dimension must be 1 or 2");
  c.side = t.get_int("side", c.side);
  c.rho = t.get_double("rho", c.rho);
  if (!(c.rho > 0.0) || !(c.rho < 1.0))
    throw std::invalid_argument("rho must lie strictly inside (0,1)");

  if (t.has("rates")) {
    json v = json::parse(t.raw("rates"), nullptr, false);
    if (v.is_discarded() || !v.is_array())
      throw std::invalid_argument(
          "rates must be an array of [x, y, rate] triples");
    for (const auto& row : v) {
      if (!row.is_array() || row.size() != 3 || !row[0].is_number_integer() ||
          !row[1].is_number_integer() || !row[2].is_number())
        throw std::invalid_argument(
            "rates must be an array of [x, y, rate] triples");
      c.rate_table.push_back(
          {Site{row[0].get<int>(), row[1].get<int>()}, row[2].get<double>()});
    }
  }
  if (c.rate_table.empty())
    throw std::invalid_argument("rate list is empty; nothing to simulate");

  c.times = t.get_doubles("times", c.times);
  for (double s : c.times)
    if (!(s > 0)) throw std::invalid_argument("times must be positive");
  c.trials = t.get_int("trials", c.trials);
  if (c.trials < 1) throw std::invalid_argument("trials must be positive");
  c.particles = t.get_int("particles", c.particles);
  c.seed = t.get_u64("seed", c.seed);
  c.lambdas = t.get_doubles("lambdas", c.lambdas);
  for (double lam : c.lambdas)
    if (!(lam > 0)) throw std::invalid_argument("lambdas must be positive");
  c.res_single = t.get_int("res_single", c.res_single);
  c.res_double = t.get_int("res_double", c.res_double);
  if (c.res_single < 0 || c.res_double < 0)
    throw std::invalid_argument("quadrature resolutions must be positive");
  if (t.has("tilt")) {
    json v = json::parse(t.raw("tilt"), nullptr, false);
    if (v.is_discarded() || !v.is_array() || v.size() != 2 ||
        !v[0].is_number_integer() || !v[1].is_number_integer())
      throw std::invalid_argument("tilt must be an [x, y] site");
    c.tilt = Site{v[0].get<int>(), v[1].get<int>()};
  }
  c.state_cap = t.get_int("state_cap", static_cast<int>(c.state_cap));
  c.threads = t.get_int("threads", c.threads);
  if (c.threads < 1) throw std::invalid_argument("threads must be positive");
  if (t.has("output_dir")) {
    c.output_dir = t.get_string("output_dir", c.output_dir);
  } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    c.output_dir = env;
  }

  c.jump_rates();  // surface rate-table validation now, not mid-run
  return c;
}

JumpRates ExperimentConfig::jump_rates() const {
  std::map<Site, double> by_site;
  for (const auto& [site, rate] : rate_table)
    if (!by_site.emplace(site, rate).second)
      throw std::invalid_argument("rate table lists a site twice");
  return JumpRates::make(dimension, by_site);
}

int ExperimentConfig::resolved_res_single() const {
  if (res_single > 0) return res_single;
  return dimension == 1 ? 1 << 10 : 1 << 8;
}

int ExperimentConfig::resolved_res_double() const {
  return res_double > 0 ? res_double : 1 << 6;
}

}  // namespace sep
