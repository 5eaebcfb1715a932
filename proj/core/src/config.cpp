#include "barygen/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace barygen {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str(), path);
}

KeyValueFile KeyValueFile::parse_string(const std::string& text,
                                        const std::string& origin) {
  KeyValueFile kv;
  kv.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(origin + " line " + std::to_string(line_no) +
                          ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(origin + " line " + std::to_string(line_no) +
                          ": empty section name");
      kv.sections_[section];
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": empty key");
    if (section.empty())
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": key outside any [section]");
    auto& sec = kv.sections_[section];
    if (sec.count(key))
      throw ConfigError(origin + " line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "' in [" + section + "]");
    sec[key] = value;
  }
  return kv;
}

void KeyValueFile::fail(const std::string& section, const std::string& key,
                        const std::string& what) const {
  throw ConfigError(origin_ + ": [" + section + "] " + key + ": " + what);
}

bool KeyValueFile::has(const std::string& section,
                       const std::string& key) const {
  const auto sec = sections_.find(section);
  return sec != sections_.end() && sec->second.count(key) > 0;
}

std::string KeyValueFile::get_string(const std::string& section,
                                     const std::string& key,
                                     const std::string& fallback) const {
  const auto sec = sections_.find(section);
  if (sec == sections_.end()) return fallback;
  const auto it = sec->second.find(key);
  return it == sec->second.end() ? fallback : it->second;
}

std::string KeyValueFile::require_string(const std::string& section,
                                         const std::string& key) const {
  if (!has(section, key)) fail(section, key, "required field is missing");
  return get_string(section, key, "");
}

double KeyValueFile::get_double(const std::string& section,
                                const std::string& key,
                                double fallback) const {
  if (!has(section, key)) return fallback;
  const std::string raw = get_string(section, key, "");
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) fail(section, key, "not a number: '" + raw + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(section, key, "not a number: '" + raw + "'");
  }
}

int KeyValueFile::get_int(const std::string& section, const std::string& key,
                          int fallback) const {
  if (!has(section, key)) return fallback;
  const std::string raw = get_string(section, key, "");
  try {
    std::size_t used = 0;
    const int v = std::stoi(raw, &used);
    if (used != raw.size()) fail(section, key, "not an integer: '" + raw + "'");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    fail(section, key, "not an integer: '" + raw + "'");
  }
}

bool KeyValueFile::get_bool(const std::string& section, const std::string& key,
                            bool fallback) const {
  if (!has(section, key)) return fallback;
  const std::string raw = get_string(section, key, "");
  if (raw == "true" || raw == "1" || raw == "yes") return true;
  if (raw == "false" || raw == "0" || raw == "no") return false;
  fail(section, key, "not a boolean: '" + raw + "'");
}

std::vector<std::string> KeyValueFile::get_strings(
    const std::string& section, const std::string& key) const {
  std::vector<std::string> out;
  std::istringstream in(get_string(section, key, ""));
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<double> KeyValueFile::get_doubles(const std::string& section,
                                              const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : get_strings(section, key)) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      fail(section, key, "not a number: '" + tok + "'");
    }
  }
  return out;
}

std::vector<int> KeyValueFile::get_ints(const std::string& section,
                                        const std::string& key) const {
  std::vector<int> out;
  for (const auto& tok : get_strings(section, key)) {
    try {
      out.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      fail(section, key, "not an integer: '" + tok + "'");
    }
  }
  return out;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_file(KeyValueFile::parse_file(path));
}

ExperimentConfig ExperimentConfig::from_file(const KeyValueFile& kv) {
  ExperimentConfig cfg;
  cfg.name = kv.get_string("experiment", "name", cfg.name);
  cfg.out_dir = kv.get_string("experiment", "out", cfg.out_dir);
  cfg.eval_samples = kv.get_int("experiment", "eval_samples", cfg.eval_samples);
  cfg.checkpoint = kv.get_string("eval", "checkpoint", "");
  if (kv.has("experiment", "seeds")) {
    cfg.seeds.clear();
    for (int s : kv.get_ints("experiment", "seeds")) {
      if (s < 0)
        throw ConfigError(kv.origin() + ": [experiment] seeds: must be >= 0");
      cfg.seeds.push_back(std::uint64_t(s));
    }
    if (cfg.seeds.empty())
      throw ConfigError(kv.origin() +
                        ": [experiment] seeds: at least one seed required");
  }

  auto& ds = cfg.dataset;
  ds.kind = kv.get_string("dataset", "kind", ds.kind);
  ds.count = kv.get_int("dataset", "count", ds.count);
  ds.atoms = kv.get_int("dataset", "atoms", ds.atoms);
  ds.dim = kv.get_int("dataset", "dim", ds.dim);
  ds.mean_range = kv.get_double("dataset", "mean_range", ds.mean_range);
  ds.cov_scale = kv.get_double("dataset", "cov_scale", ds.cov_scale);
  ds.side = kv.get_double("dataset", "side", ds.side);
  ds.sigma = kv.get_double("dataset", "sigma", ds.sigma);
  ds.separation = kv.get_double("dataset", "separation", ds.separation);
  ds.data_seed =
      std::uint64_t(kv.get_int("dataset", "data_seed", int(ds.data_seed)));
  ds.files = kv.get_strings("dataset", "files");
  ds.beta = kv.get_doubles("dataset", "beta");

  auto& gen = cfg.generator;
  gen.kind = kv.get_string("generator", "kind", gen.kind);
  gen.latent_dim = kv.get_int("generator", "latent_dim", gen.latent_dim);
  if (kv.has("generator", "hidden")) gen.hidden = kv.get_ints("generator", "hidden");
  gen.components = kv.get_int("generator", "components", gen.components);
  gen.atoms = kv.get_int("generator", "atoms", gen.atoms);
  gen.pass_through = kv.get_bool("generator", "pass_through", gen.pass_through);
  gen.init = kv.get_string("generator", "init", gen.init);
  gen.init_scale = kv.get_double("generator", "init_scale", gen.init_scale);

  auto& d = cfg.discrepancy;
  d.kind = kv.get_string("discrepancy", "kind", d.kind);
  d.kernel = kv.get_string("discrepancy", "kernel", d.kernel);
  d.lengthscale = kv.get_double("discrepancy", "lengthscale", d.lengthscale);
  d.alpha = kv.get_double("discrepancy", "alpha", d.alpha);
  d.epsilon = kv.get_double("discrepancy", "epsilon", d.epsilon);
  d.cost_exponent = kv.get_int("discrepancy", "cost_exponent", d.cost_exponent);
  d.tolerance = kv.get_double("discrepancy", "tolerance", d.tolerance);
  d.max_iterations =
      kv.get_int("discrepancy", "max_iterations", d.max_iterations);
  d.anneal = kv.get_double("discrepancy", "anneal", d.anneal);
  d.gradient_penalty =
      kv.get_double("discrepancy", "gradient_penalty", d.gradient_penalty);
  d.critic_steps = kv.get_int("discrepancy", "critic_steps", d.critic_steps);
  d.critic_lr = kv.get_double("discrepancy", "critic_lr", d.critic_lr);
  if (kv.has("discrepancy", "critic_hidden"))
    d.critic_hidden = kv.get_ints("discrepancy", "critic_hidden");
  d.feature_dim = kv.get_int("discrepancy", "feature_dim", d.feature_dim);

  auto& opt = cfg.optimizer;
  opt.kind = kv.get_string("optimizer", "kind", opt.kind);
  opt.lr = kv.get_double("optimizer", "lr", opt.lr);
  opt.beta1 = kv.get_double("optimizer", "beta1", opt.beta1);
  opt.beta2 = kv.get_double("optimizer", "beta2", opt.beta2);
  opt.decay = kv.get_double("optimizer", "decay", opt.decay);
  opt.batch = kv.get_int("optimizer", "batch", opt.batch);
  opt.iters = kv.get_int("optimizer", "iters", opt.iters);
  return cfg;
}

}  // namespace barygen
