#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dqgm/harness.hpp"

namespace dqgm::harness {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& section, const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(section + "." + key + ": expected a number, got '" + v + "'");
}

long to_long(const std::string& section, const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long d = std::stol(v, &used);
    if (used == v.size()) return d;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(section + "." + key + ": expected an integer, got '" + v + "'");
}

// "1-10" or "1, 2, 5" or a mix: "1-4, 8".
std::vector<int> parse_rates(const std::string& section, const std::string& v) {
  std::vector<int> rates;
  for (const auto& item : split(v)) {
    const auto dash = item.find('-', 1);
    if (dash == std::string::npos) {
      rates.push_back(static_cast<int>(to_long(section, "rates", item)));
    } else {
      const long lo = to_long(section, "rates", trim(item.substr(0, dash)));
      const long hi = to_long(section, "rates", trim(item.substr(dash + 1)));
      if (hi < lo) throw ConfigError(section + ".rates: empty range '" + item + "'");
      for (long r = lo; r <= hi; ++r) rates.push_back(static_cast<int>(r));
    }
  }
  return rates;
}

std::vector<double> parse_doubles(const std::string& section, const std::string& key,
                                  const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v)) out.push_back(to_double(section, key, item));
  return out;
}

ExperimentConfig parse_section(const std::string& section, const pt::ptree& tree,
                               const std::filesystem::path& base) {
  ExperimentConfig c;
  c.name = section;
  for (const auto& [key, node] : tree) {
    if (!node.empty()) throw ConfigError(section + "." + key + ": nested keys are not supported");
    const std::string v = trim(node.data());
    if (key == "algos") {
      c.algos.clear();
      for (const auto& a : split(v)) {
        try {
          c.algos.push_back(parse_algo(a));
        } catch (const std::invalid_argument& e) {
          throw ConfigError(section + ".algos: " + e.what());
        }
      }
    } else if (key == "source") {
      if (v == "gaussian") {
        c.source = ExperimentConfig::Source::gaussian;
      } else if (v == "mtx") {
        c.source = ExperimentConfig::Source::mtx;
      } else if (v == "interpolation") {
        c.source = ExperimentConfig::Source::interpolation;
      } else {
        throw ConfigError(section + ".source: expected gaussian, mtx or interpolation");
      }
    } else if (key == "m") {
      c.m = to_long(section, key, v);
    } else if (key == "n") {
      c.n = to_long(section, key, v);
    } else if (key == "kappa") {
      c.kappa = to_double(section, key, v);
    } else if (key == "path") {
      c.mtx_path = std::filesystem::path(v).is_absolute() ? std::filesystem::path(v) : base / v;
    } else if (key == "worker_kappas") {
      c.worker_kappas = parse_doubles(section, key, v);
    } else if (key == "worker_smoothness") {
      c.worker_smoothness = parse_doubles(section, key, v);
    } else if (key == "shared_basis") {
      c.shared_basis = v == "true" || v == "1" || v == "yes";
    } else if (key == "trials") {
      c.trials = static_cast<int>(to_long(section, key, v));
    } else if (key == "rates") {
      c.rates = parse_rates(section, v);
    } else if (key == "seed") {
      c.seed = static_cast<std::uint64_t>(to_long(section, key, v));
    } else if (key == "t_max") {
      c.run.stop.t_max = to_long(section, key, v);
    } else if (key == "floor") {
      c.run.stop.floor = to_double(section, key, v);
    } else if (key == "divergence") {
      c.run.stop.divergence = to_double(section, key, v);
    } else if (key == "workers") {
      c.workers = static_cast<std::size_t>(to_long(section, key, v));
    } else if (key == "allocation") {
      if (v == "uniform") {
        c.run.allocation = RateAllocation::uniform;
      } else if (v == "waterfilling") {
        c.run.allocation = RateAllocation::waterfilling;
      } else {
        throw ConfigError(section + ".allocation: expected uniform or waterfilling");
      }
    } else if (key == "alpha") {
      c.run.alpha = to_double(section, key, v);
    } else if (key == "containment") {
      if (v == "enforce") {
        c.run.containment = engines::Containment::enforce;
      } else if (v == "record") {
        c.run.containment = engines::Containment::record;
      } else {
        throw ConfigError(section + ".containment: expected enforce or record");
      }
    } else if (key == "threads") {
      c.threads = static_cast<unsigned>(to_long(section, key, v));
    } else if (key == "csv") {
      c.csv_path = v;
    } else if (key == "svg") {
      c.svg_path = v;
    } else {
      throw ConfigError(section + ": unknown key '" + key + "'");
    }
  }
  if (c.source == ExperimentConfig::Source::interpolation && c.worker_kappas.empty())
    c.worker_kappas.assign(c.workers, c.kappa);
  c.validate();
  return c;
}

std::vector<ExperimentConfig> parse_tree(const pt::ptree& tree, const std::filesystem::path& base) {
  std::vector<ExperimentConfig> out;
  for (const auto& [section, node] : tree) {
    if (node.empty()) throw ConfigError("key '" + section + "' outside any [section]");
    out.push_back(parse_section(section, node, base));
  }
  if (out.empty()) throw ConfigError("config defines no experiments");
  return out;
}

}  // namespace

std::vector<ExperimentConfig> parse_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  return parse_tree(tree, std::filesystem::current_path());
}

std::vector<ExperimentConfig> load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_tree(tree, path.has_parent_path() ? path.parent_path() : ".");
}

}  // namespace dqgm::harness
