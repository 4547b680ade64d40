#include "regimeflow/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "regimeflow/csv.hpp"

namespace regimeflow {

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* expected) {
  throw Error(ErrorCode::InvalidConfig, "config " + key + " = '" + value + "': expected " + expected);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) bad(key, v, "a number");
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) bad(key, v, "an integer");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) bad(key, v, "an unsigned integer");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad(key, v, "true or false");
}

std::string from_bool(bool b) { return b ? "true" : "false"; }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define RF_DOUBLE(name, member)                                                                    \
  Field {                                                                                          \
    name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_double(k, v); }, \
        [](const RunConfig& c) { return format_double(c.member); }                                 \
  }
#define RF_INT(name, member)                                                                                   \
  Field {                                                                                                      \
    name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = static_cast<int>(to_int(k, v)); }, \
        [](const RunConfig& c) { return std::to_string(c.member); }                                            \
  }
#define RF_BOOL(name, member)                                                                   \
  Field {                                                                                       \
    name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = to_bool(k, v); }, \
        [](const RunConfig& c) { return from_bool(c.member); }                                  \
  }

std::string_view profile_name(StopLossProfile p) {
  switch (p) {
    case StopLossProfile::Auto: return "auto";
    case StopLossProfile::Momentum: return "momentum";
    case StopLossProfile::Contrarian: return "contrarian";
    case StopLossProfile::Off: return "off";
  }
  return "auto";
}

StopLossProfile parse_profile(const std::string& k, const std::string& v) {
  for (auto p : {StopLossProfile::Auto, StopLossProfile::Momentum, StopLossProfile::Contrarian, StopLossProfile::Off}) {
    if (v == profile_name(p)) return p;
  }
  bad(k, v, "auto, momentum, contrarian or off");
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      RF_DOUBLE("kalman.phi", kalman.phi),
      RF_DOUBLE("kalman.state_noise", kalman.state_noise),
      RF_DOUBLE("kalman.measurement_noise", kalman.measurement_noise),
      RF_DOUBLE("kalman.gamma", kalman.gamma),
      RF_BOOL("kalman.estimate", kalman.estimate),
      RF_DOUBLE("volatility.ewma_decay", ewma_decay),
      RF_INT("volatility.seed_window", vol_seed_window),
      Field{"volatility.baseline",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              if (v == "expanding") c.baseline_mode = BaselineMode::Expanding;
              else if (v == "full_sample") c.baseline_mode = BaselineMode::FullSample;
              else bad(k, v, "expanding or full_sample");
            },
            [](const RunConfig& c) {
              return std::string(c.baseline_mode == BaselineMode::Expanding ? "expanding" : "full_sample");
            }},
      RF_INT("regime.n_regimes", regime.n_regimes),
      RF_DOUBLE("regime.crisis_threshold", regime.crisis_threshold),
      RF_INT("regime.max_iterations", regime.max_iterations),
      RF_DOUBLE("regime.tolerance", regime.tolerance),
      RF_DOUBLE("asymmetry.shock_multiple", asymmetry.shock_multiple),
      RF_DOUBLE("asymmetry.return_scale", asymmetry.return_scale),
      RF_BOOL("asymmetry.level_mode", asymmetry.level_mode),
      RF_BOOL("asymmetry.stock_level_sigma", asymmetry.stock_level_sigma),
      Field{"asymmetry.errors",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              using E = AsymmetryConfig::Errors;
              if (v == "conventional") c.asymmetry.errors = E::Conventional;
              else if (v == "robust") c.asymmetry.errors = E::Robust;
              else if (v == "clustered") c.asymmetry.errors = E::ClusteredByDate;
              else bad(k, v, "conventional, robust or clustered");
            },
            [](const RunConfig& c) {
              using E = AsymmetryConfig::Errors;
              switch (c.asymmetry.errors) {
                case E::Conventional: return std::string("conventional");
                case E::Robust: return std::string("robust");
                case E::ClusteredByDate: return std::string("clustered");
              }
              return std::string("conventional");
            }},
      RF_DOUBLE("backtest.decile", backtest.decile),
      RF_DOUBLE("backtest.threshold_cap", backtest.threshold_cap),
      RF_BOOL("backtest.stop_loss", backtest.stop_loss),
      Field{"backtest.stop_loss_profile",
            [](RunConfig& c, const std::string& k, const std::string& v) {
              c.backtest.stop_loss_profile = parse_profile(k, v);
            },
            [](const RunConfig& c) { return std::string(profile_name(c.backtest.stop_loss_profile)); }},
      RF_DOUBLE("backtest.cost_bps", backtest.cost_bps),
      RF_DOUBLE("backtest.annualization", backtest.annualization),
      RF_INT("backtest.train_days", backtest.train_days),
      RF_DOUBLE("backtest.orientation_for", backtest.orientation[0]),
      RF_DOUBLE("backtest.orientation_ins", backtest.orientation[1]),
      RF_DOUBLE("backtest.orientation_ind", backtest.orientation[2]),
      Field{"backtest.robustness_investor",
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.backtest.robustness_investor = parse_investor(v);
            },
            [](const RunConfig& c) { return std::string(to_string(c.backtest.robustness_investor)); }},
      Field{"backtest.robustness_variant",
            [](RunConfig& c, const std::string&, const std::string& v) {
              c.backtest.robustness_variant = parse_variant(v);
            },
            [](const RunConfig& c) { return std::string(to_string(c.backtest.robustness_variant)); }},
      RF_INT("bootstrap.iterations", bootstrap.iterations),
      RF_INT("bootstrap.block_length", bootstrap.block_length),
      RF_DOUBLE("ingest.flow_winsor_lower", flow_winsor_lower),
      RF_DOUBLE("ingest.flow_winsor_upper", flow_winsor_upper),
      RF_DOUBLE("ingest.return_winsor_lower", return_winsor_lower),
      RF_DOUBLE("ingest.return_winsor_upper", return_winsor_upper),
      RF_INT("ingest.min_observations", min_observations),
      Field{"run.seed",
            [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); },
            [](const RunConfig& c) { return std::to_string(c.seed); }},
      RF_INT("run.threads", threads),
  };
  return table;
}

#undef RF_DOUBLE
#undef RF_INT
#undef RF_BOOL

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown config key '" + key + "'");
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.message() + " at line " +
                                              std::to_string(e.line()));
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw Error(ErrorCode::InvalidConfig, "config key '" + section + "' must sit inside a section");
    }
    for (const auto& [key, value] : body) {
      const auto full = section + "." + key;
      find_field(full).set(config, full, trim(value.data()));
    }
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw Error(ErrorCode::InvalidConfig, "override '" + std::string(assignment) + "' must look like section.key=value");
  }
  const auto key = trim(assignment.substr(0, eq));
  find_field(key).set(config, key, trim(assignment.substr(eq + 1)));
}

void apply_environment(RunConfig& config) {
  if (const char* seed = std::getenv("REGIMEFLOW_SEED"); seed && *seed) {
    config.seed = to_u64("REGIMEFLOW_SEED", trim(seed));
  }
}

std::map<std::string, std::string> config_entries(const RunConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& f : fields()) out.emplace(f.key, f.get(config));
  return out;
}

std::string render_config(const RunConfig& config) {
  std::ostringstream out;
  std::string current;
  for (const auto& f : fields()) {
    const std::string key = f.key;
    const auto dot = key.find('.');
    const auto section = key.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << key.substr(dot + 1) << " = " << f.get(config) << '\n';
  }
  return out.str();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

}  // namespace regimeflow
