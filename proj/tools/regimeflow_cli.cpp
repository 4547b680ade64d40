// regimeflow command-line entry point.
//
// Every command works inside one run directory (--dir). `simulate` and
// `ingest` bring a panel in; the analysis commands re-read the panel that
// `ingest` recorded in run.json after checking its digest.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "regimeflow/config.hpp"
#include "regimeflow/csv.hpp"
#include "regimeflow/manifest.hpp"
#include "regimeflow/parallel.hpp"
#include "regimeflow/pipeline.hpp"
#include "regimeflow/synth.hpp"

namespace fs = std::filesystem;
using namespace regimeflow;

namespace {

struct Options {
  fs::path dir = "run";
  std::optional<fs::path> config_file;
  std::vector<std::string> overrides;
  std::optional<int> threads;
  // simulate
  int stocks = 100;
  int days = 1200;
  double idiosyncratic_ratio = 2.0;
  double size_elasticity = 0.0;
  // ingest
  std::optional<fs::path> panel;
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveMarketCap:
    case ErrorCode::NegativeValue:
    case ErrorCode::InvalidReturn:
    case ErrorCode::DuplicateKey:
    case ErrorCode::UnparseableDate:
    case ErrorCode::MalformedRow:
    case ErrorCode::EmptyPanel:
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
    case ErrorCode::MissingArtifacts:
      return 1;
    default:
      return 2;
  }
}

RunConfig resolve_config(const Options& o) {
  RunConfig cfg = o.config_file ? load_config(*o.config_file) : RunConfig{};
  for (const auto& kv : o.overrides) apply_override(cfg, kv);
  apply_environment(cfg);
  if (o.threads) cfg.threads = *o.threads;
  cfg.validate();
  set_max_threads(cfg.threads);
  return cfg;
}

class Recorder {
 public:
  Recorder(const Options& o, const RunConfig& cfg, std::string command) : dir_(o.dir) {
    entry_.command = std::move(command);
    entry_.config_text = render_config(cfg);
    entry_.config_hash = manifest::sha256_hex(entry_.config_text);
    entry_.seed = cfg.seed;
    entry_.threads = cfg.threads;
  }
  void input(const fs::path& p) { entry_.inputs[manifest::relative_name(dir_, p)] = manifest::sha256_file(p); }
  void outputs(const pipeline::Paths& paths) {
    for (const auto& p : paths) entry_.outputs[manifest::relative_name(dir_, p)] = manifest::sha256_file(p);
  }
  void commit() { manifest::record(dir_, entry_); }

 private:
  fs::path dir_;
  manifest::Entry entry_;
};

/// Panel recorded by `ingest`, verified against its digest.
fs::path ingested_panel(const fs::path& dir) {
  const auto entry = manifest::find(dir, "ingest");
  if (!entry || entry->inputs.empty()) {
    throw Error(ErrorCode::MissingArtifacts, "missing artifacts: run `ingest` in " + dir.string() + " first");
  }
  const auto& [name, digest] = *entry->inputs.begin();
  fs::path path(name);
  if (!path.is_absolute()) path = dir / path;
  if (!fs::exists(path)) throw Error(ErrorCode::MissingArtifacts, "missing artifacts: panel " + path.string());
  if (manifest::sha256_file(path) != digest) {
    throw Error(ErrorCode::MissingArtifacts,
                "missing artifacts: panel " + path.string() + " changed since ingest; re-run ingest");
  }
  return path;
}

ValidatedPanel load_panel(const fs::path& path) { return validate_panel(read_panel_csv(path)); }

IngestResult research_ingest(const ValidatedPanel& panel, const RunConfig& cfg) {
  return build_flow_series(panel, IngestOptions::from(cfg));
}

void announce(const pipeline::Paths& paths) {
  for (const auto& p : paths) std::cout << "wrote " << p.string() << '\n';
}

int cmd_simulate(const Options& o) {
  const auto cfg = resolve_config(o);
  synth::SynthSpec spec;
  spec.n_stocks = o.stocks;
  spec.n_days = o.days;
  spec.seed = cfg.seed;
  spec.idiosyncratic_ratio = o.idiosyncratic_ratio;
  spec.size_elasticity = o.size_elasticity;
  spec.ewma_decay = cfg.ewma_decay;
  spec.vol_seed_window = cfg.vol_seed_window;
  spec.shock_multiple = cfg.asymmetry.shock_multiple;
  spec.return_scale = cfg.asymmetry.return_scale;
  const auto gen = synth::generate_panel(spec);
  Recorder rec(o, cfg, "simulate");
  const auto paths = pipeline::write_simulation(o.dir, gen);
  rec.outputs(paths);
  rec.commit();
  announce(paths);
  return 0;
}

int cmd_ingest(const Options& o) {
  const auto cfg = resolve_config(o);
  const fs::path panel_path = o.panel.value_or(o.dir / "panel.csv");
  if (!fs::exists(panel_path)) {
    throw Error(ErrorCode::MissingArtifacts, "missing artifacts: panel " + panel_path.string() + " not found");
  }
  Recorder rec(o, cfg, "ingest");
  rec.input(panel_path);
  const auto data = research_ingest(load_panel(panel_path), cfg);
  const auto paths = pipeline::write_ingest(o.dir, data);
  rec.outputs(paths);
  rec.commit();
  announce(paths);
  std::cout << "rows read " << data.stats.rows_read << ", dropped " << data.stats.dropped_total() << '\n';
  return 0;
}

template <typename Fn>
int analysis_command(const Options& o, const std::string& name, Fn&& body) {
  const auto cfg = resolve_config(o);
  const auto panel_path = ingested_panel(o.dir);
  Recorder rec(o, cfg, name);
  rec.input(panel_path);
  const auto panel = load_panel(panel_path);
  const auto paths = body(panel, cfg);
  rec.outputs(paths);
  rec.commit();
  announce(paths);
  return 0;
}

int cmd_filter(const Options& o) {
  return analysis_command(o, "filter", [&](const ValidatedPanel& panel, const RunConfig& cfg) {
    const auto data = research_ingest(panel, cfg);
    return pipeline::write_filters(o.dir, data, pipeline::run_filters(data.stocks, cfg));
  });
}

int cmd_regime(const Options& o) {
  return analysis_command(o, "regime", [&](const ValidatedPanel& panel, const RunConfig& cfg) {
    const auto data = research_ingest(panel, cfg);
    const auto regimes = pipeline::run_regime(data.market, cfg);
    const auto filters = pipeline::run_filters(data.stocks, cfg);
    const auto regression = pipeline::regime_regression(data, filters, regimes, InvestorType::Foreign);
    return pipeline::write_regime(o.dir, data, regimes, regression, cfg);
  });
}

int cmd_asym(const Options& o) {
  return analysis_command(o, "asym", [&](const ValidatedPanel& panel, const RunConfig& cfg) {
    const auto data = research_ingest(panel, cfg);
    return pipeline::write_asymmetry(o.dir, pipeline::asymmetry_table(data, cfg));
  });
}

int cmd_predict(const Options& o) {
  return analysis_command(o, "predict", [&](const ValidatedPanel& panel, const RunConfig& cfg) {
    const auto data = research_ingest(panel, cfg);
    const auto filters = pipeline::run_filters(data.stocks, cfg);
    return pipeline::write_predictive(o.dir, pipeline::predictive_table(data, filters));
  });
}

int cmd_backtest(const Options& o) {
  return analysis_command(o, "backtest", [&](const ValidatedPanel& panel, const RunConfig& cfg) {
    return pipeline::write_backtest(o.dir, pipeline::run_backtest(panel, cfg), cfg);
  });
}

int cmd_robust(const Options& o) {
  return analysis_command(o, "robust", [&](const ValidatedPanel& panel, const RunConfig& cfg) {
    const auto run = pipeline::run_backtest(panel, cfg);
    return pipeline::write_robustness(o.dir, pipeline::run_robustness(run, cfg), cfg);
  });
}

int cmd_report(const Options& o) {
  const auto cfg = resolve_config(o);
  const auto recorded = manifest::entries(o.dir);
  if (recorded.empty()) {
    throw Error(ErrorCode::MissingArtifacts, "missing artifacts: no runs recorded in " + o.dir.string());
  }
  const auto check = manifest::verify(o.dir);
  if (!check.ok) {
    std::string msg = "missing artifacts: manifest verification failed";
    for (const auto& p : check.problems) msg += "\n  " + p;
    throw Error(ErrorCode::MissingArtifacts, msg);
  }
  Recorder rec(o, cfg, "report");
  const auto path = o.dir / "report.md";
  manifest::write_atomic(path, pipeline::render_report(o.dir));
  rec.outputs({path});
  rec.commit();
  announce({path});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"regimeflow: regime-aware order-flow signal research"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--dir", o.dir, "Run directory for artifacts and run.json")->capture_default_str();
    sub->add_option("--config", o.config_file, "INI configuration file");
    sub->add_option("--set", o.overrides, "Override a setting: section.key=value (repeatable)");
    sub->add_option("--threads", o.threads, "Worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);
  };

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic panel with planted truth");
  common(sim);
  sim->add_option("--stocks", o.stocks, "Number of stocks")->capture_default_str()->check(CLI::PositiveNumber);
  sim->add_option("--days", o.days, "Number of trading days")->capture_default_str()->check(CLI::Range(2, 1000000));
  sim->add_option("--idiosyncratic-ratio", o.idiosyncratic_ratio, "Stock-specific shock size relative to the market shock")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--size-elasticity", o.size_elasticity, "Signal strength decay with market cap")
      ->capture_default_str();

  auto* ing = app.add_subcommand("ingest", "Validate a panel CSV and build flow series");
  common(ing);
  ing->add_option("--panel", o.panel, "Panel CSV (default <dir>/panel.csv)");

  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Entry analyses[] = {
      {"filter", "Adaptive Kalman filtering of every flow series", cmd_filter},
      {"regime", "Three-state Markov-switching model of market returns", cmd_regime},
      {"asym", "Asymmetric shock-response regressions", cmd_asym},
      {"predict", "Raw vs filtered predictive regressions", cmd_predict},
      {"backtest", "Static Raw, Kalman Filtered and All-Weather strategies", cmd_backtest},
      {"robust", "Subperiod, size-quintile and bootstrap robustness", cmd_robust},
      {"report", "Verify artifacts and write report.md", cmd_report},
  };
  std::vector<std::pair<CLI::App*, int (*)(const Options&)>> handlers;
  handlers.emplace_back(sim, cmd_simulate);
  handlers.emplace_back(ing, cmd_ingest);
  for (const auto& e : analyses) {
    auto* sub = app.add_subcommand(e.name, e.help);
    common(sub);
    handlers.emplace_back(sub, e.run);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    for (const auto& [sub, run] : handlers) {
      if (sub->parsed()) return run(o);
    }
  } catch (const Error& e) {
    std::cerr << "regimeflow: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "regimeflow: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
