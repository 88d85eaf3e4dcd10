// tsgbm command-line driver.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tsgbm/pipeline.hpp"

namespace fs = std::filesystem;
using namespace tsgbm;

namespace {

struct Flags {
  std::string config;
  std::string data;
  std::string dataset;
  std::string target;
  std::string out;
  std::string params;
  std::string model;
  int trials = -1;
  long long seed = -1;
  int threads = -1;
  bool full_stats = false;
  bool allow_nonstationary = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--data", f.data, "OHLCV CSV (Date,Open,High,Low,Close,Volume)");
  cmd->add_option("--dataset", f.dataset, "DS1, DS2, DS3 or DS4");
  cmd->add_option("--target-transform", f.target,
                  "returns, log_returns, ema_ratio, ema_diff_ratio, std_returns, std_log_returns, std_ema_ratio");
  cmd->add_option("--trials", f.trials, "random-search trials");
  cmd->add_option("--seed", f.seed, "seed for search and boosting");
  cmd->add_option("--threads", f.threads, "worker threads for tuning (0 = all cores)");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--full-stats", f.full_stats, "fit standardization and outlier fences on all rows");
  cmd->add_flag("--allow-nonstationary", f.allow_nonstationary, "continue when the stationarity gate fails");
}

// Precedence: defaults < config file < TSGBM_* environment < flags.
pipeline::RunConfig resolve(const Flags& f) {
  pipeline::RunConfig cfg;
  if (!f.config.empty()) cfg = pipeline::load_config(f.config, cfg);
  cfg = pipeline::apply_env(cfg);
  if (!f.data.empty()) cfg.data_path = f.data;
  if (!f.dataset.empty()) cfg.dataset = features::parse_dataset(f.dataset);
  if (!f.target.empty()) cfg.target = transforms::parse_target_method(f.target);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.trials >= 0) cfg.trials = f.trials;
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  if (f.threads >= 0) cfg.threads = static_cast<unsigned>(f.threads);
  if (f.full_stats) cfg.factory.full_stats = true;
  if (f.allow_nonstationary) cfg.factory.allow_nonstationary = true;
  cfg.validate();
  return cfg;
}

Frame load_frame(const pipeline::RunConfig& cfg) {
  if (cfg.data_path.empty()) throw Error(Errc::invalid_argument, "--data is required");
  return shift_prev(load_bars(cfg.data_path));
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + p.string());
  return out;
}

void print_metrics(const evaluation::EvalReport& r) {
  std::printf("mae=%.6g rmse=%.6g da=%.4f rw_mae=%.6g rw_rmse=%.6g mae_vs_rw=%.2f%% train_seconds=%.3f\n", r.mae,
              r.rmse, r.da, r.rw_mae, r.rw_rmse, r.vs_rw.mae, r.train_seconds);
}

int cmd_ingest(const Flags& f) {
  const auto cfg = resolve(f);
  if (cfg.data_path.empty()) throw Error(Errc::invalid_argument, "--data is required");
  const auto bars = load_bars(cfg.data_path);
  const fs::path out = fs::path(cfg.out_dir) / "bars.csv";
  auto os = open_out(out);
  write_bars(os, bars);
  std::printf("ingested %zu bars (%s .. %s) -> %s\n", bars.size(), format_date(bars.front().date).c_str(),
              format_date(bars.back().date).c_str(), out.string().c_str());
  return 0;
}

int cmd_features(const Flags& f) {
  const auto cfg = resolve(f);
  const Frame base = load_frame(cfg);
  const auto ds = features::assemble_dataset(cfg.dataset, base, cfg.factory);
  const fs::path dir(cfg.out_dir);
  auto fo = open_out(dir / "features.csv");
  write_frame_csv(fo, ds.features);
  auto go = open_out(dir / "stationarity.csv");
  stationarity::write_gate_csv(go, ds.gate);
  for (const auto& w : ds.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  std::printf("%s: %zu columns, usable rows [%zu, %zu), %zu gate failures\n",
              std::string(features::dataset_name(ds.id)).c_str(), ds.features.cols(), ds.usable.begin, ds.usable.end,
              ds.gate.failures().size());
  return 0;
}

int cmd_stationarity(const Flags& f) {
  auto cfg = resolve(f);
  cfg.factory.allow_nonstationary = true;
  const Frame base = load_frame(cfg);
  const auto ds = features::assemble_dataset(cfg.dataset, base, cfg.factory);
  auto go = open_out(fs::path(cfg.out_dir) / "stationarity.csv");
  stationarity::write_gate_csv(go, ds.gate);
  const auto failed = ds.gate.failures();
  for (const auto* e : failed) std::printf("fail %s adf=%g kpss=%g\n", e->column.c_str(), e->adf_stat, e->kpss_stat);
  std::printf("%zu of %zu columns pass\n", ds.gate.entries.size() - failed.size(), ds.gate.entries.size());
  if (!failed.empty() && !f.allow_nonstationary)
    throw Error(Errc::nonstationary, std::to_string(failed.size()) + " column(s) failed the stationarity gate");
  return 0;
}

int cmd_tune(const Flags& f) {
  const auto cfg = resolve(f);
  const Frame base = load_frame(cfg);
  const auto p = pipeline::prepare(cfg, base);
  const auto res = pipeline::tune(p, cfg);
  const fs::path dir(cfg.out_dir);
  auto lo = open_out(dir / "ledger.csv");
  cv::write_ledger(lo, res);
  pipeline::write_text(dir / "best_params.json", gbdt::params_to_json(pipeline::refit_params(res)).dump(2) + "\n");
  std::printf("best trial %zu mean_loss=%.6g\n", res.best, res.trials[res.best].mean_loss);
  return 0;
}

int cmd_train(const Flags& f) {
  const auto cfg = resolve(f);
  const Frame base = load_frame(cfg);
  const auto p = pipeline::prepare(cfg, base);
  const fs::path dir(cfg.out_dir);
  gbdt::BoostParams params;
  if (!f.params.empty()) {
    std::ifstream in(f.params);
    if (!in) throw Error(Errc::io, "cannot open " + f.params);
    params = gbdt::params_from_json(nlohmann::json::parse(in), cfg.base_params);
  } else {
    const auto res = pipeline::tune(p, cfg);
    auto lo = open_out(dir / "ledger.csv");
    cv::write_ledger(lo, res);
    params = pipeline::refit_params(res);
  }
  const auto trained = pipeline::final_train(p, params);
  fs::create_directories(dir);
  gbdt::save(trained.model, (dir / "model.json").string(), pipeline::pipeline_json(cfg, p));
  const auto report = evaluation::build_report(pipeline::test_range(p, trained.model), p.spec,
                                               gbdt::feature_importance(trained.model), trained.seconds);
  evaluation::write_report(report, dir);
  print_metrics(report);
  return 0;
}

int cmd_evaluate(const Flags& f) {
  if (f.model.empty()) throw Error(Errc::invalid_argument, "--model is required");
  nlohmann::json pj;
  const auto model = gbdt::load(f.model, &pj);
  const auto cfg = pipeline::config_from_pipeline(pj, resolve(f));
  const Frame base = load_frame(cfg);
  const auto p = pipeline::prepare(cfg, base);
  gbdt::resolve_columns(model, p.x);
  const auto report = evaluation::build_report(pipeline::test_range(p, model), model.target_spec,
                                               gbdt::feature_importance(model), 0.0);
  evaluation::write_report(report, cfg.out_dir);
  print_metrics(report);
  return 0;
}

int cmd_matrix(const Flags& f) {
  const auto cfg = resolve(f);
  const Frame base = load_frame(cfg);
  const auto rows = pipeline::run_matrix(cfg, base, [](const std::string& m) {
    std::fprintf(stderr, "running %s\n", m.c_str());
  });
  std::printf("%-38s %12s %8s %10s %10s\n", "method", "train_s", "DA", "MAE", "RMSE");
  for (const auto& r : rows)
    std::printf("%-38s %12.3f %7.2f%% %10.5g %10.5g\n", r.method.c_str(), r.train_seconds, 100.0 * r.da, r.mae,
                r.rmse);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-boosted next-day close forecasting"};
  app.require_subcommand(1);
  Flags f;
  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const Flags&);
  };
  const Sub subs[] = {{"ingest", "validate an OHLCV CSV and write a normalized copy", cmd_ingest},
                      {"features", "assemble a dataset and export the feature matrix", cmd_features},
                      {"stationarity", "run the ADF/KPSS gate over DS1 columns", cmd_stationarity},
                      {"tune", "random search over rolling folds", cmd_tune},
                      {"train", "tune (or load params), refit and score the holdout", cmd_train},
                      {"evaluate", "score a saved model on the holdout", cmd_evaluate},
                      {"matrix", "run all nine configurations plus the random walk", cmd_matrix}};
  std::vector<std::pair<CLI::App*, int (*)(const Flags&)>> cmds;
  for (const auto& s : subs) {
    CLI::App* c = app.add_subcommand(s.name, s.help);
    add_common(c, f);
    if (std::string(s.name) == "train") c->add_option("--params", f.params, "best_params.json from tune");
    if (std::string(s.name) == "evaluate") c->add_option("--model", f.model, "model.json from train")->required();
    cmds.emplace_back(c, s.run);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error:invalid_argument: %s\n", e.what());
    return 2;
  }
  try {
    for (const auto& [c, run] : cmds)
      if (c->parsed()) return run(f);
  } catch (const Error& e) {
    std::fprintf(stderr, "error:%s: %s\n", std::string(errc_name(e.code())).c_str(), e.what());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error:invalid_argument: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error:internal: %s\n", e.what());
    return 1;
  }
  return 1;
}
