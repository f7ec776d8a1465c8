#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "shellkoop/baselines.hpp"
#include "shellkoop/controller.hpp"
#include "shellkoop/experiment.hpp"
#include "shellkoop/gkae.hpp"
#include "shellkoop/io.hpp"

namespace shellkoop::cli {

namespace fs = std::filesystem;

unsigned thread_cap() {
  const char* env = std::getenv("SHELLKOOP_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 1) throw ConfigError("SHELLKOOP_THREADS", "must be a positive integer");
  return static_cast<unsigned>(v);
}

namespace {

ExperimentConfig load_config(const Options& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_experiment_config(o.config);
  if (o.seed) cfg.set_seed(*o.seed);
  cfg.validate();
  return cfg;
}

std::string dataset_path(const Options& o, const ExperimentConfig& cfg) {
  return o.dataset.empty() ? cfg.paths.dataset : o.dataset;
}

int horizon_of(const Options& o, const ExperimentConfig& cfg) {
  const int h = o.horizon.value_or(cfg.gkae.eval_horizon);
  if (h < 1) throw ConfigError("--horizon", "must be >= 1");
  return h;
}

void check_shell(const ShellConfig& model_shell, const Dataset& ds, const std::string& what) {
  if (!(model_shell == ds.shell)) {
    throw ConfigError(what, "model shell fingerprint differs from the dataset shell");
  }
}

std::string train_csv(const TrainReport& r) {
  std::ostringstream os;
  os << csv_schema_line("train_report") << '\n';
  r.write_csv(os);
  return os.str();
}

fs::path sibling(const fs::path& model, const std::string& suffix) {
  fs::path p = model;
  p.replace_extension();
  p += suffix;
  return p;
}

/// Runs independent jobs on up to `cap` threads; rethrows the first failure in job order.
void run_jobs(std::vector<std::function<void()>> jobs, unsigned cap) {
  std::vector<std::exception_ptr> errors(jobs.size());
  std::size_t next = 0;
  while (next < jobs.size()) {
    std::vector<std::thread> batch;
    for (unsigned k = 0; k < cap && next < jobs.size(); ++k, ++next) {
      batch.emplace_back([&, i = next] {
        try {
          jobs[i]();
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : batch) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string parameter_counts_csv(const ExperimentConfig& cfg, const Dataset& ds) {
  const GkaeModel gkae(cfg.gkae, ds.shell, ds.buffer_B, ds.se_max);
  GkaeConfig matched = cfg.gkae;
  matched.hidden = cfg.baseline.dense.hidden;
  matched.embed_dim = cfg.baseline.dense.embed_dim;
  const GkaeModel gkae_matched(matched, ds.shell, ds.buffer_B, ds.se_max);
  const DenseAeModel dense(cfg.baseline.dense, ds.shell, ds.buffer_B, ds.se_max);
  std::ostringstream os;
  os << csv_schema_line("parameter_counts") << '\n';
  os << "model,num_nodes,hidden,embed_dim,trainable_parameters\n";
  os << "gkae," << ds.shell.size() << ',' << cfg.gkae.hidden << ',' << cfg.gkae.embed_dim << ','
     << param_count(gkae) << '\n';
  os << "gkae_matched," << ds.shell.size() << ',' << matched.hidden << ',' << matched.embed_dim << ','
     << param_count(gkae_matched) << '\n';
  os << "dense_ae," << ds.shell.size() << ',' << cfg.baseline.dense.hidden << ',' << cfg.baseline.dense.embed_dim
     << ',' << param_count(dense) << '\n';
  return os.str();
}

void print_forecast_summary(const ForecastCurves& g, const ForecastCurves& p, const ForecastCurves& r) {
  std::printf("origins %zu\n", g.origins);
  std::printf("queue SSE  gkae %.6g  persistence %.6g  ridge %.6g  improvement %s%%\n", g.queue.sse, p.queue.sse,
              r.queue.sse, format_improvement(improvement_pct(p.queue.sse, g.queue.sse)).c_str());
  std::printf("se    SSE  gkae %.6g  persistence %.6g  ridge %.6g  improvement %s%%\n", g.se.sse, p.se.sse, r.se.sse,
              format_improvement(improvement_pct(p.se.sse, g.se.sse)).c_str());
}

std::vector<double> mask_rates(const Options& o) {
  if (o.mask_rate) return {*o.mask_rate};
  return {0.0, 0.1, 0.3, 0.5, 0.7};
}

std::vector<MaskedRow> masked_rows(const Dataset& ds, const GkaeModel& g, const DenseAeModel& d,
                                   const std::vector<double>& rates, std::uint64_t seed) {
  std::vector<MaskedRow> rows;
  for (double rate : rates) {
    rows.push_back({rate, masked_reconstruction_error(ds, reconstructor_for(g), rate, seed),
                    masked_reconstruction_error(ds, reconstructor_for(d), rate, seed)});
  }
  return rows;
}

struct ControllerRun {
  Dataset ds;
  GlobalView view;
  std::size_t at = 0;
};

ControllerRun controller_forecast(const Options& o, const ExperimentConfig& cfg) {
  ControllerRun run{load_dataset(dataset_path(o, cfg)), {}, 0};
  auto model = std::make_shared<const GkaeModel>(load_model(o.models.empty() ? cfg.paths.model : o.models.front()));
  check_shell(model->shell(), run.ds, "--model");
  const int at = o.at.value_or(static_cast<int>(run.ds.size()) - 1);
  if (at < 0 || at >= static_cast<int>(run.ds.size())) throw ConfigError("--at", "snapshot index out of range");
  run.at = static_cast<std::size_t>(at);
  Controller controller;
  controller.register_shell("shell0", run.ds.shell, model);
  controller.ingest("shell0", run.ds.snapshots[run.at]);
  run.view = controller.forecast_all(horizon_of(o, cfg));
  return run;
}

}  // namespace

int cmd_config(const Options& o) {
  std::ostringstream os;
  write_experiment_config(load_config(o), os);
  if (o.out.empty()) {
    std::cout << os.str();
  } else {
    write_file_atomic(o.out, os.str());
  }
  return kOk;
}

int cmd_generate(const Options& o) {
  const ExperimentConfig cfg = load_config(o);
  const Dataset ds = generate_dataset(cfg);
  const fs::path out = o.out.empty() ? fs::path(cfg.paths.dataset) : fs::path(o.out);
  std::ostringstream os;
  write_dataset(ds, os);
  write_file_atomic(out, os.str());
  std::printf("N %d\nT_total %zu\nsplit %zu\nbytes %zu\npath %s\n", ds.shell.size(), ds.size(), ds.split,
              os.str().size(), out.string().c_str());
  return kOk;
}

int cmd_train(const Options& o) {
  ExperimentConfig cfg = load_config(o);
  const Dataset ds = load_dataset(dataset_path(o, cfg));
  const fs::path out = o.out.empty() ? fs::path(cfg.paths.model) : fs::path(o.out);
  if (o.mask_rate) {
    cfg.gkae.masked_training = cfg.baseline.dense.masked_training = true;
    cfg.gkae.mask_rate = cfg.baseline.dense.mask_rate = *o.mask_rate;
    cfg.validate();
  }
  std::ostringstream model_text;
  if (o.model_kind == "gkae") {
    const TrainResult r = train(ds, cfg.gkae);
    write_model(r.model, model_text);
    write_file_atomic(sibling(out, ".train.csv"), train_csv(r.report));
    std::printf("epochs %zu\nfinal_total %.6g\nspectral_radius %.6g\nparameters %zu\nwall_time_s %.3f\n",
                r.report.epochs.size(), r.report.epochs.empty() ? 0.0 : r.report.epochs.back().total,
                r.report.spectral_radius, r.report.parameter_count, r.report.wall_time_s);
  } else if (o.model_kind == "dense_ae") {
    const DenseAeTrainResult r = train_dense_ae(ds, cfg.baseline.dense);
    write_dense_ae(r.model, model_text);
    write_file_atomic(sibling(out, ".train.csv"), train_csv(r.report));
    std::printf("epochs %zu\nfinal_recon %.6g\nparameters %zu\nwall_time_s %.3f\n", r.report.epochs.size(),
                r.report.epochs.empty() ? 0.0 : r.report.epochs.back().recon, r.report.parameter_count,
                r.report.wall_time_s);
  } else if (o.model_kind == "ridge") {
    const RidgeForecaster r = RidgeForecaster::train(ds, cfg.baseline.ridge_lambda);
    write_ridge(r, model_text);
    std::printf("lambda %.6g\nparameters %zu\n", r.lambda(), r.weights().size());
  } else {
    throw ConfigError("--model-kind", "persistence has no parameters to train");
  }
  write_file_atomic(out, model_text.str());
  std::printf("checkpoint %s\n", out.string().c_str());
  return kOk;
}

int cmd_evaluate(const Options& o) {
  const ExperimentConfig cfg = load_config(o);
  const Dataset ds = load_dataset(dataset_path(o, cfg));
  const int horizon = horizon_of(o, cfg);
  const fs::path out = o.out.empty() ? fs::path(cfg.paths.reports) : fs::path(o.out);

  std::optional<GkaeModel> gkae;
  std::optional<DenseAeModel> dense;
  std::optional<RidgeForecaster> ridge;
  for (const auto& path : o.models) {
    const std::string kind = checkpoint_kind(path);
    if (kind == "gkae") {
      gkae = load_model(path);
      check_shell(gkae->shell(), ds, path);
    } else if (kind == "dense_ae") {
      dense = load_dense_ae(path);
      check_shell(dense->shell(), ds, path);
    } else if (kind == "ridge") {
      ridge = load_ridge(path);
      check_shell(ridge->shell(), ds, path);
    } else {
      throw ConfigError(path, "unknown checkpoint kind '" + kind + "'");
    }
  }
  if (!gkae) throw ConfigError("--model", "a gkae checkpoint is required");
  if (!ridge) ridge = RidgeForecaster::train(ds, cfg.baseline.ridge_lambda);

  const ForecastCurves g = evaluate_forecaster(ds, forecaster_for(*gkae), horizon);
  const ForecastCurves p = evaluate_forecaster(ds, persistence_forecaster(), horizon);
  const ForecastCurves r = evaluate_forecaster(ds, forecaster_for(*ridge), horizon);
  std::ostringstream fc;
  write_forecast_csv(fc, g, p, r);
  write_file_atomic(out / "forecast_sse.csv", fc.str());
  print_forecast_summary(g, p, r);

  if (dense) {
    const auto rows = masked_rows(ds, *gkae, *dense, mask_rates(o), cfg.seed);
    std::ostringstream mc;
    write_masked_csv(mc, rows);
    write_file_atomic(out / "masked_reconstruction.csv", mc.str());
    for (const auto& row : rows) {
      std::printf("mask %.2f  gkae %.6g  dense_ae %.6g\n", row.rate, row.gkae_error, row.dense_error);
    }
  } else {
    std::printf("no dense_ae checkpoint given; masked reconstruction table skipped\n");
  }
  write_file_atomic(out / "parameter_counts.csv", parameter_counts_csv(cfg, ds));
  std::printf("reports %s\n", out.string().c_str());
  return kOk;
}

int cmd_forecast(const Options& o) {
  const ExperimentConfig cfg = load_config(o);
  const ControllerRun run = controller_forecast(o, cfg);
  const auto flags = detect_congestion(run.view, cfg.controller.theta);
  const fs::path out = o.out.empty() ? fs::path(cfg.paths.reports) : fs::path(o.out);
  std::ostringstream view, fl;
  write_global_view(run.view, view);
  write_flags(flags, cfg.controller.theta, fl);
  write_file_atomic(out / "global_view.json", view.str());
  write_file_atomic(out / "congestion_flags.json", fl.str());
  std::printf("ingested snapshot %zu (t = %.1f s)\nhorizon %d\ncongestion flags %zu\nreports %s\n", run.at,
              run.ds.snapshots[run.at].t, run.view.horizon, flags.size(), out.string().c_str());
  return kOk;
}

int cmd_plan(const Options& o) {
  const ExperimentConfig cfg = load_config(o);
  if (o.src == o.dst) throw ConfigError("--dst", "source and destination must differ");
  const ControllerRun run = controller_forecast(o, cfg);
  const int n = run.ds.shell.size();
  if (o.src < 0 || o.src >= n) throw ConfigError("--src", "must lie in [0, " + std::to_string(n) + ")");
  if (o.dst < 0 || o.dst >= n) throw ConfigError("--dst", "must lie in [0, " + std::to_string(n) + ")");
  if (o.step < 1 || o.step > run.view.horizon) throw ConfigError("--step", "must lie in [1, horizon]");
  const auto plan = plan_route(run.view, "shell0", o.src, o.dst, o.step, cfg.controller);
  const fs::path out = o.out.empty() ? fs::path(cfg.paths.reports) : fs::path(o.out);
  std::ostringstream os;
  write_route(plan, "shell0", o.src, o.dst, o.step, os);
  write_file_atomic(out / "route_plan.json", os.str());
  if (!plan) {
    std::printf("unreachable: every path from %d to %d crosses a predicted-inactive link at step %d\n", o.src, o.dst,
                o.step);
    return kUnreachable;
  }
  std::printf("route");
  for (int v : plan->nodes) std::printf(" %d", v);
  std::printf("\ncost %.6g\n", plan->cost);
  return kOk;
}

int cmd_report(const Options& o) {
  ExperimentConfig cfg = load_config(o);
  const fs::path out = o.out.empty() ? fs::path(cfg.paths.reports) : fs::path(o.out);
  const int horizon = horizon_of(o, cfg);
  const double rate = o.mask_rate.value_or(0.5);

  const Dataset ds = generate_dataset(cfg);
  {
    std::ostringstream os;
    write_dataset(ds, os);
    write_file_atomic(out / "dataset.jsonl", os.str());
  }

  GkaeConfig masked_gkae = cfg.gkae;
  masked_gkae.masked_training = true;
  masked_gkae.mask_rate = rate;
  DenseAeConfig masked_dense = cfg.baseline.dense;
  masked_dense.masked_training = true;
  masked_dense.mask_rate = rate;

  std::optional<TrainResult> forecast_model, masked_model;
  std::optional<DenseAeTrainResult> dense_model;
  std::optional<RidgeForecaster> ridge;
  run_jobs({[&] { forecast_model = train(ds, cfg.gkae); },
            [&] { masked_model = train(ds, masked_gkae); },
            [&] { dense_model = train_dense_ae(ds, masked_dense); },
            [&] { ridge = RidgeForecaster::train(ds, cfg.baseline.ridge_lambda); }},
           thread_cap());

  save_model(forecast_model->model, out / "gkae.json");
  save_model(masked_model->model, out / "gkae_masked.json");
  save_dense_ae(dense_model->model, out / "dense_ae_masked.json");
  save_ridge(*ridge, out / "ridge.json");
  write_file_atomic(out / "gkae.train.csv", train_csv(forecast_model->report));
  write_file_atomic(out / "gkae_masked.train.csv", train_csv(masked_model->report));
  write_file_atomic(out / "dense_ae_masked.train.csv", train_csv(dense_model->report));

  const ForecastCurves g = evaluate_forecaster(ds, forecaster_for(forecast_model->model), horizon);
  const ForecastCurves p = evaluate_forecaster(ds, persistence_forecaster(), horizon);
  const ForecastCurves r = evaluate_forecaster(ds, forecaster_for(*ridge), horizon);
  std::ostringstream fc;
  write_forecast_csv(fc, g, p, r);
  write_file_atomic(out / "forecast_sse.csv", fc.str());
  print_forecast_summary(g, p, r);

  const auto rows = masked_rows(ds, masked_model->model, dense_model->model, mask_rates(Options{}), cfg.seed);
  std::ostringstream mc;
  write_masked_csv(mc, rows);
  write_file_atomic(out / "masked_reconstruction.csv", mc.str());
  for (const auto& row : rows) {
    std::printf("mask %.2f  gkae %.6g  dense_ae %.6g\n", row.rate, row.gkae_error, row.dense_error);
  }
  write_file_atomic(out / "parameter_counts.csv", parameter_counts_csv(cfg, ds));
  std::printf("spectral_radius %.6g\nreports %s\n", forecast_model->report.spectral_radius, out.string().c_str());
  return kOk;
}

}  // namespace shellkoop::cli
