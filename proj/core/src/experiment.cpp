#include "shellkoop/experiment.hpp"

#include <cstdio>
#include <ostream>

#include "json_io.hpp"

namespace shellkoop {

using detail::Json;
using nn::Matrix;

void ExperimentConfig::set_seed(std::uint64_t s) {
  seed = s;
  traffic.seed = s;
  gkae.seed = s;
  baseline.dense.seed = s;
}

void ExperimentConfig::validate() const {
  shell.validate();
  budget.validate();
  traffic.validate();
  if (total_steps < 10) throw ConfigError("traffic.total_steps", "must be >= 10");
  if (!(split_frac > 0.0 && split_frac < 1.0)) throw ConfigError("traffic.split_frac", "must lie in (0, 1)");
  gkae.validate();
  baseline.dense.validate();
  if (!(baseline.ridge_lambda > 0.0)) throw ConfigError("baseline.ridge_lambda", "must be > 0");
  controller.validate();
  if (paths.dataset.empty()) throw ConfigError("paths.dataset", "must not be empty");
  if (paths.model.empty()) throw ConfigError("paths.model", "must not be empty");
  if (paths.reports.empty()) throw ConfigError("paths.reports", "must not be empty");
}

namespace {

void reject_section_seed(const Json& j, const std::string& section) {
  if (j.contains("seed")) throw ConfigError(section + ".seed", "set the top-level seed instead");
}

template <typename T, typename Get>
void read_if(const Json& j, const char* key, const std::string& prefix, T& out, Get get) {
  if (j.contains(key)) out = static_cast<T>(get(j, key, prefix));
}

const Json& section(const Json& doc, const char* key) {
  const Json& j = doc.at(key);
  if (!j.is_object()) throw ConfigError(key, "expected an object");
  return j;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError("config", std::string("not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");
  detail::reject_unknown_keys(doc, {"shell", "budget", "traffic", "gkae", "baseline", "controller", "paths", "seed"},
                              "config");
  ExperimentConfig c;
  if (doc.contains("shell")) c.shell = detail::shell_from_json(section(doc, "shell"), "shell", false);
  if (doc.contains("budget")) c.budget = detail::budget_from_json(section(doc, "budget"), "budget", false);
  if (doc.contains("traffic")) {
    Json t = section(doc, "traffic");
    reject_section_seed(t, "traffic");
    read_if(t, "total_steps", "traffic", c.total_steps, detail::get_int);
    read_if(t, "split_frac", "traffic", c.split_frac, detail::get_double);
    t.erase("total_steps");
    t.erase("split_frac");
    c.traffic = detail::traffic_from_json(t, "traffic", false);
  }
  if (doc.contains("gkae")) {
    reject_section_seed(section(doc, "gkae"), "gkae");
    c.gkae = detail::gkae_from_json(section(doc, "gkae"), "gkae", false);
  }
  if (doc.contains("baseline")) {
    const Json& b = section(doc, "baseline");
    detail::reject_unknown_keys(b, {"hidden", "embed_dim", "lr", "epochs", "masked_training", "mask_rate",
                                    "ridge_lambda"},
                                "baseline");
    auto& d = c.baseline.dense;
    read_if(b, "hidden", "baseline", d.hidden, detail::get_int);
    read_if(b, "embed_dim", "baseline", d.embed_dim, detail::get_int);
    read_if(b, "lr", "baseline", d.lr, detail::get_double);
    read_if(b, "epochs", "baseline", d.epochs, detail::get_int);
    read_if(b, "masked_training", "baseline", d.masked_training, detail::get_bool);
    read_if(b, "mask_rate", "baseline", d.mask_rate, detail::get_double);
    read_if(b, "ridge_lambda", "baseline", c.baseline.ridge_lambda, detail::get_double);
  }
  if (doc.contains("controller")) {
    const Json& k = section(doc, "controller");
    detail::reject_unknown_keys(k, {"theta", "se_floor", "penalty"}, "controller");
    read_if(k, "theta", "controller", c.controller.theta, detail::get_double);
    read_if(k, "se_floor", "controller", c.controller.se_floor, detail::get_double);
    read_if(k, "penalty", "controller", c.controller.penalty, detail::get_double);
  }
  if (doc.contains("paths")) {
    const Json& p = section(doc, "paths");
    detail::reject_unknown_keys(p, {"dataset", "model", "reports"}, "paths");
    read_if(p, "dataset", "paths", c.paths.dataset, detail::get_string);
    read_if(p, "model", "paths", c.paths.model, detail::get_string);
    read_if(p, "reports", "paths", c.paths.reports, detail::get_string);
  }
  long long seed = 1;
  if (doc.contains("seed")) {
    seed = detail::get_int(doc, "seed", "config");
    if (seed < 0) throw ConfigError("seed", "must be >= 0");
  }
  c.set_seed(static_cast<std::uint64_t>(seed));
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("--config", e.what());
  }
  return parse_experiment_config(text);
}

void write_experiment_config(const ExperimentConfig& c, std::ostream& os) {
  Json traffic = detail::to_json(c.traffic);
  traffic.erase("seed");
  traffic["total_steps"] = c.total_steps;
  traffic["split_frac"] = c.split_frac;
  Json gkae = detail::to_json(c.gkae);
  gkae.erase("seed");
  const auto& d = c.baseline.dense;
  Json doc{{"shell", detail::to_json(c.shell)},
           {"budget", detail::to_json(c.budget)},
           {"traffic", traffic},
           {"gkae", gkae},
           {"baseline",
            {{"hidden", d.hidden},
             {"embed_dim", d.embed_dim},
             {"lr", d.lr},
             {"epochs", d.epochs},
             {"masked_training", d.masked_training},
             {"mask_rate", d.mask_rate},
             {"ridge_lambda", c.baseline.ridge_lambda}}},
           {"controller",
            {{"theta", c.controller.theta}, {"se_floor", c.controller.se_floor}, {"penalty", c.controller.penalty}}},
           {"paths", {{"dataset", c.paths.dataset}, {"model", c.paths.model}, {"reports", c.paths.reports}}},
           {"seed", c.seed}};
  os << doc.dump(2) << '\n';
}

Dataset generate_dataset(const ExperimentConfig& cfg) {
  return generate_dataset(cfg.shell, cfg.traffic, cfg.budget, cfg.total_steps, cfg.split_frac);
}

ForecastCurves evaluate_forecaster(const Dataset& ds, const Forecaster& f, int horizon) {
  if (horizon < 1) throw ConfigError("--horizon", "must be >= 1");
  const auto h = static_cast<std::size_t>(horizon);
  if (ds.split + h >= ds.size()) throw ConfigError("--horizon", "longer than the validation split");
  ForecastCurves out;
  out.queue.per_horizon.assign(h, 0.0);
  out.se.per_horizon.assign(h, 0.0);
  std::vector<Matrix> truth(h);
  for (std::size_t t = ds.split; t + h < ds.size(); ++t) {
    const auto pred = f(ds.snapshots[t], horizon);
    for (std::size_t k = 0; k < h; ++k) truth[k] = ds.snapshots[t + 1 + k].dynamic_channels();
    accumulate(out.queue, pred, truth, ChannelGroup::queue);
    accumulate(out.se, pred, truth, ChannelGroup::se);
    ++out.origins;
  }
  return out;
}

double masked_reconstruction_error(const Dataset& ds, const Reconstructor& r, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("--mask-rate", "must lie in [0, 1)");
  const auto val = ds.validation();
  double acc = 0.0;
  for (std::size_t k = 0; k < val.size(); ++k) {
    const Matrix truth = val[k].dynamic_channels();
    if (rate == 0.0) {
      acc += nn::mse(r(val[k]), truth).mse;
    } else {
      const GraphSnapshot masked = mask_features(val[k], rate, derive_seed(seed, k));
      acc += nn::mse(r(masked), truth, masked.mask).mse;
    }
  }
  return acc / static_cast<double>(val.size());
}

Forecaster forecaster_for(const GkaeModel& m) {
  return [&m](const GraphSnapshot& s, int h) { return m.predict(s, h); };
}

Forecaster forecaster_for(const RidgeForecaster& m) {
  return [&m](const GraphSnapshot& s, int h) { return m.forecast(s, h); };
}

Forecaster persistence_forecaster() { return [](const GraphSnapshot& s, int h) { return persistence_forecast(s, h); }; }

Reconstructor reconstructor_for(const GkaeModel& m) {
  return [&m](const GraphSnapshot& s) { return m.decode(m.encode(s).z); };
}

Reconstructor reconstructor_for(const DenseAeModel& m) {
  return [&m](const GraphSnapshot& s) { return m.reconstruct(s); };
}

std::string csv_schema_line(const std::string& kind) { return "# schema=1 " + kind; }

std::string format_improvement(const std::optional<double>& pct) {
  return pct ? detail::format_double(*pct) : std::string("undefined");
}

void write_forecast_csv(std::ostream& os, const ForecastCurves& model, const ForecastCurves& persistence,
                        const ForecastCurves& ridge) {
  os << csv_schema_line("forecast_sse") << '\n';
  os << "horizon_step,channel_group,sse_model,sse_persistence,sse_ridge,improvement_pct\n";
  const auto rows = [&](const char* group, const Metrics& m, const Metrics& p, const Metrics& r) {
    for (std::size_t k = 0; k < m.per_horizon.size(); ++k) {
      os << k + 1 << ',' << group << ',' << detail::format_double(m.per_horizon[k]) << ','
         << detail::format_double(p.per_horizon[k]) << ',' << detail::format_double(r.per_horizon[k]) << ','
         << format_improvement(improvement_pct(p.per_horizon[k], m.per_horizon[k])) << '\n';
    }
    os << "total," << group << ',' << detail::format_double(m.sse) << ',' << detail::format_double(p.sse) << ','
       << detail::format_double(r.sse) << ',' << format_improvement(improvement_pct(p.sse, m.sse)) << '\n';
  };
  rows("queue", model.queue, persistence.queue, ridge.queue);
  rows("se", model.se, persistence.se, ridge.se);
}

void write_masked_csv(std::ostream& os, const std::vector<MaskedRow>& rows) {
  os << csv_schema_line("masked_reconstruction") << '\n';
  os << "mask_rate,mse_gkae,mse_dense_ae,improvement_pct\n";
  for (const auto& r : rows) {
    os << detail::format_double(r.rate) << ',' << detail::format_double(r.gkae_error) << ','
       << detail::format_double(r.dense_error) << ','
       << format_improvement(improvement_pct(r.dense_error, r.gkae_error)) << '\n';
  }
}

}  // namespace shellkoop
