#include <cstdio>
#include <exception>
#include <functional>

#include "CLI11.hpp"
#include "commands.hpp"
#include "shellkoop/common.hpp"

using namespace shellkoop;

namespace {

void add_common(CLI::App* sub, cli::Options& o) {
  sub->add_option("--config", o.config, "experiment config JSON (defaults when omitted)");
  sub->add_option("--seed", o.seed, "override the config seed");
  sub->add_option("--out", o.out, "output path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shellkoop: Walker-shell Koopman forecasting and proactive routing"};
  app.require_subcommand(1);
  cli::Options o;
  std::function<int(const cli::Options&)> run;

  auto* config = app.add_subcommand("config", "print the full default config");
  add_common(config, o);
  config->callback([&] { run = cli::cmd_config; });

  auto* gen = app.add_subcommand("generate", "simulate the shell and write a dataset file");
  add_common(gen, o);
  gen->callback([&] { run = cli::cmd_generate; });

  auto* train = app.add_subcommand("train", "train a model and write its checkpoint and loss CSV");
  add_common(train, o);
  train->add_option("--dataset", o.dataset, "dataset file (default paths.dataset)");
  train->add_option("--model-kind", o.model_kind, "gkae | dense_ae | ridge | persistence")
      ->check(CLI::IsMember({"gkae", "dense_ae", "ridge", "persistence"}));
  train->add_option("--mask-rate", o.mask_rate, "enable masked-reconstruction training at this rate");
  train->callback([&] { run = cli::cmd_train; });

  auto* eval = app.add_subcommand("evaluate", "forecast SSE curves, masked reconstruction, parameter counts");
  add_common(eval, o);
  eval->add_option("--dataset", o.dataset, "dataset file (default paths.dataset)");
  eval->add_option("--model", o.models, "checkpoint(s); kind read from the file")->expected(1, -1);
  eval->add_option("--horizon", o.horizon, "forecast horizon (default gkae.eval_horizon)");
  eval->add_option("--mask-rate", o.mask_rate, "single mask rate instead of the 0/0.1/0.3/0.5/0.7 sweep");
  eval->callback([&] { run = cli::cmd_evaluate; });

  auto* fc = app.add_subcommand("forecast", "controller forecast and congestion flags as JSON");
  add_common(fc, o);
  fc->add_option("--dataset", o.dataset, "dataset file (default paths.dataset)");
  fc->add_option("--model", o.models, "GKAE checkpoint (default paths.model)")->expected(0, 1);
  fc->add_option("--horizon", o.horizon, "forecast horizon (default gkae.eval_horizon)");
  fc->add_option("--at", o.at, "snapshot index to ingest (default: last)");
  fc->callback([&] { run = cli::cmd_forecast; });

  auto* plan = app.add_subcommand("plan", "plan a route on forecast link weights");
  add_common(plan, o);
  plan->add_option("--dataset", o.dataset, "dataset file (default paths.dataset)");
  plan->add_option("--model", o.models, "GKAE checkpoint (default paths.model)")->expected(0, 1);
  plan->add_option("--horizon", o.horizon, "forecast horizon (default gkae.eval_horizon)");
  plan->add_option("--at", o.at, "snapshot index to ingest (default: last)");
  plan->add_option("--src", o.src, "source satellite flat id")->required();
  plan->add_option("--dst", o.dst, "destination satellite flat id")->required();
  plan->add_option("--step", o.step, "forecast step to plan on (1-based)");
  plan->callback([&] { run = cli::cmd_plan; });

  auto* report = app.add_subcommand("report", "generate, train every model, and write all report CSVs");
  add_common(report, o);
  report->add_option("--horizon", o.horizon, "forecast horizon (default gkae.eval_horizon)");
  report->add_option("--mask-rate", o.mask_rate, "masked-training rate for the reconstruction comparison (default 0.5)");
  report->callback([&] { run = cli::cmd_report; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  try {
    return run(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return cli::kConfigError;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return cli::kConfigError;
  } catch (const DivergenceError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return cli::kDivergence;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return cli::kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return cli::kFailure;
  }
}
