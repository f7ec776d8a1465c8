#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shellkoop::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kDivergence = 3, kUnreachable = 4 };

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> horizon;
  std::optional<double> mask_rate;
  std::string model_kind = "gkae";
  std::string dataset;
  std::vector<std::string> models;
  int src = -1;
  int dst = -1;
  int step = 1;
  std::optional<int> at;
};

int cmd_config(const Options& o);
int cmd_generate(const Options& o);
int cmd_train(const Options& o);
int cmd_evaluate(const Options& o);
int cmd_forecast(const Options& o);
int cmd_plan(const Options& o);
int cmd_report(const Options& o);

/// SHELLKOOP_THREADS, at least 1; 1 when unset.
unsigned thread_cap();

}  // namespace shellkoop::cli
