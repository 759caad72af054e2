#pragma once

#include <iosfwd>

#include "kst/harness.hpp"

namespace kst {

struct Config {
  std::size_t d = 1;
  std::size_t n = 1;
  double beta = 1.0;
  double Q = 1.0;
  double epsilon = 0.25;
  std::string target = "mean";
  std::optional<std::pair<Scalar, Scalar>> range;
  BuildOptions build;
  SuiteOptions verify;
};

Config config_from_json(const Json& j);
Config load_config(const std::string& path);
TargetOracle config_target(const Config& c);

// Whitespace-insensitive "a, b; c, d" (rows split by ';' or newlines).
ScalarMatrix parse_matrix(const std::string& text);
ScalarMatrix read_csv_matrix(const std::string& path);

// Each returns the process exit code: 0 ok, 1 verification failure,
// 2 usage, parse or cap error.
int cmd_synth(const std::string& config_path, const std::string& out_path, std::ostream& out, std::ostream& err);
int cmd_eval(const std::string& pipeline_path, const ScalarMatrix& x, Mode mode, std::ostream& out, std::ostream& err);
int cmd_verify(const std::string& config_path, const std::string& suite, const std::string& pipeline_path,
               const std::string& report_path, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace kst
