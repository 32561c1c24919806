#pragma once

// Reproducible experiments over the core library. A config (JSON file plus
// flag overrides) names one command; running it yields CSV rows, a few
// comment lines and a JSON summary for the metadata sidecar.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace treeglass::experiment {

inline constexpr const char* kSchemaLine = "# treeglass-schema v1";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class BetaMode { Critical, Explicit, Epsilon };

struct ExperimentConfig {
  std::string command;
  int b = 2;
  int h = 2;
  std::optional<int> h_min;
  std::optional<int> h_max;
  BetaMode beta_mode = BetaMode::Critical;
  double beta = 0.0;
  double epsilon = 0.0;
  std::vector<double> epsilons;  // sweep-beta grid
  // free | plus | minus | random | tau-file; empty means the command's default
  std::vector<std::string> boundaries;
  std::string tau_file;
  std::string dynamics = "single";  // single | block | speedup
  std::optional<double> alpha;
  std::optional<int> ell;
  std::optional<int> r;
  std::string mode = "exact";  // exact | mc
  int replicas = 50;
  std::uint64_t seed = 1;
  std::string out;
  double kappa = 1.0 / 96.0;
  int samples = 20000;          // mc draws per Delta estimate
  int schedule_length = 0;      // censoring; 0 means 2n
  std::string start = "plus";   // censoring start
};

nlohmann::json to_json(const ExperimentConfig& config);
// Unknown keys and ill-typed values raise ConfigError.
ExperimentConfig from_json(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);
void validate(const ExperimentConfig& config);

// Leaf spins, one '+' or '-' per line; blank lines and '#' comments skipped.
std::vector<int> read_tau_file(const std::string& path);

struct ExperimentResult {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;  // written after the rows, each prefixed "# "
  nlohmann::json summary = nlohmann::json::object();
  bool violation = false;  // some asserted inequality failed
};

// Throws ConfigError, treeglass::SizeGuardError or std::exception.
ExperimentResult run_experiment(const ExperimentConfig& config);

std::string render_csv(const ExperimentResult& result);

// Formatting used for every numeric cell.
std::string cell(double x);
std::string cell(long long x);
std::string cell(bool x);

}  // namespace treeglass::experiment
