// treeglass command-line harness. Exit codes: 0 ok, 2 config error,
// 3 size guard, 4 an asserted inequality failed, 1 anything else.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "experiment.hpp"
#include "treeglass/tree.hpp"

namespace ex = treeglass::experiment;

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"treeglass: Glauber dynamics for the Ising model on b-ary trees"};
  app.set_help_flag("--help", "print this help");
  app.set_version_flag("--version", std::string(TREEGLASS_VERSION));

  std::string command;
  std::string config_path;
  int b = 0, h = 0, h_min = 0, h_max = 0, replicas = 0, ell = 0, r = 0, samples = 0, schedule_length = 0;
  double beta = 0, epsilon = 0, alpha = 0, kappa = 0;
  std::vector<double> epsilons;
  std::string boundary, tau_file, dynamics, mode, out, start;
  std::uint64_t seed = 0;
  bool critical = false;

  app.add_option("command", command, "exact-gap | sweep-height | sweep-beta | spatial-mixing | censoring | blockdyn")
      ->required();
  app.add_option("--config", config_path, "JSON config file; flags override its keys");
  auto* o_b = app.add_option("--b", b, "branching number");
  auto* o_h = app.add_option("--h", h, "height");
  auto* o_hmin = app.add_option("--h-min", h_min, "smallest height of a sweep");
  auto* o_hmax = app.add_option("--h-max", h_max, "largest height of a sweep");
  auto* o_beta = app.add_option("--beta", beta, "inverse temperature");
  auto* o_crit = app.add_flag("--critical", critical, "beta = atanh(1/sqrt(b))");
  auto* o_eps = app.add_option("--epsilon", epsilon, "theta = sqrt((1+eps)/b)");
  auto* o_epss = app.add_option("--epsilons", epsilons, "epsilon grid for sweep-beta")->delimiter(',');
  auto* o_bnd = app.add_option("--boundary", boundary, "free | plus | minus | random | tau-file, comma separated");
  auto* o_tau = app.add_option("--tau-file", tau_file, "leaf spins, one + or - per line in breadth-first order");
  auto* o_dyn = app.add_option("--dynamics", dynamics, "single | block | speedup");
  auto* o_alpha = app.add_option("--alpha", alpha, "block parameter, ell = floor(alpha h)");
  auto* o_ell = app.add_option("--ell", ell, "block parameter ell");
  auto* o_r = app.add_option("--r", r, "block parameter r");
  auto* o_mode = app.add_option("--mode", mode, "exact | mc");
  auto* o_rep = app.add_option("--replicas", replicas, "replicas, random boundaries or schedule pairs");
  auto* o_seed = app.add_option("--seed", seed, "master seed");
  auto* o_out = app.add_option("--out", out, "CSV path; a .meta.json sidecar is written next to it");
  auto* o_kappa = app.add_option("--kappa", kappa, "constant in the spatial-mixing inequalities");
  auto* o_samples = app.add_option("--samples", samples, "Monte Carlo draws per estimate");
  auto* o_len = app.add_option("--schedule-length", schedule_length, "censoring schedule length (0: 2n)");
  auto* o_start = app.add_option("--start", start, "censoring start, plus | minus");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  ex::ExperimentConfig cfg;
  if (!config_path.empty()) cfg = ex::load_config_file(config_path);
  cfg.command = command;
  if (o_b->count()) cfg.b = b;
  if (o_h->count()) cfg.h = h;
  if (o_hmin->count()) cfg.h_min = h_min;
  if (o_hmax->count()) cfg.h_max = h_max;
  const int beta_flags = static_cast<int>(o_beta->count() > 0) + static_cast<int>(o_crit->count() > 0) +
                         static_cast<int>(o_eps->count() > 0);
  if (beta_flags > 1) throw ex::ConfigError("--beta, --critical and --epsilon are exclusive");
  if (o_beta->count()) {
    cfg.beta_mode = ex::BetaMode::Explicit;
    cfg.beta = beta;
  }
  if (o_crit->count()) cfg.beta_mode = ex::BetaMode::Critical;
  if (o_eps->count()) {
    cfg.beta_mode = ex::BetaMode::Epsilon;
    cfg.epsilon = epsilon;
  }
  if (o_epss->count()) cfg.epsilons = epsilons;
  if (o_bnd->count()) cfg.boundaries = split_commas(boundary);
  if (o_tau->count()) {
    cfg.tau_file = tau_file;
    if (!o_bnd->count()) cfg.boundaries = {"tau-file"};
  }
  if (o_dyn->count()) cfg.dynamics = dynamics;
  if (o_alpha->count()) cfg.alpha = alpha;
  if (o_ell->count()) cfg.ell = ell;
  if (o_r->count()) cfg.r = r;
  if (o_mode->count()) cfg.mode = mode;
  if (o_rep->count()) cfg.replicas = replicas;
  if (o_seed->count()) cfg.seed = seed;
  if (o_out->count()) cfg.out = out;
  if (o_kappa->count()) cfg.kappa = kappa;
  if (o_samples->count()) cfg.samples = samples;
  if (o_len->count()) cfg.schedule_length = schedule_length;
  if (o_start->count()) cfg.start = start;

  const auto t0 = std::chrono::steady_clock::now();
  const ex::ExperimentResult result = ex::run_experiment(cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const std::string csv = ex::render_csv(result);
  const int code = result.violation ? 4 : 0;

  if (cfg.out.empty()) {
    std::cout << csv;
  } else {
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw ex::ConfigError(fmt::format("cannot write '{}'", cfg.out));
    f << csv;
    nlohmann::json meta;
    meta["schema"] = "treeglass-schema v1";
    meta["version"] = TREEGLASS_VERSION;
    meta["config"] = ex::to_json(cfg);
    meta["seed"] = cfg.seed;
    meta["rows"] = result.rows.size();
    meta["summary"] = result.summary;
    meta["exit_code"] = code;
    meta["wall_time_seconds"] = wall;
    std::ofstream m(cfg.out + ".meta.json", std::ios::binary);
    m << meta.dump(2) << '\n';
  }
  if (result.violation) std::cerr << "treeglass: an asserted inequality failed; see the holds columns\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ex::ConfigError& e) {
    std::cerr << "treeglass: config error: " << e.what() << '\n';
    return 2;
  } catch (const treeglass::SizeGuardError& e) {
    std::cerr << "treeglass: size guard: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "treeglass: invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "treeglass: " << e.what() << '\n';
    return 1;
  }
}
