// rdassoc: simulate scenes, associate detections, run sweeps, print bounds.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>

#include "rdassoc/baselines.hpp"
#include "rdassoc/experiment.hpp"
#include "rdassoc/metrics.hpp"
#include "rdassoc/observation_io.hpp"
#include "rdassoc/saga.hpp"

using namespace rdassoc;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<int> n_targets, n_sensors, rho, trials;
  std::optional<double> snr_db, width, p_miss, fa_rate, kappa, d_bar, alpha, beta, p_fa;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scene_mode;
  bool noiseless = false;

  void add_to(CLI::App* app, bool with_trials) {
    app->add_option("--config", config_path, "JSON config file; flags override its values")
        ->check(CLI::ExistingFile);
    app->add_option("--n-targets", n_targets);
    app->add_option("--n-sensors", n_sensors);
    app->add_option("--snr", snr_db, "SNR in dB");
    app->add_option("--width", width, "array width in meters");
    app->add_option("--p-miss", p_miss);
    app->add_option("--fa-rate", fa_rate, "mean false alarms per sensor");
    app->add_option("--rho", rho);
    app->add_option("--kappa", kappa);
    app->add_option("--d-bar", d_bar);
    app->add_option("--alpha", alpha);
    app->add_option("--beta", beta);
    app->add_option("--p-fa", p_fa);
    app->add_option("--seed", seed);
    app->add_option("--scene-mode", scene_mode)->check(CLI::IsMember({"well_separated", "adverse"}));
    app->add_flag("--noiseless", noiseless, "simulate exact measurements");
    if (with_trials) app->add_option("--trials", trials);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::runtime_error("cannot read config " + config_path);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw std::runtime_error("config " + config_path + " is not valid JSON: " + e.what());
      }
      merge_json(c, j);
    }
    if (n_targets) c.n_targets = *n_targets;
    if (n_sensors) c.n_sensors = *n_sensors;
    if (rho) c.rho = *rho;
    if (trials) c.trials = *trials;
    if (snr_db) c.snr_db = *snr_db;
    if (width) c.array_width_m = *width;
    if (p_miss) c.p_miss = *p_miss;
    if (fa_rate) c.false_alarm_rate = *fa_rate;
    if (kappa) c.kappa = *kappa;
    if (d_bar) c.d_bar = *d_bar;
    if (alpha) c.alpha = *alpha;
    if (beta) c.beta = *beta;
    if (p_fa) c.p_fa = *p_fa;
    if (seed) c.seed = *seed;
    if (scene_mode) c.scene_mode = parse_scene_mode(*scene_mode);
    if (noiseless) c.noiseless = true;
    return c;
  }
};

json state_json(const KinematicState& z) { return {{"x", z.x}, {"y", z.y}, {"vx", z.vx}, {"vy", z.vy}}; }

std::vector<Algorithm> parse_algorithms(const std::vector<std::string>& names) {
  std::vector<Algorithm> out;
  for (const auto& n : names) out.push_back(parse_algorithm(n));
  return out;
}

int cmd_simulate(const Overrides& o, const std::string& out_path) {
  ExperimentConfig c = o.resolve();
  c.validate();
  const auto scene = simulate_trial(c, trial_seed(c.seed, 0, 0));
  if (out_path.empty() || out_path == "-") {
    write_observations(std::cout, c.array(), scene.observations, scene.targets);
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    write_observations(out, c.array(), scene.observations, scene.targets);
  }
  return 0;
}

int cmd_associate(const Overrides& o, const std::string& in_path, const std::vector<std::string>& algos,
                  const std::string& out_path) {
  ExperimentConfig c = o.resolve();
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot read " + in_path);
  const ObservationFile file = read_observations(in);
  c.n_sensors = file.array.size();
  c.validate();
  const NoiseModel noise = c.noise();
  const SagaConfig saga = c.saga_config();

  json runs = json::array();
  for (auto algorithm : parse_algorithms(algos)) {
    const auto result = run_algorithm(algorithm, file.observations, file.array, noise, saga);
    json chains = json::array();
    for (const auto& t : result.targets) {
      json detections = json::array();
      for (const auto& d : t.chain.detections) {
        detections.push_back({{"sensor", d.sensor}, {"range", d.range}, {"doppler", d.doppler}});
      }
      chains.push_back({{"detections", detections},
                        {"state", state_json(t.fit.state)},
                        {"fit_error", t.fit.fit_error},
                        {"residual", t.fit.residual},
                        {"log_likelihood", t.fit.log_likelihood}});
    }
    json run{{"algorithm", std::string(algorithm_name(algorithm))},
             {"chains", chains},
             {"likelihood_evals", result.counters.likelihood_evals},
             {"fit_evals", result.counters.fit_evals}};
    if (!file.targets.empty()) {
      const auto report = evaluate(result.states(), file.targets, c.d_bar, result.counters);
      run["metrics"] = {{"ospa", report.ospa},
                        {"d_p_rmse", report.d_p_rmse},
                        {"d_v_rmse", report.d_v_rmse},
                        {"n_valid", report.n_valid},
                        {"cardinality_error", report.cardinality_error}};
    }
    runs.push_back(run);
  }
  const json doc{{"detections", file.observations.total_detections()}, {"runs", runs}};
  if (out_path.empty() || out_path == "-") {
    std::cout << doc.dump(2) << '\n';
  } else {
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    out << doc.dump(2) << '\n';
  }
  return 0;
}

int cmd_sweep(const Overrides& o, const std::string& param, const std::vector<double>& values,
              const std::vector<std::string>& algos, const std::string& out_dir, int threads) {
  ExperimentConfig c = o.resolve();
  if (!param.empty()) {
    c.sweep_param = param;
    c.sweep_values = values;
  }
  if (!algos.empty()) c.algorithms = parse_algorithms(algos);
  c.validate();
  const auto result = run_sweep(c, threads);
  const auto dir = output_directory(out_dir);
  for (const auto& path : write_sweep_outputs(dir, c, result)) std::cout << path.string() << '\n';
  for (const auto& p : result.summary) {
    std::fprintf(stderr, "%s=%g %-5s ospa=%.4f±%.4f card=%.2f evals=%.0f failed=%d\n",
                 c.sweep_param.empty() ? "point" : c.sweep_param.c_str(), p.sweep_value,
                 std::string(algorithm_name(p.algorithm)).c_str(), p.ospa.mean, p.ospa.stderr_,
                 p.cardinality_error.mean, p.likelihood_evals.mean + p.fit_evals.mean, p.failed);
  }
  return 0;
}

int cmd_crb(const Overrides& o, const std::vector<double>& snrs, const std::vector<double>& state) {
  ExperimentConfig c = o.resolve();
  c.validate();
  const SensorArray array = c.array();
  std::optional<KinematicState> z;
  if (!state.empty()) {
    if (state.size() != 4) throw std::invalid_argument("--state needs x,y,vx,vy");
    z = KinematicState{state[0], state[1], state[2], state[3]};
  }
  json rows = json::array();
  for (double snr : snrs.empty() ? std::vector<double>{c.snr_db} : snrs) {
    const auto rd = crb_range_doppler(snr, c.kappa, c.resolution);
    const auto report = crb_position_velocity(z.value_or(reference_state()), array, rd.sigma_r2, rd.sigma_d2);
    rows.push_back({{"snr_db", snr},
                    {"kappa", c.kappa},
                    {"sigma_r2", report.sigma_r2},
                    {"sigma_d2", report.sigma_d2},
                    {"crb_p", report.crb_p},
                    {"crb_v", report.crb_v},
                    {"tau_z", report.tau_z}});
  }
  json doc{{"n_sensors", c.n_sensors},
           {"array_width_m", c.array_width_m},
           {"state", state_json(z.value_or(reference_state()))},
           {"rows", rows}};
  std::cout << doc.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-snapshot multi-target association for range-Doppler sensor arrays"};
  app.require_subcommand(1);

  Overrides sim_o, assoc_o, sweep_o, crb_o;

  auto* sim = app.add_subcommand("simulate", "write one simulated scene as an observation file");
  std::string sim_out;
  sim_o.add_to(sim, false);
  sim->add_option("-o,--out", sim_out, "output file ('-' for stdout)");

  auto* assoc = app.add_subcommand("associate", "associate an observation file and print chains as JSON");
  std::string assoc_in, assoc_out;
  std::vector<std::string> assoc_algos{"saga"};
  assoc_o.add_to(assoc, false);
  assoc->add_option("-i,--in", assoc_in, "observation file")->required();
  assoc->add_option("--algo", assoc_algos, "saga, saesl, nn, mcf")->delimiter(',');
  assoc->add_option("-o,--out", assoc_out, "output JSON file ('-' for stdout)");

  auto* sweep = app.add_subcommand("sweep", "Monte-Carlo sweep written as CSV and JSON");
  std::string sweep_param, sweep_dir;
  std::vector<double> sweep_values;
  std::vector<std::string> sweep_algos;
  int threads = 1;
  sweep_o.add_to(sweep, true);
  sweep->add_option("--param", sweep_param, "swept parameter");
  sweep->add_option("--values", sweep_values, "comma-separated values")->delimiter(',');
  sweep->add_option("--algo", sweep_algos, "saga, saesl, nn, mcf")->delimiter(',');
  sweep->add_option("--out-dir", sweep_dir, "output directory (default $RDASSOC_OUTPUT_DIR or ./results)");
  sweep->add_option("--threads", threads)->check(CLI::PositiveNumber);

  auto* crb = app.add_subcommand("crb", "print range-Doppler and position-velocity bounds as JSON");
  std::vector<double> crb_snrs;
  std::vector<double> crb_state;
  crb_o.add_to(crb, false);
  crb->remove_option(crb->get_option("--snr"));
  crb->add_option("--snr", crb_snrs, "SNR values in dB")->delimiter(',');
  crb->add_option("--state", crb_state, "x,y,vx,vy (default 0,7,0,0)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(sim_o, sim_out);
    if (*assoc) return cmd_associate(assoc_o, assoc_in, assoc_algos, assoc_out);
    if (*sweep) return cmd_sweep(sweep_o, sweep_param, sweep_values, sweep_algos, sweep_dir, threads);
    if (*crb) return cmd_crb(crb_o, crb_snrs, crb_state);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
