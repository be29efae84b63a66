#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "fedres/fedres.hpp"

namespace {

using namespace fedres;

constexpr int kExitConfig = 1;
constexpr int kExitIo = 2;
constexpr int kExitInvariant = 3;

std::string default_output_dir() {
  const char* dir = std::getenv("FEDRES_OUTPUT_DIR");
  return dir && *dir ? dir : ".";
}

// "-" means stdout; a bare name goes under the default output directory.
void emit(const std::string& output, const std::string& fallback_name, const std::string& text) {
  if (output == "-") {
    std::cout << text;
    return;
  }
  std::filesystem::path path = output.empty() ? std::filesystem::path(default_output_dir()) / fallback_name
                                              : std::filesystem::path(output);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  write_text_file(path.string(), text);
  std::cerr << "wrote " << path.string() << '\n';
}

struct ExperimentFlags {
  ExperimentConfig cfg;
  std::string algo = "fedres-sgd";
  std::vector<int> delay_up{0};
  std::vector<int> delay_down{0};
  double eta = 0.0;
  double eta_local = 0.0;
  long rounds = 500;
  bool no_regret = false;
  std::string output;
};

void add_experiment_flags(CLI::App* app, ExperimentFlags& f) {
  auto& c = f.cfg;
  app->add_option("--algo", f.algo,
                  "independent|central|fedres-sgd|fedres-erm|fictitious|fedres-sgd-misaligned|fedres-sgd-asymmetric")
      ->capture_default_str();
  app->add_option("--clients", c.clients, "number of clients P")->capture_default_str();
  app->add_option("--rounds", f.rounds, "rounds T")->capture_default_str();
  app->add_option("--delay-up", f.delay_up, "uplink delay: one value or one per client")->delimiter(',');
  app->add_option("--delay-down", f.delay_down, "downlink delay: one value or one per client")->delimiter(',');
  app->add_option("--batch", c.batch, "mini-batch size b")->capture_default_str();
  app->add_option("--eta", f.eta, "server step size (default 0.5/sqrt(T))");
  app->add_option("--eta-local", f.eta_local, "client step size (default: --eta)");
  app->add_option("--radius", c.radius, "feasible ball radius D")->capture_default_str();
  app->add_option("--rollouts", c.rollouts, "seeded rollouts")->capture_default_str();
  app->add_option("--seed", c.seed, "base seed; rollout r uses seed + r")->capture_default_str();
  app->add_option("--threads", c.threads, "rollouts run in parallel")->capture_default_str();
  app->add_option("--data", c.data_path, "LIBSVM corpus (.gz accepted); synthetic tasks if omitted");
  app->add_option("--n0", c.n0, "max training samples per label and client")->capture_default_str();
  app->add_option("--holdout", c.holdout, "test fraction per label")->capture_default_str();
  app->add_option("--dim", c.dim, "synthetic feature dimension")->capture_default_str();
  app->add_option("--v-norm", c.v_norm, "synthetic client-specific weight norm")->capture_default_str();
  app->add_option("--shared-norm", c.shared_norm, "synthetic shared weight norm")->capture_default_str();
  app->add_option("--noise", c.noise, "synthetic label noise sd")->capture_default_str();
  app->add_flag("--no-regret", f.no_regret, "skip the offline comparator");
  app->add_option("--output", f.output, "CSV path, or - for stdout");
}

ExperimentConfig finish(ExperimentFlags& f, CLI::App* app) {
  ExperimentConfig c = f.cfg;
  c.algo = parse_algo(f.algo);
  c.rounds = f.rounds;
  c.delay_up = f.delay_up;
  c.delay_down = f.delay_down;
  if (app->count("--eta")) c.eta = f.eta;
  if (app->count("--eta-local")) c.eta_local = f.eta_local;
  c.with_regret = !f.no_regret;
  c.source = c.data_path.empty() ? DataSource::example2 : DataSource::libsvm;
  return c;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Federated residual learning simulator"};
  app.require_subcommand(1);

  ExperimentFlags run_flags;
  auto* run = app.add_subcommand("run", "seeded rollouts of one configuration");
  add_experiment_flags(run, run_flags);

  ExperimentFlags clients_flags;
  std::vector<long> client_values{5, 10, 20, 50};
  auto* sweep_clients = app.add_subcommand("sweep-clients", "sweep the number of clients");
  add_experiment_flags(sweep_clients, clients_flags);
  sweep_clients->add_option("--values", client_values, "client counts")->delimiter(',');

  ExperimentFlags delay_flags;
  std::vector<long> delay_values{0, 20, 80};
  auto* sweep_delay = app.add_subcommand("sweep-delay", "sweep the round-trip delay (split up/down)");
  add_experiment_flags(sweep_delay, delay_flags);
  sweep_delay->add_option("--values", delay_values, "round-trip delays")->delimiter(',');

  AppendixCConfig ac;
  std::string ac_output;
  auto* appc = app.add_subcommand("appendixc", "two-dimensional stream where fictitious play stalls");
  appc->add_option("--rounds", ac.rounds)->capture_default_str();
  appc->add_option("--rollouts", ac.rollouts)->capture_default_str();
  appc->add_option("--seed", ac.seed)->capture_default_str();
  appc->add_option("--eta", ac.eta)->capture_default_str();
  appc->add_option("--radius", ac.radius)->capture_default_str();
  appc->add_option("--threads", ac.threads)->capture_default_str();
  appc->add_option("--output", ac_output, "CSV path, or - for stdout");

  BanditConfig bc;
  double bandit_eta = 0.0;
  std::string bandit_output;
  auto* bandit = app.add_subcommand("bandit", "epsilon-greedy federated linear contextual bandit");
  bandit->add_option("--actions", bc.actions)->capture_default_str();
  bandit->add_option("--clients", bc.clients)->capture_default_str();
  bandit->add_option("--global-dim", bc.global_dim)->capture_default_str();
  bandit->add_option("--local-dim", bc.local_dim)->capture_default_str();
  bandit->add_option("--noise", bc.noise)->capture_default_str();
  bandit->add_option("--rounds", bc.rounds)->capture_default_str();
  bandit->add_option("--period", bc.period, "exploration period B")->capture_default_str();
  bandit->add_option("--delay-up", bc.delay_up, "in exploration rounds")->capture_default_str();
  bandit->add_option("--delay-down", bc.delay_down, "in exploration rounds")->capture_default_str();
  bandit->add_option("--eta", bandit_eta, "step size (default 0.5/sqrt(T/B))");
  bandit->add_option("--radius", bc.radius)->capture_default_str();
  bandit->add_option("--rollouts", bc.rollouts)->capture_default_str();
  bandit->add_option("--seed", bc.seed)->capture_default_str();
  bandit->add_option("--threads", bc.threads)->capture_default_str();
  bandit->add_option("--output", bandit_output, "CSV path, or - for stdout");

  std::string part_data, part_output;
  std::size_t part_clients = 10, part_n0 = 30;
  std::uint64_t part_seed = 1;
  double part_holdout = 0.25;
  auto* part = app.add_subcommand("partition", "write the client split manifest of a LIBSVM corpus");
  part->add_option("--data", part_data, "LIBSVM corpus (.gz accepted)")->required();
  part->add_option("--clients", part_clients)->capture_default_str();
  part->add_option("--n0", part_n0)->capture_default_str();
  part->add_option("--seed", part_seed)->capture_default_str();
  part->add_option("--holdout", part_holdout)->capture_default_str();
  part->add_option("--output", part_output, "manifest path, or - for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  if (run->parsed()) {
    const auto cfg = finish(run_flags, run);
    emit(run_flags.output, "run.csv", to_csv(run_experiment(cfg)));
  } else if (sweep_clients->parsed()) {
    const auto cfg = finish(clients_flags, sweep_clients);
    emit(clients_flags.output, "sweep_clients.csv", to_csv(sweep(cfg, SweepAxis::clients, client_values)));
  } else if (sweep_delay->parsed()) {
    const auto cfg = finish(delay_flags, sweep_delay);
    emit(delay_flags.output, "sweep_delay.csv", to_csv(sweep(cfg, SweepAxis::delay, delay_values)));
  } else if (appc->parsed()) {
    emit(ac_output, "appendixc.csv", to_csv(run_appendix_c(ac)));
  } else if (bandit->parsed()) {
    if (bandit->count("--eta")) bc.eta = bandit_eta;
    emit(bandit_output, "bandit.csv", to_csv(run_bandit_experiment(bc)));
  } else if (part->parsed()) {
    const auto data = partition_federated(load_libsvm(part_data), part_clients, part_n0, part_seed, part_holdout);
    std::ostringstream os;
    write_partition_manifest(os, data);
    emit(part_output, "partition.csv", os.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const fedres::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fedres::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fedres::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fedres::InvariantError& e) {
    std::cerr << "invariant violated: " << e.what() << '\n';
    return kExitInvariant;
  }
}
