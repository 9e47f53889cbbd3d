#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "retrofit/cli.hpp"

namespace {

std::string tolerance_help() {
  const retrofit::ToleranceConfig d;
  std::ostringstream os;
  os << "Tolerance overrides as inline JSON or a JSON file, e.g. '{\"residual_tol\": 1e-6}'. Defaults: eps_cancel="
     << d.eps_cancel << " eps_stab=" << d.eps_stab << " eps_rank=" << d.eps_rank << " residual_tol=" << d.residual_tol
     << " eps_trim=" << d.eps_trim;
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = retrofit::cli;
  CLI::App app{"Output-rectifying retrofit controller synthesis, verification and benchmarking"};
  app.require_subcommand(1);

  std::string tol_arg;
  std::string seed_arg;
  app.add_option("--tol", tol_arg, tolerance_help());
  app.add_option("--seed", seed_arg, "Seed for rank sampling and verification frequencies (env RETROFIT_SEED)");

  auto* synth = app.add_subcommand("synth", "Synthesize a retrofit controller for a plant");
  std::string plant_path, weights_path, mode = "general", out_path;
  synth->add_option("--plant", plant_path, "Plant JSON {A, L, B, Gamma, C}")->required();
  synth->add_option("--weights", weights_path, "LQG weights JSON {state, input, process_noise, measurement_noise}");
  synth->add_option("--mode", mode, "general (y only) or measured (y and v)")->capture_default_str();
  synth->add_option("--out", out_path, "Controller JSON output")->required();

  auto* verify = app.add_subcommand("verify", "Check a controller against a plant");
  std::string controller_path;
  verify->add_option("--plant", plant_path, "Plant JSON")->required();
  verify->add_option("--controller", controller_path, "Controller JSON with a \"K\" entry")->required();

  auto* bench = app.add_subcommand("bench", "Run the network cut-edge benchmark");
  cli::BenchOptions b;
  bool default_paper = false;
  int graphs = 0;
  int disturbed = 0;
  auto* spec_opt = bench->add_option("--spec", b.spec_path, "Network spec JSON");
  auto* paper_opt = bench->add_flag("--default-paper", default_paper, "50-node network, 15 graphs");
  spec_opt->excludes(paper_opt);
  bench->add_option("--out", b.out_csv, "CSV output ('-' for stdout)")->required();
  bench->add_option("--weights", b.weights_path, "LQG weights JSON");
  auto* graphs_opt = bench->add_option("--graphs", graphs, "Number of graphs in the sweep");
  auto* node_opt = bench->add_option("--disturbed-node", disturbed, "1-based node with the initial frequency offset "
                                                                      "(default: last interest node)");
  bench->add_option("--threads", b.threads, "Worker threads, 0 for all cores")->capture_default_str();
  bench->add_flag("--check-simulation", b.check_simulation, "Cross-check every L2 norm by time-domain integration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kMalformed;
  }

  cli::CommonOptions common;
  try {
    if (!tol_arg.empty()) common.tol = cli::parse_tolerances(tol_arg);
    if (!seed_arg.empty()) {
      common.seed = cli::parse_seed(seed_arg);
    } else if (const char* env = std::getenv("RETROFIT_SEED"); env && *env) {
      common.seed = cli::parse_seed(env);
    }
  } catch (const retrofit::RetrofitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kMalformed;
  }

  if (*synth) return cli::cmd_synth(plant_path, weights_path, mode, out_path, common);
  if (*verify) return cli::cmd_verify(plant_path, controller_path, common);
  if (!default_paper && b.spec_path.empty()) {
    std::cerr << "error: bench needs --spec or --default-paper\n";
    return cli::kMalformed;
  }
  if (*graphs_opt) b.graphs = graphs;
  if (*node_opt) b.disturbed_node = disturbed;
  return cli::cmd_bench(b, common);
}
