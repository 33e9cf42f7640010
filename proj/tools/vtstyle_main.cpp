#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

#include "vtstyle/error.hpp"
#include "vtstyle/pipeline.hpp"

namespace {

struct Options {
  std::string config;
  std::string state_dir = "state";
  std::string mock;
  vts::Overrides overrides;
  std::vector<std::string> models;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--state-dir", o.state_dir, "directory holding all phase outputs");
  cmd->add_option("--seed", o.overrides.seed, "override the run seed");
  cmd->add_option("--models", o.models, "restrict to these model ids")->delimiter(',');
  cmd->add_option("--concurrency", o.overrides.concurrency, "parallel requests per model")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--tau", o.overrides.tau, "low-frequency merge threshold")->check(CLI::NonNegativeNumber);
  cmd->add_option("--top-n", o.overrides.top_n, "size of the top-term lists")->check(CLI::PositiveNumber);
  cmd->add_option("--mock", o.mock, "answer every query from this fixture instead of the network")
      ->check(CLI::ExistingFile);
}

int run(const std::string& name, Options& o) {
  if (!o.models.empty()) o.overrides.models = o.models;
  vts::RunConfig config = vts::apply_overrides(vts::load_config(o.config), o.overrides);
  vts::ClientFactory factory = o.mock.empty() ? vts::live_client_factory() : vts::mock_client_factory(o.mock);
  vts::Pipeline pipeline(std::move(config), o.state_dir, std::move(factory));

  if (name == "render") pipeline.render();
  else if (name == "identify") pipeline.identify();
  else if (name == "filter") pipeline.filter();
  else if (name == "collect") pipeline.collect();
  else if (name == "extract") pipeline.extract();
  else if (name == "analyze") pipeline.analyze();
  else if (name == "report") pipeline.report();
  else if (name == "run-all") {
    std::cout << pipeline.run_all();
    return 0;
  }
  std::cerr << name << ": done (" << pipeline.queries_issued() << " new queries)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Measure style sensitivity of vision-language attribute descriptions"};
  app.require_subcommand(1);
  Options options;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"render", "render the stimulus grid and manifest"},
      {"identify", "ask each model to name the concept in every stimulus"},
      {"filter", "gate on identification and sample stimuli per style"},
      {"collect", "collect attribute descriptions for the sampled stimuli"},
      {"extract", "turn raw replies into attribute term lists"},
      {"analyze", "compute per-concept divergence and significance"},
      {"report", "write tables, charts and the run manifest"},
      {"run-all", "run every phase in order and print a summary"},
  };
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), options);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return run(name, options);
  } catch (const vts::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const vts::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
