#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "kyleback/errors.hpp"
#include "stages.hpp"

namespace {

using namespace kyleback;
using namespace kyleback::cli;

struct Options {
  std::string config;
  std::string out;
  std::string seed;
  std::string stage;
  bool strict = false;
};

// One line on stderr, key=value pairs, message quoted with embedded quotes escaped.
void report_error(const char* kind, const std::string& message) {
  std::string clean;
  for (char ch : message) {
    if (ch == '\n' || ch == '\r') clean += ' ';
    else if (ch == '"' || ch == '\\') clean += std::string("\\") + ch;
    else clean += ch;
  }
  std::fprintf(stderr, "kyleback: error kind=%s message=\"%s\"\n", kind, clean.c_str());
}

std::vector<std::string> stages_for(const std::string& command, const std::string& until) {
  if (command != "all") return {command};
  std::vector<std::string> out;
  for (const auto& s : stage_names()) {
    out.push_back(s);
    if (s == until) return out;
  }
  if (!until.empty()) throw Error(ErrorKind::configuration, "unknown stage '" + until + "'");
  return out;
}

int execute(const std::string& command, const Options& o) {
  Scenario scenario = load_scenario(o.config);
  if (!o.seed.empty()) scenario = parse_scenario([&] {
      json doc = scenario.to_json();
      doc["seed"] = o.seed;
      return doc;
    }());
  const std::string started = utc_now();
  Runner runner(std::move(scenario), o.out, o.strict);
  bool all_pass = true;
  for (const std::string& stage : stages_for(command, o.stage)) {
    const StageResult r = runner.run(stage);
    std::printf("%-13s %s%s\n", stage.c_str(), r.pass ? "PASS" : "FAIL",
                r.warnings.empty() ? "" : ("  (" + std::to_string(r.warnings.size()) + " warnings)").c_str());
    all_pass = all_pass && r.pass;
  }
  runner.finish(started);
  std::printf("config_hash=%s out=%s\n", runner.config_hash().c_str(), o.out.c_str());
  return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Insider-trading equilibrium toolkit: bridges, filters and pricing PDEs from a scenario file"};
  app.require_subcommand(1);
  Options o;
  const std::vector<std::pair<const char*, const char*>> commands{
      {"validate", "check coefficient assumptions"},
      {"simulate", "simulate reference paths"},
      {"bridge", "build the conditioning field and simulate the bridge"},
      {"affine-check", "residual of the affine compatibility identity"},
      {"filter", "particle filter against the Kalman-Bucy oracle"},
      {"pde", "pricing PDEs, compatibility and value-function verification"},
      {"equilibrium", "wealth estimators, optimality tournament and HJB checks"},
      {"all", "run the stages in dependency order"}};
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "scenario JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "master seed override (u64)");
    sub->add_flag("--strict", o.strict, "warnings become failures");
    if (std::string(name) == "all") sub->add_option("--stage", o.stage, "stop after this stage");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    report_error("usage", e.what());
    return 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return execute(command, o);
  } catch (const Error& e) {
    // what() already leads with the kind
    const std::string prefix = std::string(to_string(e.kind())) + ": ";
    std::string message = e.what();
    if (message.rfind(prefix, 0) == 0) message.erase(0, prefix.size());
    report_error(to_string(e.kind()), message);
    return e.kind() == ErrorKind::configuration || e.kind() == ErrorKind::io ? 1 : 2;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 1;
  }
}
