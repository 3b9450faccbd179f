#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kyleback/io.hpp"
#include "scenario.hpp"

namespace kyleback::cli {

inline constexpr const char* kArtifactVersion = "kyleback-0.1.0";

// ISO-8601 UTC, second resolution. Only the manifest carries timestamps.
std::string utc_now();

// Pipeline order; `all` runs these in sequence.
const std::vector<std::string>& stage_names();

struct StageResult {
  std::string name;
  bool pass = false;
  std::vector<std::string> warnings;
};

// Runs stages against one output directory. Every file carries the config hash, and the
// directory refuses results from a different config.
class Runner {
 public:
  Runner(Scenario scenario, std::filesystem::path out, bool strict);

  StageResult run(const std::string& stage);
  // Writes manifest.json: hashes of every file in the index plus per-stage verdicts.
  void finish(const std::string& started_at);

  const Scenario& scenario() const noexcept { return s_; }
  std::string config_hash() const { return hash_; }

 private:
  StageResult validate();
  StageResult simulate();
  StageResult bridge();
  StageResult affine_check();
  StageResult filter();
  StageResult pde();
  StageResult equilibrium();

  void write_csv(const std::string& rel, const CsvTable& table, const std::string& stage);
  void write_report(const std::string& stage, json body, StageResult& r);
  std::uint64_t seed_for(const char* stage, std::uint64_t index = 0) const;

  Scenario s_;
  Model m_;
  std::filesystem::path out_;
  bool strict_;
  std::string hash_;
  std::map<std::string, json> files_;   // relative path -> {bytes, fnv1a64}
  std::map<std::string, json> stages_;  // stage -> {pass, warnings}
};

}  // namespace kyleback::cli
