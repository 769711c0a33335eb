#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "torusheat/experiments.hpp"

namespace torusheat {

// Tool identity written into every manifest record.
const char* version_string();

// One experiment run, fully described: what to run, how it is keyed, and
// where the outputs go. params and tolerances are open key/value trees
// whose accepted keys depend on the experiment; unknown keys are rejected
// with the offending name so typos fail loudly.
//
// Replica semantics by experiment:
//   dimension, counts      n_replicas independent repeats (replica keys
//                          replica_base .. replica_base + n - 1); checks are
//                          evaluated on the aggregate (median slope for
//                          dimension, worst case for counts).
//   sampler-exactness, small-ball (Monte Carlo size), linearization,
//   moments                n_replicas overrides the driver's ensemble size.
//   all others             deterministic scans; n_replicas must stay 0/1.
struct ExperimentConfig {
  int schema_version = 1;
  std::string experiment;
  std::uint64_t seed = 2026;
  long n_replicas = 0;  // 0 = experiment default
  std::string out_dir = ".";
  int threads = 0;  // 0 = library default
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json tolerances = nlohmann::json::object();
};

// Parses a JSON config file. Errors carry the file, the offending field,
// and (for syntax errors) the position reported by the parser.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig config_from_json(const nlohmann::json& j,
                                  const std::string& source);

// Canonical serialization of the semantic fields only (schema_version,
// experiment, seed, n_replicas, params, tolerances; not out_dir/threads,
// which cannot change any number), with object keys sorted. Two configs
// producing the same bytes here produce byte-identical data files.
std::string canonical_config_dump(const ExperimentConfig& config);
std::uint64_t config_hash(const ExperimentConfig& config);

// The experiments every subcommand family dispatches to.
std::vector<std::string> known_experiments();

struct RunOutcome {
  ExperimentResult result;
  std::string data_path;      // CSV table written for this run
  std::string manifest_path;  // NDJSON run record appended
  double wall_time_s = 0.0;
};

// Runs one experiment per the config: dispatches on config.experiment,
// executes the driver (n_replicas repeats where that is the convention),
// writes <out_dir>/<experiment>-data.csv and appends one run record to
// <out_dir>/<experiment>-manifest.ndjson. The record's wall_time_s is the
// only field that varies between identical reruns; every number in the
// data file is %.17g so reruns are byte-identical.
// Throws UnknownExperiment for an unrecognized name and ConfigParseError
// for invalid parameters.
RunOutcome run_experiment(const ExperimentConfig& config);

// --- Manifest aggregation ------------------------------------------------

struct ReportRow {
  std::string experiment;
  std::string config_hash;
  std::string status;  // "pass" or "fail"
  long n_checks = 0;
  long n_failed = 0;
  double wall_time_s = 0.0;
  std::string source;  // manifest file the record came from
};

struct ReportTable {
  std::vector<ReportRow> rows;  // sorted by experiment, then source order
  bool all_pass = true;         // vacuously true for an empty table
};

// Reads NDJSON run records from the given manifest files. Empty input is
// an empty, passing table. Malformed records throw SchemaError naming the
// file and line; a record whose check names collide violates the
// one-entry-per-check invariant and is rejected the same way.
ReportTable report_from_manifests(const std::vector<std::string>& paths);

void write_report_csv(const ReportTable& table, std::ostream& os);
std::string render_report_text(const ReportTable& table);

}  // namespace torusheat
