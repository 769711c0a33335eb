// Command-line front end: experiment orchestration, config loading with
// flag overrides, and manifest aggregation.
//
// Exit codes: 0 every in-config assertion passed; 1 at least one check
// failed or a run aborted on a domain error; 2 config / schema / usage
// errors.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "torusheat/config.hpp"
#include "torusheat/errors.hpp"

namespace {

using torusheat::ExperimentConfig;
using torusheat::RunOutcome;

// Subcommand -> experiments it runs (in order) when no --config narrows it.
const std::map<std::string, std::vector<std::string>>& families() {
  static const std::map<std::string, std::vector<std::string>> f = {
      {"kernel", {"kernel-duality", "kernel-laws"}},
      {"variance", {"variance", "increment-bounds"}},
      {"covariance", {"sampler-exactness"}},
      {"sample-h", {"sample-h"}},
      {"slnd", {"slnd", "small-ball"}},
      {"solve", {"solve"}},
      {"linearize", {"linearization"}},
      {"moments", {"moments"}},
      {"dimension", {"dimension"}},
      {"counts", {"counts"}},
  };
  return f;
}

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  long replicas = 0;
  int threads = 0;
  std::vector<std::string> sets;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_replicas = nullptr;
  CLI::Option* o_threads = nullptr;
};

void add_common_flags(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config_path,
                  "JSON config file; its experiment must belong to this "
                  "subcommand");
  o.o_seed = sub->add_option("--seed", o.seed,
                             "master seed (overrides the config file)");
  o.o_out = sub->add_option("--out", o.out_dir,
                            "output directory (overrides the config file)");
  o.o_replicas = sub->add_option(
      "--replicas", o.replicas, "replica count (overrides the config file)");
  o.o_threads = sub->add_option("--threads", o.threads,
                                "worker thread cap (overrides the config file)");
  sub->add_option("--set", o.sets,
                  "override a single config entry, e.g. --set params.n_t=20 "
                  "or --set tolerances.tol=1e-9 (bare keys go to params)");
}

// --set key=value: value is parsed as a JSON scalar/array when possible and
// falls back to a plain string, so --set params.drift=zero works unquoted.
void apply_set(ExperimentConfig& cfg, const std::string& kv) {
  const std::size_t eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw torusheat::ConfigParseError("--set expects key=value, got \"" + kv +
                                      "\"");
  }
  std::string key = kv.substr(0, eq);
  const std::string raw = kv.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }
  if (value.is_object()) {
    throw torusheat::ConfigParseError("--set value for \"" + key +
                                      "\" must be a scalar or array");
  }
  nlohmann::json* target = &cfg.params;
  if (key.rfind("params.", 0) == 0) {
    key = key.substr(7);
  } else if (key.rfind("tolerances.", 0) == 0) {
    key = key.substr(11);
    target = &cfg.tolerances;
  }
  if (key.empty()) {
    throw torusheat::ConfigParseError("--set key is empty in \"" + kv + "\"");
  }
  (*target)[key] = value;
}

void apply_overrides(ExperimentConfig& cfg, const CommonOpts& o) {
  if (o.o_seed->count() > 0) cfg.seed = o.seed;
  if (o.o_out->count() > 0) cfg.out_dir = o.out_dir;
  if (o.o_replicas->count() > 0) cfg.n_replicas = o.replicas;
  if (o.o_threads->count() > 0) cfg.threads = o.threads;
  for (const std::string& kv : o.sets) apply_set(cfg, kv);
}

void print_outcome(const RunOutcome& out) {
  const torusheat::ExperimentResult& r = out.result;
  std::printf("[%s] %s: %zu check%s, %.2f s -> %s\n",
              r.all_pass() ? "PASS" : "FAIL", r.experiment.c_str(),
              r.checks.size(), r.checks.size() == 1 ? "" : "s",
              out.wall_time_s, out.data_path.c_str());
  for (const torusheat::CheckResult& c : r.checks) {
    std::printf("  [%s] %s: %s\n", c.pass ? "ok" : "FAIL", c.name.c_str(),
                c.detail.c_str());
  }
  for (const std::string& n : r.notes) {
    std::printf("  note: %s\n", n.c_str());
  }
}

int run_family(const std::string& family, const CommonOpts& o) {
  std::vector<ExperimentConfig> configs;
  if (!o.config_path.empty()) {
    ExperimentConfig cfg = torusheat::load_config(o.config_path);
    if (family != "run") {
      const std::vector<std::string>& members = families().at(family);
      bool ok = false;
      for (const std::string& m : members) ok = ok || m == cfg.experiment;
      if (!ok) {
        std::string list;
        for (const std::string& m : members) {
          list += list.empty() ? "" : ", ";
          list += m;
        }
        throw torusheat::ConfigParseError(
            o.config_path + ": experiment \"" + cfg.experiment +
            "\" does not belong to the " + family + " subcommand (" + list +
            "); use the matching subcommand or `run`");
      }
    }
    configs.push_back(std::move(cfg));
  } else {
    if (family == "run") {
      throw torusheat::ConfigParseError("run requires --config FILE");
    }
    for (const std::string& name : families().at(family)) {
      ExperimentConfig cfg;
      cfg.experiment = name;
      configs.push_back(std::move(cfg));
    }
  }
  bool all = true;
  for (ExperimentConfig& cfg : configs) {
    apply_overrides(cfg, o);
    const RunOutcome out = torusheat::run_experiment(cfg);
    print_outcome(out);
    all = all && out.result.all_pass();
  }
  return all ? 0 : 1;
}

int run_report(const std::vector<std::string>& paths,
               const std::string& csv_path) {
  const torusheat::ReportTable table =
      torusheat::report_from_manifests(paths);
  std::cout << torusheat::render_report_text(table);
  if (!csv_path.empty()) {
    std::ofstream os(csv_path, std::ios::binary);
    if (!os) {
      std::fprintf(stderr, "error: cannot write %s\n", csv_path.c_str());
      return 2;
    }
    torusheat::write_report_csv(table, os);
  }
  return table.all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "torusheat: sampling, solving, and geometric verification for the "
      "vector-valued stochastic heat equation on the circle"};
  app.set_version_flag("--version", torusheat::version_string());
  app.require_subcommand(1);

  std::map<std::string, CommonOpts> opts;
  const std::map<std::string, std::string> blurbs = {
      {"kernel", "heat-kernel representation and semigroup-law checks"},
      {"variance", "closed-form variance and increment-energy checks"},
      {"covariance", "exact-sampler moment verification"},
      {"sample-h", "draw the additive Gaussian field on a grid"},
      {"slnd", "local nondeterminism ratios and small-ball bounds"},
      {"solve", "run one nonlinear solver trajectory"},
      {"linearize", "short-time linearization error rate"},
      {"moments", "increment moment scaling exponents"},
      {"dimension", "box-counting dimension of solution images"},
      {"counts", "lattice hit-count growth bounds"},
      {"run", "run any experiment from an explicit config file"},
  };
  for (const auto& [name, blurb] : blurbs) {
    CLI::App* sub = app.add_subcommand(name, blurb);
    add_common_flags(sub, opts[name]);
  }

  std::vector<std::string> manifest_paths;
  std::string report_csv;
  CLI::App* rep = app.add_subcommand(
      "report", "aggregate run manifests into a pass/fail table");
  rep->add_option("manifests", manifest_paths, "NDJSON manifest files");
  rep->add_option("--csv", report_csv, "also write the table as CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (rep->parsed()) return run_report(manifest_paths, report_csv);
    for (const auto& [name, o] : opts) {
      if (app.get_subcommand(name)->parsed()) return run_family(name, o);
    }
    std::fprintf(stderr, "error: no subcommand selected\n");
    return 2;
  } catch (const torusheat::ConfigParseError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const torusheat::SchemaError& e) {
    std::fprintf(stderr, "schema error: %s\n", e.what());
    return 2;
  } catch (const torusheat::UnknownExperiment& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "run failed: %s\n", e.what());
    return 1;
  }
}
