#include "torusheat/config.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <stdexcept>

#include "torusheat/csv.hpp"
#include "torusheat/errors.hpp"
#include "torusheat/parallel.hpp"
#include "torusheat/rng.hpp"

namespace torusheat {

using nlohmann::json;

const char* version_string() { return "torusheat 0.1.0"; }

// --- Parsing helpers -----------------------------------------------------

namespace {

[[noreturn]] void fail_field(const std::string& where, const std::string& key,
                             const std::string& what) {
  throw ConfigParseError(where + ": field \"" + key + "\" " + what);
}

void require_keys(const json& obj, const std::string& where,
                  std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) {
    throw ConfigParseError(where + ": expected an object");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) {
      std::string hint;
      for (const char* k : allowed) {
        hint += hint.empty() ? "" : ", ";
        hint += k;
      }
      throw ConfigParseError(where + ": unknown key \"" + it.key() +
                             "\" (accepted: " + hint + ")");
    }
  }
}

double get_num(const json& obj, const char* key, double dflt,
               const std::string& where) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_number()) fail_field(where, key, "must be a number");
  return v.get<double>();
}

long get_int(const json& obj, const char* key, long dflt,
             const std::string& where) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) fail_field(where, key, "must be an integer");
  return v.get<long>();
}

bool get_bool(const json& obj, const char* key, bool dflt,
              const std::string& where) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_boolean()) fail_field(where, key, "must be a boolean");
  return v.get<bool>();
}

std::string get_str(const json& obj, const char* key, const std::string& dflt,
                    const std::string& where) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_string()) fail_field(where, key, "must be a string");
  return v.get<std::string>();
}

std::vector<double> get_vec(const json& obj, const char* key,
                            const std::vector<double>& dflt,
                            const std::string& where) {
  if (!obj.contains(key)) return dflt;
  const json& v = obj.at(key);
  if (!v.is_array()) fail_field(where, key, "must be an array of numbers");
  std::vector<double> out;
  for (const json& e : v) {
    if (!e.is_number()) fail_field(where, key, "must be an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

void forbid_replicas(const ExperimentConfig& c) {
  if (c.n_replicas > 1) {
    throw ConfigParseError("experiment \"" + c.experiment +
                           "\" is a deterministic scan given (config, seed); "
                           "n_replicas must be 0 or 1");
  }
}

}  // namespace

// --- Config loading --------------------------------------------------------

ExperimentConfig config_from_json(const json& j, const std::string& source) {
  const std::string where = source.empty() ? "config" : source;
  require_keys(j, where,
               {"schema_version", "experiment", "seed", "n_replicas",
                "out_dir", "threads", "params", "tolerances"});
  ExperimentConfig c;
  const long schema = get_int(j, "schema_version", 1, where);
  if (schema != 1) {
    fail_field(where, "schema_version",
               "unsupported (this tool reads schema 1)");
  }
  c.schema_version = 1;
  if (!j.contains("experiment")) {
    fail_field(where, "experiment", "is required");
  }
  c.experiment = get_str(j, "experiment", "", where);
  if (j.contains("seed")) {
    const json& s = j.at("seed");
    if (!s.is_number_integer() || s.is_number_float()) {
      fail_field(where, "seed", "must be an integer");
    }
    c.seed = s.get<std::uint64_t>();
  }
  c.n_replicas = get_int(j, "n_replicas", 0, where);
  if (c.n_replicas < 0) fail_field(where, "n_replicas", "must be >= 0");
  c.out_dir = get_str(j, "out_dir", ".", where);
  c.threads = static_cast<int>(get_int(j, "threads", 0, where));
  if (j.contains("params")) {
    if (!j.at("params").is_object()) {
      fail_field(where, "params", "must be an object");
    }
    c.params = j.at("params");
  }
  if (j.contains("tolerances")) {
    if (!j.at("tolerances").is_object()) {
      fail_field(where, "tolerances", "must be an object");
    }
    c.tolerances = j.at("tolerances");
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigParseError(path + ": cannot open config file");
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigParseError(path + ": " + e.what());
  }
  return config_from_json(j, path);
}

std::string canonical_config_dump(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["experiment"] = c.experiment;
  j["seed"] = c.seed;
  j["n_replicas"] = c.n_replicas;
  j["params"] = c.params;
  j["tolerances"] = c.tolerances;
  return j.dump();  // object keys are stored sorted, so this is canonical
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  const std::string s = canonical_config_dump(c);
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (unsigned char ch : s) {
    h = mix64(h ^ static_cast<std::uint64_t>(ch));
  }
  return h;
}

std::vector<std::string> known_experiments() {
  return {"kernel-duality", "kernel-laws",    "variance",
          "increment-bounds", "slnd",         "small-ball",
          "sampler-exactness", "linearization", "moments",
          "dimension",       "counts",        "structural",
          "sample-h",        "solve"};
}

// --- Per-experiment parameter mapping --------------------------------------

namespace {

ExperimentResult run_kernel_duality(const ExperimentConfig& c) {
  forbid_replicas(c);
  const std::string wp = c.experiment + " params";
  const std::string wt = c.experiment + " tolerances";
  require_keys(c.params, wp, {"n_samples", "r_lo", "r_hi"});
  require_keys(c.tolerances, wt, {"tol"});
  KernelDualityConfig k;
  k.n_samples = static_cast<int>(get_int(c.params, "n_samples", k.n_samples, wp));
  k.r_lo = get_num(c.params, "r_lo", k.r_lo, wp);
  k.r_hi = get_num(c.params, "r_hi", k.r_hi, wp);
  k.tol = get_num(c.tolerances, "tol", k.tol, wt);
  k.seed = c.seed;
  return kernel_duality_experiment(k);
}

ExperimentResult run_kernel_laws(const ExperimentConfig& c) {
  forbid_replicas(c);
  const std::string wp = c.experiment + " params";
  const std::string wt = c.experiment + " tolerances";
  require_keys(c.params, wp, {"n_t", "t_lo", "t_hi", "n_ck"});
  require_keys(c.tolerances, wt, {"tol_conservation", "tol_ck"});
  KernelLawsConfig k;
  k.n_t = static_cast<int>(get_int(c.params, "n_t", k.n_t, wp));
  k.t_lo = get_num(c.params, "t_lo", k.t_lo, wp);
  k.t_hi = get_num(c.params, "t_hi", k.t_hi, wp);
  k.n_ck = static_cast<int>(get_int(c.params, "n_ck", k.n_ck, wp));
  k.tol_conservation =
      get_num(c.tolerances, "tol_conservation", k.tol_conservation, wt);
  k.tol_ck = get_num(c.tolerances, "tol_ck", k.tol_ck, wt);
  k.seed = c.seed;
  return kernel_laws_experiment(k);
}

ExperimentResult run_variance(const ExperimentConfig& c) {
  forbid_replicas(c);
  const std::string wp = c.experiment + " params";
  const std::string wt = c.experiment + " tolerances";
  require_keys(c.params, wp, {"n_t", "t_lo", "t_hi", "ratio_t"});
  require_keys(c.tolerances, wt, {"tol", "ratio_lo", "ratio_hi"});
  VarianceChecksConfig k;
  k.n_t = static_cast<int>(get_int(c.params, "n_t", k.n_t, wp));
  k.t_lo = get_num(c.params, "t_lo", k.t_lo, wp);
  k.t_hi = get_num(c.params, "t_hi", k.t_hi, wp);
  k.ratio_t = get_num(c.params, "ratio_t", k.ratio_t, wp);
  k.tol = get_num(c.tolerances, "tol", k.tol, wt);
  k.ratio_lo = get_num(c.tolerances, "ratio_lo", k.ratio_lo, wt);
  k.ratio_hi = get_num(c.tolerances, "ratio_hi", k.ratio_hi, wt);
  return variance_experiment(k);
}

ExperimentResult run_increment_bounds(const ExperimentConfig& c) {
  forbid_replicas(c);
  const std::string wp = c.experiment + " params";
  const std::string wt = c.experiment + " tolerances";
  require_keys(c.params, wp,
               {"n_t", "n_sep", "t_lo", "t_hi", "sep_lo", "sep_hi"});
  require_keys(c.tolerances, wt, {"max_ratio"});
  IncrementBoundsConfig k;
  k.n_t = static_cast<int>(get_int(c.params, "n_t", k.n_t, wp));
  k.n_sep = static_cast<int>(get_int(c.params, "n_sep", k.n_sep, wp));
  k.t_lo = get_num(c.params, "t_lo", k.t_lo, wp);
  k.t_hi = get_num(c.params, "t_hi", k.t_hi, wp);
  k.sep_lo = get_num(c.params, "sep_lo", k.sep_lo, wp);
  k.sep_hi = get_num(c.params, "sep_hi", k.sep_hi, wp);
  k.max_ratio = get_num(c.tolerances, "max_ratio", k.max_ratio, wt);
  return increment_bounds_experiment(k);
}

ExperimentResult run_slnd(const ExperimentConfig& c) {
  forbid_replicas(c);
  const std::string wp = c.experiment + " params";
  const std::string wt = c.experiment + " tolerances";
  require_keys(c.params, wp, {"T", "m_max", "n_configs", "n_modes"});
  require_keys(c.tolerances, wt, {"ratio_lo", "ratio_hi", "stability_factor"});
  SlndScanConfig k;
  k.T = get_num(c.params, "T", k.T, wp);
  k.m_max = static_cast<int>(get_int(c.params, "m_max", k.m_max, wp));
  k.n_configs = static_cast<int>(get_int(c.params, "n_configs", k.n_configs, wp));
  k.n_modes = static_cast<int>(get_int(c.params, "n_modes", k.n_modes, wp));
  k.ratio_lo = get_num(c.tolerances, "ratio_lo", k.ratio_lo, wt);
  k.ratio_hi = get_num(c.tolerances, "ratio_hi", k.ratio_hi, wt);
  k.stability_factor =
      get_num(c.tolerances, "stability_factor", k.stability_factor, wt);
  k.seed = c.seed;
  return slnd_experiment(k);
}

ExperimentResult run_small_ball(const ExperimentConfig& c) {
  const std::string wp = c.experiment + " params";
  require_keys(c.params, wp, {"n_configs", "m_max", "n_mc", "epsilons"});
  require_keys(c.tolerances, c.experiment + " tolerances", {});
  SmallBallConfig k;
  k.n_configs = static_cast<int>(get_int(c.params, "n_configs", k.n_configs, wp));
  k.m_max = static_cast<int>(get_int(c.params, "m_max", k.m_max, wp));
  k.n_mc = get_int(c.params, "n_mc", k.n_mc, wp);
  k.epsilons = get_vec(c.params, "epsilons", k.epsilons, wp);
  if (c.n_replicas > 0) k.n_mc = c.n_replicas;  // Monte Carlo sample size
  k.seed = c.seed;
  return small_ball_experiment(k);
}

ExperimentResult run_sampler_exactness(const ExperimentConfig& c) {
  const std::string wp = c.experiment + " params";
  const std::string wt = c.experiment + " tolerances";
  require_keys(c.params, wp, {"n_modes"});
  require_keys(c.tolerances, wt, {"max_sigmas"});
  SamplerExactnessConfig k;
  k.n_modes = static_cast<int>(get_int(c.params, "n_modes", k.n_modes, wp));
  k.max_sigmas = get_num(c.tolerances, "max_sigmas", k.max_sigmas, wt);
  if (c.n_replicas > 0) k.n_replicas = c.n_replicas;
  k.seed = c.seed;
  return sampler_exactness_experiment(k);
}

ExperimentResult run_linearization(const ExperimentConfig& c) {
  const std::string wp = c.experiment + " params";
  const std::string wt = c.experiment + " tolerances";
  require_keys(c.params, wp,
               {"p", "grid_size", "dt", "sigma_amplitude", "times", "replica"});
  require_keys(c.tolerances, wt, {"slope_lo", "slope_hi"});
  LinearizationRateConfig k;
  k.p = static_cast<int>(get_int(c.params, "p", k.p, wp));
  k.grid_size = static_cast<int>(get_int(c.params, "grid_size", k.grid_size, wp));
  k.dt = get_num(c.params, "dt", k.dt, wp);
  k.sigma_amplitude =
      get_num(c.params, "sigma_amplitude", k.sigma_amplitude, wp);
  k.times = get_vec(c.params, "times", k.times, wp);
  k.replica = static_cast<std::uint64_t>(get_int(c.params, "replica", 0, wp));
  k.slope_lo = get_num(c.tolerances, "slope_lo", k.slope_lo, wt);
  k.slope_hi = get_num(c.tolerances, "slope_hi", k.slope_hi, wt);
  if (c.n_replicas > 0) k.n_replicas = c.n_replicas;
  k.seed = c.seed;
  return linearization_experiment(k);
}

ExperimentResult run_moments(const ExperimentConfig& c) {
  const std::string wp = c.experiment + " params";
  const std::string wt = c.experiment + " tolerances";
  require_keys(c.params, wp,
               {"p", "grid_size", "dt", "t", "spatial_seps", "temporal_lags",
                "replica"});
  require_keys(c.tolerances, wt,
               {"spatial_lo", "spatial_hi", "temporal_lo", "temporal_hi"});
  MomentExponentsConfig k;
  k.p = static_cast<int>(get_int(c.params, "p", k.p, wp));
  k.grid_size = static_cast<int>(get_int(c.params, "grid_size", k.grid_size, wp));
  k.dt = get_num(c.params, "dt", k.dt, wp);
  k.t = get_num(c.params, "t", k.t, wp);
  k.spatial_seps = get_vec(c.params, "spatial_seps", k.spatial_seps, wp);
  k.temporal_lags = get_vec(c.params, "temporal_lags", k.temporal_lags, wp);
  k.replica = static_cast<std::uint64_t>(get_int(c.params, "replica", 0, wp));
  k.spatial_lo = get_num(c.tolerances, "spatial_lo", k.spatial_lo, wt);
  k.spatial_hi = get_num(c.tolerances, "spatial_hi", k.spatial_hi, wt);
  k.temporal_lo = get_num(c.tolerances, "temporal_lo", k.temporal_lo, wt);
  k.temporal_hi = get_num(c.tolerances, "temporal_hi", k.temporal_hi, wt);
  if (c.n_replicas > 0) k.n_replicas = c.n_replicas;
  k.seed = c.seed;
  return moments_experiment(k);
}

ImageDimensionConfig dimension_config_from(const ExperimentConfig& c) {
  const std::string wp = c.experiment + " params";
  const std::string wt = c.experiment + " tolerances";
  require_keys(c.params, wp,
               {"kind", "p", "use_cantor", "cantor_depth", "cantor_ratio",
                "cantor_lo", "cantor_hi", "t", "t_lo", "t_hi", "n_times", "x",
                "grid_size", "n_modes", "drift", "diffusion",
                "diffusion_amplitude", "dt", "j_min", "j_max", "j_cap",
                "replica"});
  require_keys(c.tolerances, wt, {"slope_lo", "slope_hi", "upper_tol"});
  ImageDimensionConfig k;
  k.kind = get_str(c.params, "kind", k.kind, wp);
  k.p = static_cast<int>(get_int(c.params, "p", k.p, wp));
  k.use_cantor = get_bool(c.params, "use_cantor", k.use_cantor, wp);
  k.cantor.depth =
      static_cast<int>(get_int(c.params, "cantor_depth", k.cantor.depth, wp));
  k.cantor.ratio = get_num(c.params, "cantor_ratio", k.cantor.ratio, wp);
  k.cantor.lo = get_num(c.params, "cantor_lo", k.cantor.lo, wp);
  k.cantor.hi = get_num(c.params, "cantor_hi", k.cantor.hi, wp);
  k.t = get_num(c.params, "t", k.t, wp);
  k.t_lo = get_num(c.params, "t_lo", k.t_lo, wp);
  k.t_hi = get_num(c.params, "t_hi", k.t_hi, wp);
  k.n_times = get_int(c.params, "n_times", k.n_times, wp);
  k.x = get_num(c.params, "x", k.x, wp);
  k.grid_size = static_cast<int>(get_int(c.params, "grid_size", k.grid_size, wp));
  k.n_modes = static_cast<int>(get_int(c.params, "n_modes", k.n_modes, wp));
  k.drift = get_str(c.params, "drift", k.drift, wp);
  k.diffusion = get_str(c.params, "diffusion", k.diffusion, wp);
  k.diffusion_amplitude =
      get_num(c.params, "diffusion_amplitude", k.diffusion_amplitude, wp);
  k.dt = get_num(c.params, "dt", k.dt, wp);
  k.j_min = static_cast<int>(get_int(c.params, "j_min", k.j_min, wp));
  k.j_max = static_cast<int>(get_int(c.params, "j_max", k.j_max, wp));
  k.j_cap = static_cast<int>(get_int(c.params, "j_cap", k.j_cap, wp));
  k.replica = static_cast<std::uint64_t>(get_int(c.params, "replica", 0, wp));
  k.slope_lo = get_num(c.tolerances, "slope_lo", k.slope_lo, wt);
  k.slope_hi = get_num(c.tolerances, "slope_hi", k.slope_hi, wt);
  k.upper_tol = get_num(c.tolerances, "upper_tol", k.upper_tol, wt);
  k.seed = c.seed;
  return k;
}

ExperimentResult run_dimension(const ExperimentConfig& c) {
  const ImageDimensionConfig base = dimension_config_from(c);
  const long R = std::max(1L, c.n_replicas);
  if (R == 1) return image_dimension_experiment(base).result;

  // Independent repeats; brackets are judged on the median estimate, the
  // ambient/theory cap on every replicate.
  std::vector<ImageDimensionOutcome> outs;
  outs.reserve(static_cast<std::size_t>(R));
  for (long r = 0; r < R; ++r) {
    ImageDimensionConfig one = base;
    one.replica = base.replica + static_cast<std::uint64_t>(r);
    outs.push_back(image_dimension_experiment(one));
  }
  ExperimentResult res;
  res.experiment = "dimension";
  res.table_header = {"replica", "j", "count"};
  std::vector<double> slopes;
  for (long r = 0; r < R; ++r) {
    const ExperimentResult& one = outs[static_cast<std::size_t>(r)].result;
    slopes.push_back(outs[static_cast<std::size_t>(r)].estimate.slope);
    for (const std::vector<double>& row : one.table) {
      std::vector<double> ext = {static_cast<double>(r)};
      ext.insert(ext.end(), row.begin(), row.end());
      res.table.push_back(std::move(ext));
    }
  }
  std::vector<double> sorted = slopes;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t h = sorted.size() / 2;
  const double median = sorted.size() % 2 == 1
                            ? sorted[h]
                            : 0.5 * (sorted[h - 1] + sorted[h]);
  res.values = {{"slope_median", median},
                {"slope_min", sorted.front()},
                {"slope_max", sorted.back()},
                {"target", outs[0].target},
                {"n_replicas", static_cast<double>(R)},
                {"j_min", outs[0].result.value("j_min")},
                {"j_max", outs[0].result.value("j_max")},
                {"n_points", outs[0].result.value("n_points")}};
  for (long r = 0; r < R; ++r) {
    res.values.push_back({"slope_" + std::to_string(r),
                          slopes[static_cast<std::size_t>(r)]});
  }
  res.notes = outs[0].result.notes;
  res.notes.push_back("median over " + std::to_string(R) +
                      " independent replicas");
  res.check_le("estimate-upper-bound", sorted.back(),
               std::min(outs[0].target, static_cast<double>(base.p)) +
                   base.upper_tol);
  if (!std::isnan(base.slope_lo) && !std::isnan(base.slope_hi)) {
    res.check_in("estimate-bracket", median, base.slope_lo, base.slope_hi);
  }
  return res;
}

CountingGrowthConfig counts_config_from(const ExperimentConfig& c) {
  const std::string wp = c.experiment + " params";
  require_keys(c.params, wp,
               {"p", "delta", "alpha", "n_lo", "n_hi", "times", "n_centers",
                "n_modes", "cross_check_n_max", "replica"});
  require_keys(c.tolerances, c.experiment + " tolerances", {});
  CountingGrowthConfig k;
  k.p = static_cast<int>(get_int(c.params, "p", k.p, wp));
  k.delta = get_num(c.params, "delta", k.delta, wp);
  k.alpha = get_num(c.params, "alpha", k.alpha, wp);
  k.n_lo = static_cast<int>(get_int(c.params, "n_lo", k.n_lo, wp));
  k.n_hi = static_cast<int>(get_int(c.params, "n_hi", k.n_hi, wp));
  k.times = get_vec(c.params, "times", k.times, wp);
  k.n_centers = static_cast<int>(get_int(c.params, "n_centers", k.n_centers, wp));
  k.n_modes = static_cast<int>(get_int(c.params, "n_modes", k.n_modes, wp));
  k.cross_check_n_max = static_cast<int>(
      get_int(c.params, "cross_check_n_max", k.cross_check_n_max, wp));
  k.replica = static_cast<std::uint64_t>(get_int(c.params, "replica", 0, wp));
  k.seed = c.seed;
  return k;
}

ExperimentResult run_counts(const ExperimentConfig& c) {
  const CountingGrowthConfig base = counts_config_from(c);
  const long R = std::max(1L, c.n_replicas);
  if (R == 1) return counting_growth_experiment(base);

  ExperimentResult res;
  res.experiment = "counts";
  double max_ratio = 0.0;
  bool recount_ok = true;
  std::vector<std::string> notes;
  for (long r = 0; r < R; ++r) {
    CountingGrowthConfig one = base;
    one.replica = base.replica + static_cast<std::uint64_t>(r);
    const ExperimentResult rep = counting_growth_experiment(one);
    if (r == 0) {
      res.table_header = {"replica"};
      res.table_header.insert(res.table_header.end(), rep.table_header.begin(),
                              rep.table_header.end());
      res.notes = rep.notes;
    }
    for (const std::vector<double>& row : rep.table) {
      std::vector<double> ext = {static_cast<double>(r)};
      ext.insert(ext.end(), row.begin(), row.end());
      res.table.push_back(std::move(ext));
    }
    const double ratio = rep.value("max_count_to_bound_ratio");
    max_ratio = std::max(max_ratio, ratio);
    res.values.push_back({"ratio_" + std::to_string(r), ratio});
    recount_ok = recount_ok && rep.find("independent-recount-agrees")->pass;
  }
  res.values.push_back({"max_count_to_bound_ratio", max_ratio});
  res.values.push_back({"n_replicas", static_cast<double>(R)});
  res.notes.push_back("worst case over " + std::to_string(R) +
                      " independent replicas");
  res.check_le("count-within-bound", max_ratio, 1.0);
  res.check_true("independent-recount-agrees", recount_ok,
                 recount_ok ? 1.0 : 0.0,
                 "cell-index counts equal the direct lattice recount in "
                 "every replica");
  return res;
}

ExperimentResult run_structural(const ExperimentConfig& c) {
  forbid_replicas(c);
  const std::string wp = c.experiment + " params";
  require_keys(c.params, wp, {"n_random", "bdg_replicas"});
  require_keys(c.tolerances, c.experiment + " tolerances", {});
  StructuralConfig k;
  k.n_random = static_cast<int>(get_int(c.params, "n_random", k.n_random, wp));
  k.bdg_replicas = get_int(c.params, "bdg_replicas", k.bdg_replicas, wp);
  k.seed = c.seed;
  return structural_experiment(k);
}

ExperimentResult run_sample_field(const ExperimentConfig& c) {
  forbid_replicas(c);
  const std::string wp = c.experiment + " params";
  require_keys(c.params, wp, {"p", "n_modes", "times", "n_sites"});
  require_keys(c.tolerances, c.experiment + " tolerances", {});
  SampleFieldConfig k;
  k.p = static_cast<int>(get_int(c.params, "p", k.p, wp));
  k.n_modes = static_cast<int>(get_int(c.params, "n_modes", k.n_modes, wp));
  k.times = get_vec(c.params, "times", k.times, wp);
  k.n_sites = static_cast<int>(get_int(c.params, "n_sites", k.n_sites, wp));
  k.seed = c.seed;
  return sample_field_experiment(k);
}

ExperimentResult run_solve(const ExperimentConfig& c) {
  forbid_replicas(c);
  const std::string wp = c.experiment + " params";
  require_keys(c.params, wp,
               {"p", "grid_size", "dt", "t_end", "drift", "diffusion",
                "diffusion_param", "initial", "initial_a", "initial_b",
                "snapshot_times", "replica"});
  require_keys(c.tolerances, c.experiment + " tolerances", {});
  SolveRunConfig k;
  k.p = static_cast<int>(get_int(c.params, "p", k.p, wp));
  k.grid_size = static_cast<int>(get_int(c.params, "grid_size", k.grid_size, wp));
  k.dt = get_num(c.params, "dt", k.dt, wp);
  k.t_end = get_num(c.params, "t_end", k.t_end, wp);
  k.drift = get_str(c.params, "drift", k.drift, wp);
  k.diffusion = get_str(c.params, "diffusion", k.diffusion, wp);
  k.diffusion_param = get_num(c.params, "diffusion_param", k.diffusion_param, wp);
  k.initial = get_str(c.params, "initial", k.initial, wp);
  k.initial_a = get_num(c.params, "initial_a", k.initial_a, wp);
  k.initial_b = get_num(c.params, "initial_b", k.initial_b, wp);
  k.snapshot_times = get_vec(c.params, "snapshot_times", k.snapshot_times, wp);
  k.replica = static_cast<std::uint64_t>(get_int(c.params, "replica", 0, wp));
  k.seed = c.seed;
  return solve_run_experiment(k);
}

ExperimentResult dispatch(const ExperimentConfig& c) {
  if (c.experiment == "kernel-duality") return run_kernel_duality(c);
  if (c.experiment == "kernel-laws") return run_kernel_laws(c);
  if (c.experiment == "variance") return run_variance(c);
  if (c.experiment == "increment-bounds") return run_increment_bounds(c);
  if (c.experiment == "slnd") return run_slnd(c);
  if (c.experiment == "small-ball") return run_small_ball(c);
  if (c.experiment == "sampler-exactness") return run_sampler_exactness(c);
  if (c.experiment == "linearization") return run_linearization(c);
  if (c.experiment == "moments") return run_moments(c);
  if (c.experiment == "dimension") return run_dimension(c);
  if (c.experiment == "counts") return run_counts(c);
  if (c.experiment == "structural") return run_structural(c);
  if (c.experiment == "sample-h") return run_sample_field(c);
  if (c.experiment == "solve") return run_solve(c);
  std::string names;
  for (const std::string& n : known_experiments()) {
    names += names.empty() ? "" : ", ";
    names += n;
  }
  throw UnknownExperiment("unknown experiment \"" + c.experiment +
                          "\" (known: " + names + ")");
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void write_data_csv(const ExperimentResult& r, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot write data file " + path);
  }
  CsvWriter w(os);
  if (!r.table_header.empty()) {
    w.row(r.table_header);
    for (const std::vector<double>& row : r.table) {
      std::vector<std::string> fields;
      fields.reserve(row.size());
      for (double v : row) fields.push_back(fmt_double(v));
      w.row(fields);
    }
  } else {
    // Experiments without a numeric table publish their checks as the table.
    w.row({"check", "pass", "measured"});
    for (const CheckResult& c : r.checks) {
      w.row({c.name, c.pass ? "1" : "0", fmt_double(c.measured)});
    }
  }
}

json manifest_record(const ExperimentConfig& cfg, const ExperimentResult& r,
                     double wall_time_s, const std::string& data_file) {
  json rec;
  rec["schema_version"] = 1;
  rec["tool"] = version_string();
  rec["experiment"] = r.experiment;
  rec["config_hash"] = hash_hex(config_hash(cfg));
  rec["seed"] = cfg.seed;
  rec["n_replicas"] = cfg.n_replicas;
  rec["wall_time_s"] = wall_time_s;
  rec["all_pass"] = r.all_pass();
  json checks = json::array();
  for (const CheckResult& c : r.checks) {
    json jc;
    jc["name"] = c.name;
    jc["pass"] = c.pass;
    jc["measured"] = c.measured;
    jc["detail"] = c.detail;
    checks.push_back(jc);
  }
  rec["checks"] = checks;
  json values = json::object();
  for (const auto& kv : r.values) values[kv.first] = kv.second;
  rec["values"] = values;
  rec["notes"] = r.notes;
  rec["data_file"] = data_file;
  return rec;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config) {
  if (config.threads > 0) set_threads(config.threads);
  RunOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  out.result = dispatch(config);
  out.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();

  std::filesystem::create_directories(config.out_dir);
  const std::string base =
      (std::filesystem::path(config.out_dir) / out.result.experiment).string();
  out.data_path = base + "-data.csv";
  write_data_csv(out.result, out.data_path);

  out.manifest_path = base + "-manifest.ndjson";
  std::ofstream mos(out.manifest_path, std::ios::binary | std::ios::app);
  if (!mos) {
    throw std::runtime_error("cannot write manifest " + out.manifest_path);
  }
  const std::string data_file =
      std::filesystem::path(out.data_path).filename().string();
  mos << manifest_record(config, out.result, out.wall_time_s, data_file).dump()
      << "\n";
  return out;
}

// --- Manifest aggregation ------------------------------------------------

namespace {

[[noreturn]] void fail_record(const std::string& path, long line,
                              const std::string& what) {
  throw SchemaError(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

ReportTable report_from_manifests(const std::vector<std::string>& paths) {
  ReportTable table;
  for (const std::string& path : paths) {
    std::ifstream in(path);
    if (!in) {
      throw SchemaError(path + ": cannot open manifest");
    }
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json rec;
      try {
        rec = json::parse(line);
      } catch (const json::parse_error& e) {
        fail_record(path, line_no, e.what());
      }
      if (!rec.is_object()) fail_record(path, line_no, "record is not an object");
      if (!rec.contains("experiment") || !rec["experiment"].is_string()) {
        fail_record(path, line_no, "missing string field \"experiment\"");
      }
      if (!rec.contains("config_hash") || !rec["config_hash"].is_string()) {
        fail_record(path, line_no, "missing string field \"config_hash\"");
      }
      if (!rec.contains("all_pass") || !rec["all_pass"].is_boolean()) {
        fail_record(path, line_no, "missing boolean field \"all_pass\"");
      }
      if (!rec.contains("checks") || !rec["checks"].is_array()) {
        fail_record(path, line_no, "missing array field \"checks\"");
      }
      if (!rec.contains("wall_time_s") || !rec["wall_time_s"].is_number()) {
        fail_record(path, line_no, "missing numeric field \"wall_time_s\"");
      }
      ReportRow row;
      row.experiment = rec["experiment"].get<std::string>();
      row.config_hash = rec["config_hash"].get<std::string>();
      row.wall_time_s = rec["wall_time_s"].get<double>();
      row.source = path;
      std::vector<std::string> seen;
      for (const json& jc : rec["checks"]) {
        if (!jc.is_object() || !jc.contains("name") ||
            !jc["name"].is_string() || !jc.contains("pass") ||
            !jc["pass"].is_boolean()) {
          fail_record(path, line_no,
                      "each check needs a string \"name\" and boolean "
                      "\"pass\"");
        }
        const std::string name = jc["name"].get<std::string>();
        if (std::find(seen.begin(), seen.end(), name) != seen.end()) {
          fail_record(path, line_no,
                      "check \"" + name +
                          "\" appears more than once in one record");
        }
        seen.push_back(name);
        ++row.n_checks;
        if (!jc["pass"].get<bool>()) ++row.n_failed;
      }
      const bool pass = rec["all_pass"].get<bool>();
      if (pass != (row.n_failed == 0)) {
        fail_record(path, line_no,
                    "\"all_pass\" contradicts the per-check flags");
      }
      row.status = pass ? "pass" : "fail";
      table.all_pass = table.all_pass && pass;
      table.rows.push_back(std::move(row));
    }
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ReportRow& a, const ReportRow& b) {
                     return a.experiment < b.experiment;
                   });
  return table;
}

void write_report_csv(const ReportTable& table, std::ostream& os) {
  CsvWriter w(os);
  w.row({"experiment", "config_hash", "status", "n_checks", "n_failed",
         "wall_time_s", "source"});
  for (const ReportRow& r : table.rows) {
    w.row({r.experiment, r.config_hash, r.status, std::to_string(r.n_checks),
           std::to_string(r.n_failed), fmt_double(r.wall_time_s), r.source});
  }
}

std::string render_report_text(const ReportTable& table) {
  std::ostringstream os;
  if (table.rows.empty()) {
    os << "no run records\n";
    return os.str();
  }
  std::size_t name_w = 10;
  for (const ReportRow& r : table.rows) {
    name_w = std::max(name_w, r.experiment.size());
  }
  os << "experiment";
  os << std::string(name_w - 10 + 2, ' ') << "status  checks  failed  wall_s\n";
  long n_pass = 0;
  for (const ReportRow& r : table.rows) {
    os << r.experiment << std::string(name_w - r.experiment.size() + 2, ' ');
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-6s  %6ld  %6ld  %.3f",
                  r.status.c_str(), r.n_checks, r.n_failed, r.wall_time_s);
    os << buf << "\n";
    if (r.status == "pass") ++n_pass;
  }
  os << n_pass << "/" << table.rows.size() << " runs passed\n";
  return os.str();
}

}  // namespace torusheat
