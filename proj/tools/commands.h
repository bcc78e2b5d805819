#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dugma/bench.h"
#include "dugma/registration.h"
#include "dugma/uncertainty.h"
#include "json.hpp"

namespace dugma::cli {

// Stable process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 1,
  kExitNotConverged = 2,
};

struct BenchSettings {
  std::string factor = "rotation";
  // Controlled values; empty means the factor's controlled sweep.
  std::vector<double> values;
  int instances = 3;
  // Directory of *.cloud models (sorted by name). Empty: generate
  // procedural models instead.
  std::string model_dir;
  int model_count = 5;
  int model_points = 1000;
  double model_base_std = 0.01;
  bool identity_covariances = false;
  bool record_timing = true;
};

struct OutputSettings {
  std::string records = "records.csv";
  std::string summary_prefix = "summary";
};

// Everything a command can be configured with. JSON layout:
//
//   {
//     "seed": 1,
//     "registration": {"max_em_iters", "em_objective_tol", "em_step_tol",
//                      "scale_covariances", "relative_scaling",
//                      "compound_scaling",
//                      "sigma_floor",
//                      "solver": {"max_inner_iters", "grad_tol",
//                                 "step_tol", "bounded_rotation"}},
//     "ranges": {"rotation_random": [lo, hi],
//                "rotation_controlled": [start, end, step], ... for
//                outliers / noise / occlusion, "sample_rate_fixed",
//                "sample_rate_moving", "translation_frac"},
//     "sensor": {"w1", "w2"} or {"calibration"},
//     "bench": {"factor", "values", "instances", "model_dir",
//               "model_count", "model_points", "model_base_std",
//               "identity_covariances", "record_timing"},
//     "output": {"records", "summary_prefix"}
//   }
//
// Every key is optional; unknown keys are rejected. `dugma config` prints
// the defaults.
struct RunConfig {
  std::uint64_t seed = 1;
  RegistrationConfig registration;
  bool bounded_rotation = false;
  FactorRanges ranges;
  SensorModelParams sensor;
  BenchSettings bench;
  OutputSettings output;
};

// Overlays the keys present in `j` onto `config`. Throws InputError on
// unknown keys, wrong types or invalid values.
void ApplyJson(const nlohmann::json& j, RunConfig& config);
void ApplyConfigFile(const std::string& path, RunConfig& config);
nlohmann::json ToJson(const RunConfig& config);
// Registration config with the solver bounds materialized.
RegistrationConfig EffectiveRegistration(const RunConfig& config, int dim);

struct RegisterArgs {
  std::string fixed_path;
  std::string moving_path;
  std::string out_path;
  bool identity_covariances = false;
};

struct SynthArgs {
  std::string model_path;
  std::string out_dir;
  SynthesisFactors factors;
  // Isotropic covariance (fraction of radius) for models without one.
  double base_std = 0.01;
};

struct ConvertArgs {
  std::string input_path;
  std::string output_path;
  // "none": coordinates only; "isotropic": (base_std * radius)^2 I;
  // "sensor": rows are "x y z alpha" in the camera frame, depth = z.
  std::string covariance = "none";
  double base_std = 0.01;
};

struct ShapesArgs {
  std::string out_dir;
  int count = 5;
  int points = 1000;
  double base_std = 0.01;
};

// Each command reports progress and errors on `err`, results on `out`, and
// returns an ExitCode.
int CmdRegister(const RegisterArgs& args, const RunConfig& config,
                std::ostream& out, std::ostream& err);
int CmdSynth(const SynthArgs& args, const RunConfig& config, std::ostream& out,
             std::ostream& err);
int CmdBench(const RunConfig& config, std::ostream& out, std::ostream& err);
int CmdEval(const std::string& gt_path, const std::string& est_path,
            std::ostream& out, std::ostream& err);
int CmdConvert(const ConvertArgs& args, const RunConfig& config,
               std::ostream& out, std::ostream& err);
int CmdShapes(const ShapesArgs& args, const RunConfig& config,
              std::ostream& out, std::ostream& err);

}  // namespace dugma::cli
