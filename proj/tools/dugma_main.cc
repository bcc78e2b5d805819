// dugma: rigid point cloud registration with per-point uncertainty.
//
//   dugma register fixed.cloud moving.cloud -o estimate.txt
//   dugma synth model.cloud out_dir --rotation 30 --noise 0.1 --seed 7
//   dugma bench --config sweep.json
//   dugma eval gt_transform.txt estimate.txt
//   dugma convert scan.ply scan.cloud --covariance isotropic
//   dugma shapes models/ --count 5
//   dugma config            (prints the default run config)
//
// Flags are applied first and a --config file overrides them. The
// DUGMA_NUM_THREADS environment variable sets the worker thread count.

#include <cstdlib>
#include <iostream>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "commands.h"

namespace {

void ConfigureThreads() {
  const char* value = std::getenv("DUGMA_NUM_THREADS");
  if (value == nullptr || *value == '\0') return;
  char* end = nullptr;
  const long threads = std::strtol(value, &end, 10);
  if (*end != '\0' || threads < 1) {
    std::cerr << "warning: ignoring DUGMA_NUM_THREADS='" << value << "'\n";
    return;
  }
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(threads));
#endif
}

}  // namespace

int main(int argc, char** argv) {
  using namespace dugma::cli;
  ConfigureThreads();

  CLI::App app{"dugma - uncertainty-aware rigid point cloud registration"};
  app.require_subcommand(1);

  RunConfig config;
  std::string config_path;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "JSON run config; its keys override flags");
    cmd->add_option("--seed", config.seed, "Random seed")->capture_default_str();
  };

  RegisterArgs reg;
  CLI::App* reg_cmd = app.add_subcommand("register", "Register moving onto fixed");
  reg_cmd->add_option("fixed", reg.fixed_path, "Fixed .cloud file")->required();
  reg_cmd->add_option("moving", reg.moving_path, "Moving .cloud file")->required();
  reg_cmd->add_option("-o,--out", reg.out_path, "Output transform file")
      ->required();
  reg_cmd->add_flag("--identity-cov", reg.identity_covariances,
                    "Replace all covariances by the identity");
  reg_cmd->add_option("--max-iters", config.registration.max_em_iters,
                      "Maximum EM iterations")
      ->capture_default_str();
  add_common(reg_cmd);

  SynthArgs synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "Synthesize a perturbed fixed/moving pair");
  synth_cmd->add_option("model", synth.model_path, "3D model .cloud file")
      ->required();
  synth_cmd->add_option("out_dir", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--rotation", synth.factors.rotation_deg,
                        "Per-axis rotation angle (degrees)")
      ->capture_default_str();
  synth_cmd->add_option("--outliers", synth.factors.outliers,
                        "Outliers added to each cloud")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth.factors.noise_std_frac,
                        "Max noise std as a fraction of the radius")
      ->capture_default_str();
  synth_cmd->add_option("--occlusion", synth.factors.occlusion_frac,
                        "Fraction of points removed per copy")
      ->capture_default_str();
  synth_cmd->add_option("--sample-fixed", synth.factors.sample_rate_fixed,
                        "Fixed copy sampling rate")
      ->capture_default_str();
  synth_cmd->add_option("--sample-moving", synth.factors.sample_rate_moving,
                        "Moving copy sampling rate")
      ->capture_default_str();
  synth_cmd->add_option("--translation", synth.factors.translation_frac,
                        "Max translation per axis as a fraction of the radius")
      ->capture_default_str();
  synth_cmd->add_option("--base-std", synth.base_std,
                        "Covariance std (fraction of radius) for models "
                        "without covariances")
      ->capture_default_str();
  add_common(synth_cmd);

  CLI::App* bench_cmd =
      app.add_subcommand("bench", "Run a controlled-factor sweep (resumable)");
  bench_cmd->add_option("--factor", config.bench.factor,
                        "rotation | outliers | noise | occlusion")
      ->capture_default_str();
  bench_cmd->add_option("--values", config.bench.values,
                        "Controlled values (default: the factor's sweep)");
  bench_cmd->add_option("--instances", config.bench.instances,
                        "Instances per value and model")
      ->capture_default_str();
  bench_cmd->add_option("--models", config.bench.model_dir,
                        "Directory of .cloud models (default: procedural)");
  bench_cmd->add_option("--model-count", config.bench.model_count,
                        "Procedural model count")
      ->capture_default_str();
  bench_cmd->add_option("--model-points", config.bench.model_points,
                        "Procedural model size")
      ->capture_default_str();
  bench_cmd->add_flag("--identity-cov", config.bench.identity_covariances,
                      "Register with identity covariances");
  bench_cmd->add_option("--records", config.output.records, "Records CSV")
      ->capture_default_str();
  bench_cmd->add_option("--summary", config.output.summary_prefix,
                        "Summary file prefix")
      ->capture_default_str();
  bool no_timing = false;
  bench_cmd->add_flag("--no-timing", no_timing,
                      "Record wall_time_s as 0 for byte-reproducible CSVs");
  add_common(bench_cmd);

  std::string gt_path;
  std::string est_path;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Compare an estimate with the ground truth");
  eval_cmd->add_option("gt", gt_path, "Ground-truth transform file")->required();
  eval_cmd->add_option("est", est_path, "Estimated transform file")->required();

  ConvertArgs convert;
  CLI::App* convert_cmd =
      app.add_subcommand("convert", "Convert .xyz / ASCII .ply to .cloud");
  convert_cmd->add_option("input", convert.input_path, "Input file")->required();
  convert_cmd->add_option("output", convert.output_path, "Output .cloud file")
      ->required();
  convert_cmd
      ->add_option("--covariance", convert.covariance,
                   "none | isotropic | sensor (rows 'x y z alpha')")
      ->capture_default_str();
  convert_cmd->add_option("--base-std", convert.base_std,
                          "Isotropic std as a fraction of the radius")
      ->capture_default_str();
  double calibration = 0.0;
  convert_cmd->add_option("--calibration", calibration,
                          "Sensor calibration value c: U(pi/3,0)=U(0,3)=c");
  add_common(convert_cmd);

  ShapesArgs shapes;
  CLI::App* shapes_cmd =
      app.add_subcommand("shapes", "Write procedural benchmark models");
  shapes_cmd->add_option("out_dir", shapes.out_dir, "Output directory")
      ->required();
  shapes_cmd->add_option("--count", shapes.count, "Number of models")
      ->capture_default_str();
  shapes_cmd->add_option("--points", shapes.points, "Points per model")
      ->capture_default_str();
  shapes_cmd->add_option("--base-std", shapes.base_std,
                         "Covariance std as a fraction of the radius")
      ->capture_default_str();
  add_common(shapes_cmd);

  CLI::App* config_cmd =
      app.add_subcommand("config", "Print the default run config as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (no_timing) config.bench.record_timing = false;
    if (calibration != 0.0) {
      config.sensor = dugma::SensorModelParams::FromCalibration(calibration);
    }
    if (!config_path.empty()) ApplyConfigFile(config_path, config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  if (*reg_cmd) return CmdRegister(reg, config, std::cout, std::cerr);
  if (*synth_cmd) return CmdSynth(synth, config, std::cout, std::cerr);
  if (*bench_cmd) return CmdBench(config, std::cout, std::cerr);
  if (*eval_cmd) return CmdEval(gt_path, est_path, std::cout, std::cerr);
  if (*convert_cmd) return CmdConvert(convert, config, std::cout, std::cerr);
  if (*shapes_cmd) return CmdShapes(shapes, config, std::cout, std::cerr);
  if (*config_cmd) {
    std::cout << ToJson(config).dump(2) << '\n';
    return kExitOk;
  }
  return kExitInputError;
}
