#include "commands.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "cloud_io.h"
#include "dugma/shapes.h"

namespace dugma::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void CheckKeys(const json& j, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw InputError(where + " must be an object");
  for (const auto& item : j.items()) {
    const bool known =
        std::any_of(allowed.begin(), allowed.end(),
                    [&](const char* key) { return item.key() == key; });
    if (!known) {
      throw InputError("unknown config key '" + where + "." + item.key() + "'");
    }
  }
}

template <typename T>
void Read(const json& j, const std::string& where, const char* key, T& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  const bool ok = [&] {
    if constexpr (std::is_same_v<T, bool>) {
      return v.is_boolean();
    } else if constexpr (std::is_integral_v<T>) {
      return v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
      return v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v.is_string();
    } else {
      return true;
    }
  }();
  if (!ok) throw InputError(where + "." + key + " has the wrong type");
  try {
    out = v.get<T>();
  } catch (const json::exception& e) {
    throw InputError(where + "." + key + ": " + e.what());
  }
}

void ReadRange(const json& j, const std::string& where, const char* key,
               Range& out) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  Read(j, where, key, v);
  if (v.size() != 2) throw InputError(where + "." + key + " needs [lo, hi]");
  out = {v[0], v[1]};
}

void ReadSweep(const json& j, const std::string& where, const char* key,
               Sweep& out) {
  if (!j.contains(key)) return;
  std::vector<double> v;
  Read(j, where, key, v);
  if (v.size() != 3) {
    throw InputError(where + "." + key + " needs [start, end, step]");
  }
  out = {v[0], v[1], v[2]};
}

std::vector<PointCloud<3>> LoadModels(const RunConfig& config,
                                      std::ostream& err) {
  const BenchSettings& b = config.bench;
  if (b.model_dir.empty()) {
    err << "generating " << b.model_count << " procedural models of ~"
        << b.model_points << " points\n";
    return GenerateModelSet(b.model_count, b.model_points, config.seed,
                            b.model_base_std);
  }
  if (!fs::is_directory(b.model_dir)) {
    throw InputError("model directory '" + b.model_dir + "' does not exist");
  }
  std::vector<fs::path> paths;
  for (const auto& entry : fs::directory_iterator(b.model_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".cloud") {
      paths.push_back(entry.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  if (paths.empty()) {
    throw InputError("model directory '" + b.model_dir + "' has no .cloud files");
  }
  std::vector<PointCloud<3>> models;
  for (const auto& path : paths) {
    CloudFile file = ReadCloudFile(path.string());
    if (file.dim() != 3) throw InputError(path.string() + ": models must be 3D");
    auto& cloud = std::get<PointCloud<3>>(file.cloud);
    if (!file.has_covariance) {
      const double s = b.model_base_std * cloud.Radius();
      cloud = cloud.WithIsotropicCovariances(s * s);
    }
    models.push_back(std::move(cloud));
  }
  return models;
}

template <int Dim>
int RegisterClouds(const CloudFile& fixed_file, const CloudFile& moving_file,
                   const RegisterArgs& args, const RunConfig& config,
                   std::ostream& out, std::ostream& err) {
  PointCloud<Dim> fixed = std::get<PointCloud<Dim>>(fixed_file.cloud);
  PointCloud<Dim> moving = std::get<PointCloud<Dim>>(moving_file.cloud);
  if (args.identity_covariances) {
    fixed = fixed.WithIsotropicCovariances(1.0);
    moving = moving.WithIsotropicCovariances(1.0);
  }
  TransformFile result_file;
  int code = kExitOk;
  try {
    const RegistrationResult<Dim> result = Register<Dim>(
        fixed, moving, EffectiveRegistration(config, Dim));
    result_file = TransformFile::FromTransform<Dim>(result.transform);
    result_file.converged = result.converged;
    result_file.iterations = result.iterations;
    result_file.trace = result.trace;
    if (!result.converged) {
      err << "registration did not converge in " << result.iterations
          << " iterations\n";
      code = kExitNotConverged;
    }
  } catch (const RegistrationError& e) {
    err << "registration failed: " << e.what() << '\n';
    result_file = TransformFile::FromTransform<Dim>(RigidTransform<Dim>());
    result_file.converged = false;
    result_file.iterations = static_cast<int>(e.trace().size());
    result_file.trace = e.trace();
    code = kExitNotConverged;
  }
  WriteTransformFile(args.out_path, result_file);
  out << "wrote " << args.out_path << " (" << *result_file.iterations
      << " iterations, converged=" << (*result_file.converged ? 1 : 0) << ")\n";
  return code;
}

void WriteNoiseStds(const std::string& path,
                    const std::vector<Eigen::Vector3d>& stds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << "# per-point injected noise standard deviations sx sy sz\n";
  char buf[96];
  for (const auto& s : stds) {
    std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", s.x(), s.y(), s.z());
    out << buf;
  }
}

// Runs `body`, mapping input problems to exit code 1.
template <typename Body>
int Guarded(std::ostream& err, Body&& body) {
  try {
    return body();
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInputError;
}

}  // namespace

void ApplyJson(const json& j, RunConfig& config) {
  CheckKeys(j, "config",
            {"seed", "registration", "ranges", "sensor", "bench", "output"});
  Read(j, "config", "seed", config.seed);

  if (j.contains("registration")) {
    const json& r = j.at("registration");
    const std::string where = "registration";
    CheckKeys(r, where,
              {"max_em_iters", "em_objective_tol", "em_step_tol",
               "scale_covariances", "relative_scaling", "compound_scaling",
               "sigma_floor", "solver"});
    RegistrationConfig& c = config.registration;
    Read(r, where, "max_em_iters", c.max_em_iters);
    Read(r, where, "em_objective_tol", c.em_objective_tol);
    Read(r, where, "em_step_tol", c.em_step_tol);
    Read(r, where, "scale_covariances", c.scale_covariances);
    Read(r, where, "relative_scaling", c.relative_scaling);
    Read(r, where, "compound_scaling", c.compound_scaling);
    Read(r, where, "sigma_floor", c.sigma_floor);
    if (r.contains("solver")) {
      const json& s = r.at("solver");
      const std::string sw = "registration.solver";
      CheckKeys(s, sw,
                {"max_inner_iters", "grad_tol", "step_tol", "bounded_rotation"});
      Read(s, sw, "max_inner_iters", c.solver.max_inner_iters);
      Read(s, sw, "grad_tol", c.solver.grad_tol);
      Read(s, sw, "step_tol", c.solver.step_tol);
      Read(s, sw, "bounded_rotation", config.bounded_rotation);
    }
  }

  if (j.contains("ranges")) {
    const json& r = j.at("ranges");
    const std::string where = "ranges";
    CheckKeys(r, where,
              {"rotation_random", "rotation_controlled", "outliers_random",
               "outliers_controlled", "noise_random", "noise_controlled",
               "occlusion_random", "occlusion_controlled",
               "sample_rate_fixed", "sample_rate_moving", "translation_frac"});
    FactorRanges& f = config.ranges;
    ReadRange(r, where, "rotation_random", f.rotation_random);
    ReadSweep(r, where, "rotation_controlled", f.rotation_controlled);
    ReadRange(r, where, "outliers_random", f.outliers_random);
    ReadSweep(r, where, "outliers_controlled", f.outliers_controlled);
    ReadRange(r, where, "noise_random", f.noise_random);
    ReadSweep(r, where, "noise_controlled", f.noise_controlled);
    ReadRange(r, where, "occlusion_random", f.occlusion_random);
    ReadSweep(r, where, "occlusion_controlled", f.occlusion_controlled);
    Read(r, where, "sample_rate_fixed", f.sample_rate_fixed);
    Read(r, where, "sample_rate_moving", f.sample_rate_moving);
    Read(r, where, "translation_frac", f.translation_frac);
  }

  if (j.contains("sensor")) {
    const json& s = j.at("sensor");
    CheckKeys(s, "sensor", {"w1", "w2", "calibration"});
    if (s.contains("calibration")) {
      if (s.contains("w1") || s.contains("w2")) {
        throw InputError("sensor: give either calibration or w1/w2, not both");
      }
      double c = 0.0;
      Read(s, "sensor", "calibration", c);
      try {
        config.sensor = SensorModelParams::FromCalibration(c);
      } catch (const std::invalid_argument& e) {
        throw InputError(std::string("sensor: ") + e.what());
      }
    }
    Read(s, "sensor", "w1", config.sensor.w1);
    Read(s, "sensor", "w2", config.sensor.w2);
  }

  if (j.contains("bench")) {
    const json& b = j.at("bench");
    const std::string where = "bench";
    CheckKeys(b, where,
              {"factor", "values", "instances", "model_dir", "model_count",
               "model_points", "model_base_std", "identity_covariances",
               "record_timing"});
    BenchSettings& s = config.bench;
    Read(b, where, "factor", s.factor);
    Read(b, where, "values", s.values);
    Read(b, where, "instances", s.instances);
    Read(b, where, "model_dir", s.model_dir);
    Read(b, where, "model_count", s.model_count);
    Read(b, where, "model_points", s.model_points);
    Read(b, where, "model_base_std", s.model_base_std);
    Read(b, where, "identity_covariances", s.identity_covariances);
    Read(b, where, "record_timing", s.record_timing);
  }

  if (j.contains("output")) {
    const json& o = j.at("output");
    CheckKeys(o, "output", {"records", "summary_prefix"});
    Read(o, "output", "records", config.output.records);
    Read(o, "output", "summary_prefix", config.output.summary_prefix);
  }

  // Validate the merged result so errors surface before any work starts.
  try {
    config.registration.Validate();
    config.ranges.Validate();
    config.sensor.Validate();
    ParseFactor(config.bench.factor);
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("invalid config: ") + e.what());
  }
  if (config.bench.instances < 1 || config.bench.model_count < 1 ||
      config.bench.model_points < 50 || !(config.bench.model_base_std > 0.0)) {
    throw InputError(
        "invalid config: bench needs instances >= 1, model_count >= 1, "
        "model_points >= 50 and model_base_std > 0");
  }
}

void ApplyConfigFile(const std::string& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  ApplyJson(j, config);
}

json ToJson(const RunConfig& config) {
  const RegistrationConfig& r = config.registration;
  const FactorRanges& f = config.ranges;
  auto range = [](const Range& x) { return json::array({x.lower, x.upper}); };
  auto sweep = [](const Sweep& x) {
    return json::array({x.start, x.end, x.step});
  };
  json j;
  j["seed"] = config.seed;
  j["registration"] = {
      {"max_em_iters", r.max_em_iters},
      {"em_objective_tol", r.em_objective_tol},
      {"em_step_tol", r.em_step_tol},
      {"scale_covariances", r.scale_covariances},
      {"relative_scaling", r.relative_scaling},
      {"compound_scaling", r.compound_scaling},
      {"sigma_floor", r.sigma_floor},
      {"solver",
       {{"max_inner_iters", r.solver.max_inner_iters},
        {"grad_tol", r.solver.grad_tol},
        {"step_tol", r.solver.step_tol},
        {"bounded_rotation", config.bounded_rotation}}}};
  j["ranges"] = {{"rotation_random", range(f.rotation_random)},
                 {"rotation_controlled", sweep(f.rotation_controlled)},
                 {"outliers_random", range(f.outliers_random)},
                 {"outliers_controlled", sweep(f.outliers_controlled)},
                 {"noise_random", range(f.noise_random)},
                 {"noise_controlled", sweep(f.noise_controlled)},
                 {"occlusion_random", range(f.occlusion_random)},
                 {"occlusion_controlled", sweep(f.occlusion_controlled)},
                 {"sample_rate_fixed", f.sample_rate_fixed},
                 {"sample_rate_moving", f.sample_rate_moving},
                 {"translation_frac", f.translation_frac}};
  j["sensor"] = {{"w1", config.sensor.w1}, {"w2", config.sensor.w2}};
  const BenchSettings& b = config.bench;
  j["bench"] = {{"factor", b.factor},
                {"values", b.values},
                {"instances", b.instances},
                {"model_dir", b.model_dir},
                {"model_count", b.model_count},
                {"model_points", b.model_points},
                {"model_base_std", b.model_base_std},
                {"identity_covariances", b.identity_covariances},
                {"record_timing", b.record_timing}};
  j["output"] = {{"records", config.output.records},
                 {"summary_prefix", config.output.summary_prefix}};
  return j;
}

RegistrationConfig EffectiveRegistration(const RunConfig& config, int dim) {
  RegistrationConfig r = config.registration;
  if (config.bounded_rotation) {
    const int rot = dim == 3 ? kRotationDof<3> : kRotationDof<2>;
    r.solver.bounds = RotationBounds(rot, rot + dim);
  }
  return r;
}

int CmdRegister(const RegisterArgs& args, const RunConfig& config,
                std::ostream& out, std::ostream& err) {
  return Guarded(err, [&]() -> int {
    const CloudFile fixed = ReadCloudFile(args.fixed_path);
    const CloudFile moving = ReadCloudFile(args.moving_path);
    if (fixed.dim() != moving.dim()) {
      throw InputError("dimension mismatch: fixed is " +
                       std::to_string(fixed.dim()) + "D, moving is " +
                       std::to_string(moving.dim()) + "D");
    }
    if (!args.identity_covariances &&
        (!fixed.has_covariance || !moving.has_covariance)) {
      throw InputError(
          "input clouds lack covariances; pass --identity-cov to use I");
    }
    if (fixed.dim() == 2) {
      return RegisterClouds<2>(fixed, moving, args, config, out, err);
    }
    return RegisterClouds<3>(fixed, moving, args, config, out, err);
  });
}

int CmdSynth(const SynthArgs& args, const RunConfig& config, std::ostream& out,
             std::ostream& err) {
  return Guarded(err, [&]() -> int {
    CloudFile model_file = ReadCloudFile(args.model_path);
    if (model_file.dim() != 3) throw InputError("synth needs a 3D model");
    PointCloud<3> model = std::get<PointCloud<3>>(model_file.cloud);
    if (!model_file.has_covariance) {
      if (!(args.base_std > 0.0)) throw InputError("base std must be positive");
      const double s = args.base_std * model.Radius();
      model = model.WithIsotropicCovariances(s * s);
    }
    const SyntheticPair pair = SynthesizePair(model, args.factors, config.seed);
    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    WriteCloudFile<3>((dir / "fixed.cloud").string(), pair.fixed);
    WriteCloudFile<3>((dir / "moving.cloud").string(), pair.moving);
    WriteTransformFile((dir / "gt_transform.txt").string(),
                       TransformFile::FromTransform<3>(pair.ground_truth));
    WriteNoiseStds((dir / "fixed_noise_std.txt").string(), pair.fixed_noise_std);
    WriteNoiseStds((dir / "moving_noise_std.txt").string(),
                   pair.moving_noise_std);
    out << "wrote " << pair.fixed.size() << " fixed and " << pair.moving.size()
        << " moving points to " << args.out_dir << '\n';
    return kExitOk;
  });
}

int CmdBench(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return Guarded(err, [&]() -> int {
    ExperimentOptions options;
    options.factor = ParseFactor(config.bench.factor);
    options.values = config.bench.values.empty()
                         ? config.ranges.Controlled(options.factor).Values()
                         : config.bench.values;
    options.instances = config.bench.instances;
    options.seed = config.seed;
    options.ranges = config.ranges;
    options.registration = EffectiveRegistration(config, 3);
    options.identity_covariances = config.bench.identity_covariances;
    options.record_timing = config.bench.record_timing;

    const std::vector<PointCloud<3>> models = LoadModels(config, err);
    const fs::path records_path(config.output.records);
    if (records_path.has_parent_path()) {
      fs::create_directories(records_path.parent_path());
    }
    RecordWriter writer(config.output.records);
    const std::size_t total =
        options.values.size() * models.size() * options.instances;
    std::size_t skipped = 0;
    for (const double v : options.values) {
      for (int s = 0; s < static_cast<int>(models.size()); ++s) {
        for (int i = 0; i < options.instances; ++i) {
          skipped += writer.done().count(
              {ToString(options.factor), v, s, i});
        }
      }
    }
    err << "bench " << ToString(options.factor) << ": " << total
        << " trials, " << skipped << " already recorded\n";

    std::size_t finished = 0;
    RunExperiment(models, options, writer.done(),
                  [&](const ExperimentRecord& record) {
                    writer.Append(record);
                    ++finished;
                    if (!record.note.empty()) {
                      err << "trial " << FormatRecord(record)
                          << " failed: " << record.note << '\n';
                    }
                  });

    const std::vector<ExperimentRecord> all = ReadRecords(config.output.records);
    const std::vector<SummaryRow> rows = Summarize(all);
    const fs::path prefix(config.output.summary_prefix);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    WriteSummaryFiles(rows, config.output.summary_prefix);
    out << "ran " << finished << " trials; records in " << config.output.records
        << ", summary in " << config.output.summary_prefix << "_summary.csv\n";
    for (const auto& row : rows) {
      out << row.factor_name << '=' << row.factor_value
          << " success_rate=" << row.success_rate << " (" << row.successes
          << '/' << row.trials << ")\n";
    }
    return kExitOk;
  });
}

int CmdEval(const std::string& gt_path, const std::string& est_path,
            std::ostream& out, std::ostream& err) {
  return Guarded(err, [&]() -> int {
    const TransformFile gt = ReadTransformFile(gt_path);
    const TransformFile est = ReadTransformFile(est_path);
    if (gt.dim != est.dim) throw InputError("transform dimensions differ");
    double rot = 0.0;
    double trans = 0.0;
    if (gt.dim == 2) {
      rot = RotationError<2>(Mat<2>(gt.rotation), Mat<2>(est.rotation));
      trans = TranslationError<2>(Vec<2>(gt.translation), Vec<2>(est.translation));
    } else {
      rot = RotationError<3>(Mat<3>(gt.rotation), Mat<3>(est.rotation));
      trans = TranslationError<3>(Vec<3>(gt.translation), Vec<3>(est.translation));
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", rot);
    out << "rot_error=" << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.17g", trans);
    out << "trans_error=" << buf << '\n';
    out << "success=" << (IsSuccessful(rot, trans) ? "true" : "false") << '\n';
    return kExitOk;
  });
}

int CmdConvert(const ConvertArgs& args, const RunConfig& config,
               std::ostream& out, std::ostream& err) {
  return Guarded(err, [&]() -> int {
    CloudFile file;
    if (args.covariance == "sensor") {
      const auto rows = ReadNumericRows(args.input_path);
      if (rows.front().size() != 4) {
        throw InputError("sensor conversion needs rows 'x y z alpha'");
      }
      PointCloud<3>::PointList points;
      PointCloud<3>::CovarianceList covariances;
      for (const auto& row : rows) {
        points.emplace_back(row[0], row[1], row[2]);
        covariances.push_back(CovarianceFromUncertainty<3>(
            SensorUncertainty(row[3], row[2], config.sensor)));
      }
      file.cloud = PointCloud<3>(std::move(points), std::move(covariances));
      file.has_covariance = true;
    } else {
      file = ImportAny(args.input_path);
      if (args.covariance == "isotropic") {
        if (!(args.base_std > 0.0)) throw InputError("base std must be positive");
        std::visit(
            [&](auto& cloud) {
              const double s = args.base_std * cloud.Radius();
              cloud = cloud.WithIsotropicCovariances(s * s);
            },
            file.cloud);
        file.has_covariance = true;
      } else if (args.covariance == "none") {
        // Keep whatever the input carried.
      } else {
        throw InputError("unknown covariance mode '" + args.covariance + "'");
      }
    }
    WriteCloudFile(args.output_path, file);
    out << "wrote " << std::visit([](const auto& c) { return c.size(); }, file.cloud)
        << " points to " << args.output_path << '\n';
    return kExitOk;
  });
}

int CmdShapes(const ShapesArgs& args, const RunConfig& config,
              std::ostream& out, std::ostream& err) {
  return Guarded(err, [&]() -> int {
    if (args.count < 1 || args.points < 50 || !(args.base_std > 0.0)) {
      throw InputError("shapes needs count >= 1, points >= 50, base std > 0");
    }
    const auto models =
        GenerateModelSet(args.count, args.points, config.seed, args.base_std);
    fs::create_directories(args.out_dir);
    for (std::size_t k = 0; k < models.size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof(name), "model_%02zu_%s.cloud", k,
                    ShapeFamilyName(static_cast<int>(k)).c_str());
      WriteCloudFile<3>((fs::path(args.out_dir) / name).string(), models[k]);
    }
    out << "wrote " << models.size() << " models to " << args.out_dir << '\n';
    return kExitOk;
  });
}

}  // namespace dugma::cli
