#include "dugma/bench.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Geometry>

namespace dugma {
namespace {

using Rng = std::mt19937_64;

double Uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::string FormatDouble(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ParseDouble(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + s + "'");
  }
  return v;
}

int ParseInt(const std::string& s) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad integer '" + s + "'");
  }
  return v;
}

Rng SeededRng(std::initializer_list<std::uint64_t> parts) {
  std::vector<std::uint32_t> words;
  for (const std::uint64_t p : parts) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Indices kept after cutting away the `fraction` of points furthest along a
// random direction: a half-space through an interior point, positioned so
// the removed share matches the target.
std::vector<std::size_t> Occlude(const PointCloud<3>& cloud, double fraction,
                                 Rng& rng) {
  const std::size_t n = cloud.size();
  const auto remove = static_cast<std::size_t>(std::llround(fraction * n));
  if (remove > 0.9 * n) {
    throw std::invalid_argument("occlusion would remove more than 90% of points");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Vector3d dir;
  do {
    dir = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
  } while (dir.squaredNorm() < 1e-12);
  dir.normalize();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cloud.point(a).dot(dir) < cloud.point(b).dot(dir);
  });
  order.resize(n - remove);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::size_t> Subsample(std::size_t n, double rate, Rng& rng) {
  const auto keep = static_cast<std::size_t>(std::llround(rate * n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates with an explicit distribution keeps the stream
  // independent of std::shuffle's implementation.
  for (std::size_t k = 0; k < keep && k + 1 < n; ++k) {
    const std::size_t pick =
        std::uniform_int_distribution<std::size_t>(k, n - 1)(rng);
    std::swap(idx[k], idx[pick]);
  }
  idx.resize(std::min(keep, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

struct NoisyCloud {
  PointCloud<3>::PointList points;
  PointCloud<3>::CovarianceList covariances;
  std::vector<Eigen::Vector3d> stds;
};

NoisyCloud AddNoise(const PointCloud<3>& cloud, double max_std, Rng& rng) {
  NoisyCloud out;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    Eigen::Vector3d std_dev = Eigen::Vector3d::Zero();
    Eigen::Vector3d p = cloud.point(i);
    if (max_std > 0.0) {
      for (int k = 0; k < 3; ++k) {
        std_dev(k) = Uniform(rng, 0.0, max_std);
        p(k) += std_dev(k) * std::normal_distribution<double>(0.0, 1.0)(rng);
      }
    }
    out.points.push_back(p);
    out.covariances.push_back(cloud.covariance(i) +
                              Eigen::Matrix3d(std_dev.array().square().matrix().asDiagonal()));
    out.stds.push_back(std_dev);
  }
  return out;
}

void AddOutliers(NoisyCloud& cloud, const PointCloud<3>& model, int count,
                 double max_std, Rng& rng) {
  const auto [lo, hi] = model.BoundingBox();
  const Eigen::Vector3d center = 0.5 * (lo + hi);
  const Eigen::Vector3d half = 0.6 * (hi - lo);  // 1.2x the box
  for (int k = 0; k < count; ++k) {
    Eigen::Vector3d p;
    for (int a = 0; a < 3; ++a) {
      p(a) = Uniform(rng, center(a) - half(a), center(a) + half(a));
    }
    const std::size_t donor =
        std::uniform_int_distribution<std::size_t>(0, model.size() - 1)(rng);
    Eigen::Vector3d std_dev = Eigen::Vector3d::Zero();
    if (max_std > 0.0) {
      for (int a = 0; a < 3; ++a) std_dev(a) = Uniform(rng, 0.0, max_std);
    }
    cloud.points.push_back(p);
    cloud.covariances.push_back(
        model.covariance(donor) +
        Eigen::Matrix3d(std_dev.array().square().matrix().asDiagonal()));
    cloud.stds.push_back(std_dev);
  }
}

Eigen::Matrix3d AxisRotations(double rx, double ry, double rz) {
  return (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
          Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

double Mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double StdDev(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double m = Mean(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / v.size());
}

}  // namespace

std::string ToString(Factor factor) {
  switch (factor) {
    case Factor::kRotation:
      return "rotation";
    case Factor::kOutliers:
      return "outliers";
    case Factor::kNoise:
      return "noise";
    case Factor::kOcclusion:
      return "occlusion";
  }
  return "unknown";
}

Factor ParseFactor(const std::string& name) {
  if (name == "rotation") return Factor::kRotation;
  if (name == "outliers") return Factor::kOutliers;
  if (name == "noise") return Factor::kNoise;
  if (name == "occlusion") return Factor::kOcclusion;
  throw std::invalid_argument("unknown factor '" + name + "'");
}

std::vector<double> Sweep::Values() const {
  if (!(step > 0.0) || end < start) {
    throw std::invalid_argument("sweep needs step > 0 and end >= start");
  }
  std::vector<double> values;
  const auto count =
      static_cast<long>(std::floor((end - start) / step + 1e-9)) + 1;
  for (long k = 0; k < count; ++k) {
    // Rounded to 12 significant digits so 0.1 + 0.2 style drift does not
    // leak into the record keys.
    const double v = start + k * step;
    values.push_back(std::stod(FormatDouble(std::round(v * 1e12) / 1e12)));
  }
  return values;
}

void FactorRanges::Validate() const {
  auto check_range = [](const Range& r, const char* name) {
    if (r.upper < r.lower) {
      throw std::invalid_argument(std::string(name) + " range is inverted");
    }
  };
  auto check_fraction = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
    }
  };
  check_range(rotation_random, "rotation");
  check_range(outliers_random, "outliers");
  check_range(noise_random, "noise");
  check_range(occlusion_random, "occlusion");
  for (const Sweep* s : {&rotation_controlled, &outliers_controlled,
                         &noise_controlled, &occlusion_controlled}) {
    s->Values();
  }
  check_fraction(noise_random.lower, "noise");
  check_fraction(noise_random.upper, "noise");
  check_fraction(occlusion_random.lower, "occlusion");
  check_fraction(occlusion_random.upper, "occlusion");
  check_fraction(sample_rate_fixed, "sample_rate_fixed");
  check_fraction(sample_rate_moving, "sample_rate_moving");
  check_fraction(translation_frac, "translation_frac");
  if (outliers_random.lower < 0.0) {
    throw std::invalid_argument("outlier count must be >= 0");
  }
}

const Sweep& FactorRanges::Controlled(Factor factor) const {
  switch (factor) {
    case Factor::kRotation:
      return rotation_controlled;
    case Factor::kOutliers:
      return outliers_controlled;
    case Factor::kNoise:
      return noise_controlled;
    case Factor::kOcclusion:
      return occlusion_controlled;
  }
  throw std::invalid_argument("unknown factor");
}

SyntheticPair SynthesizePair(const PointCloud<3>& model,
                             const SynthesisFactors& factors,
                             std::uint64_t seed) {
  if (model.size() < 50) {
    throw std::invalid_argument("synthesis needs a model of >= 50 points");
  }
  if (factors.outliers < 0 || !(factors.noise_std_frac >= 0.0) ||
      !(factors.occlusion_frac >= 0.0) || factors.occlusion_frac > 1.0 ||
      !(factors.sample_rate_fixed > 0.0) || factors.sample_rate_fixed > 1.0 ||
      !(factors.sample_rate_moving > 0.0) || factors.sample_rate_moving > 1.0 ||
      !(factors.translation_frac >= 0.0)) {
    throw std::invalid_argument("synthesis factors out of range");
  }
  Rng rng = SeededRng({seed});
  const double radius = model.Radius();

  // (1) duplicate, (2) occlude each copy independently.
  const PointCloud<3> fixed_occluded =
      model.Select(Occlude(model, factors.occlusion_frac, rng));
  const PointCloud<3> moving_occluded =
      model.Select(Occlude(model, factors.occlusion_frac, rng));

  // (3) resample at different rates.
  const PointCloud<3> fixed_sampled = fixed_occluded.Select(
      Subsample(fixed_occluded.size(), factors.sample_rate_fixed, rng));
  const PointCloud<3> moving_sampled = moving_occluded.Select(
      Subsample(moving_occluded.size(), factors.sample_rate_moving, rng));

  // (4) anisotropic noise, variances recorded in the covariances.
  const double max_std = factors.noise_std_frac * radius;
  NoisyCloud fixed = AddNoise(fixed_sampled, max_std, rng);
  NoisyCloud moving = AddNoise(moving_sampled, max_std, rng);

  SyntheticPair pair;
  pair.fixed_inliers = fixed.points.size();
  pair.moving_inliers = moving.points.size();

  // (5) outliers in both clouds.
  AddOutliers(fixed, model, factors.outliers, max_std, rng);
  AddOutliers(moving, model, factors.outliers, max_std, rng);

  // (6) initial pose: each axis rotates by 0 or the factor angle.
  const double angle = factors.rotation_deg * M_PI / 180.0;
  Eigen::Vector3d angles = Eigen::Vector3d::Zero();
  if (angle != 0.0) {
    for (int a = 0; a < 3; ++a) {
      if (Uniform(rng, 0.0, 1.0) < 0.5) angles(a) = angle;
    }
    if (angles.isZero()) {
      angles(std::uniform_int_distribution<int>(0, 2)(rng)) = angle;
    }
  }
  Eigen::Vector3d shift;
  for (int a = 0; a < 3; ++a) {
    const double t = factors.translation_frac * radius;
    shift(a) = Uniform(rng, -t, t);
  }
  const Eigen::Matrix3d rotation =
      AxisRotations(angles.x(), angles.y(), angles.z());
  const Eigen::Vector3d center = model.Centroid();
  pair.perturbation =
      RigidTransform<3>(rotation, center + shift - rotation * center);
  pair.ground_truth = pair.perturbation.Inverse();

  pair.fixed = PointCloud<3>(std::move(fixed.points),
                             std::move(fixed.covariances));
  pair.moving = ApplyTransform(
      pair.perturbation,
      PointCloud<3>(std::move(moving.points), std::move(moving.covariances)));
  pair.fixed_noise_std = std::move(fixed.stds);
  pair.moving_noise_std = std::move(moving.stds);
  return pair;
}

SynthesisFactors DrawFactors(Factor controlled, double value,
                             const FactorRanges& ranges, std::uint64_t seed) {
  Rng rng = SeededRng({seed, 0xfac7u});
  SynthesisFactors f;
  f.rotation_deg = Uniform(rng, ranges.rotation_random.lower,
                           ranges.rotation_random.upper);
  f.outliers = static_cast<int>(std::llround(
      Uniform(rng, ranges.outliers_random.lower, ranges.outliers_random.upper)));
  f.noise_std_frac =
      Uniform(rng, ranges.noise_random.lower, ranges.noise_random.upper);
  f.occlusion_frac = Uniform(rng, ranges.occlusion_random.lower,
                             ranges.occlusion_random.upper);
  switch (controlled) {
    case Factor::kRotation:
      f.rotation_deg = value;
      break;
    case Factor::kOutliers:
      f.outliers = static_cast<int>(std::llround(value));
      break;
    case Factor::kNoise:
      f.noise_std_frac = value;
      break;
    case Factor::kOcclusion:
      f.occlusion_frac = value;
      break;
  }
  f.sample_rate_fixed = ranges.sample_rate_fixed;
  f.sample_rate_moving = ranges.sample_rate_moving;
  f.translation_frac = ranges.translation_frac;
  return f;
}

TrialKey KeyOf(const ExperimentRecord& record) {
  return {record.factor_name, record.factor_value, record.shape_id,
          record.instance_id};
}

SyntheticPair MakeTrialPair(const PointCloud<3>& model, int shape_id,
                            int instance_id, double value,
                            const ExperimentOptions& options) {
  Rng rng = SeededRng({options.seed, static_cast<std::uint64_t>(options.factor),
                       std::bit_cast<std::uint64_t>(value),
                       static_cast<std::uint64_t>(shape_id),
                       static_cast<std::uint64_t>(instance_id)});
  const std::uint64_t factor_seed = rng();
  const std::uint64_t pair_seed = rng();
  const SynthesisFactors factors =
      DrawFactors(options.factor, value, options.ranges, factor_seed);
  SyntheticPair pair = SynthesizePair(model, factors, pair_seed);
  if (options.identity_covariances) {
    pair.fixed = pair.fixed.WithIsotropicCovariances(1.0);
    pair.moving = pair.moving.WithIsotropicCovariances(1.0);
  }
  return pair;
}

ExperimentRecord RunTrial(const PointCloud<3>& model, int shape_id,
                          int instance_id, double value,
                          const ExperimentOptions& options) {
  ExperimentRecord record;
  record.factor_name = ToString(options.factor);
  record.factor_value = value;
  record.shape_id = shape_id;
  record.instance_id = instance_id;

  const auto start = std::chrono::steady_clock::now();
  try {
    const SyntheticPair pair =
        MakeTrialPair(model, shape_id, instance_id, value, options);
    const RegistrationResult<3> result =
        Register<3>(pair.fixed, pair.moving, options.registration);
    record.rot_error = RotationError<3>(pair.ground_truth.rotation(),
                                        result.transform.rotation());
    record.trans_error = TranslationError<3>(pair.ground_truth.translation(),
                                             result.transform.translation());
    record.success = IsSuccessful(record.rot_error, record.trans_error);
  } catch (const std::exception& e) {
    record.rot_error = std::numeric_limits<double>::quiet_NaN();
    record.trans_error = std::numeric_limits<double>::quiet_NaN();
    record.success = false;
    record.note = e.what();
  }
  const auto stop = std::chrono::steady_clock::now();
  record.wall_time_s =
      options.record_timing
          ? std::chrono::duration<double>(stop - start).count()
          : 0.0;
  return record;
}

std::vector<ExperimentRecord> RunExperiment(
    const std::vector<PointCloud<3>>& models, const ExperimentOptions& options,
    const std::set<TrialKey>& done,
    const std::function<void(const ExperimentRecord&)>& sink) {
  if (models.empty()) {
    throw std::invalid_argument("experiment needs at least one model");
  }
  if (options.instances < 1) {
    throw std::invalid_argument("experiment needs at least one instance");
  }
  options.ranges.Validate();
  options.registration.Validate();

  struct Task {
    double value;
    int shape;
    int instance;
  };
  const std::string factor_name = ToString(options.factor);
  std::vector<Task> tasks;
  for (const double value : options.values) {
    for (int shape = 0; shape < static_cast<int>(models.size()); ++shape) {
      for (int instance = 0; instance < options.instances; ++instance) {
        if (done.count({factor_name, value, shape, instance})) continue;
        tasks.push_back({value, shape, instance});
      }
    }
  }

  std::vector<ExperimentRecord> records(tasks.size());
  std::vector<bool> finished(tasks.size(), false);
  std::size_t next_to_emit = 0;
  std::mutex emit_mutex;

  const long task_count = static_cast<long>(tasks.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long k = 0; k < task_count; ++k) {
    const Task& task = tasks[k];
    ExperimentRecord record = RunTrial(models[task.shape], task.shape,
                                       task.instance, task.value, options);
    std::lock_guard<std::mutex> lock(emit_mutex);
    records[k] = std::move(record);
    finished[k] = true;
    while (next_to_emit < tasks.size() && finished[next_to_emit]) {
      if (sink) sink(records[next_to_emit]);
      ++next_to_emit;
    }
  }
  return records;
}

std::vector<SummaryRow> Summarize(const std::vector<ExperimentRecord>& records) {
  std::map<std::pair<std::string, double>, std::vector<const ExperimentRecord*>>
      groups;
  for (const auto& r : records) groups[{r.factor_name, r.factor_value}].push_back(&r);

  std::vector<SummaryRow> rows;
  for (const auto& [key, members] : groups) {
    SummaryRow row;
    row.factor_name = key.first;
    row.factor_value = key.second;
    row.trials = static_cast<int>(members.size());
    std::vector<double> rot;
    std::vector<double> trans;
    std::vector<double> time;
    for (const ExperimentRecord* r : members) {
      if (!r->success) continue;
      rot.push_back(r->rot_error);
      trans.push_back(r->trans_error);
      time.push_back(r->wall_time_s);
    }
    row.successes = static_cast<int>(rot.size());
    row.success_rate = row.trials > 0
                           ? static_cast<double>(row.successes) / row.trials
                           : 0.0;
    row.rot_error_mean = Mean(rot);
    row.rot_error_std = StdDev(rot);
    row.trans_error_mean = Mean(trans);
    row.trans_error_std = StdDev(trans);
    row.wall_time_mean = Mean(time);
    rows.push_back(row);
  }
  return rows;
}

std::string FormatRecord(const ExperimentRecord& r) {
  std::ostringstream out;
  out << r.factor_name << ',' << FormatDouble(r.factor_value) << ','
      << r.shape_id << ',' << r.instance_id << ',' << FormatDouble(r.rot_error)
      << ',' << FormatDouble(r.trans_error) << ',' << (r.success ? 1 : 0)
      << ',' << FormatDouble(r.wall_time_s);
  return out.str();
}

ExperimentRecord ParseRecord(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (fields.size() != 8) {
    throw std::invalid_argument("record row needs 8 fields: '" + line + "'");
  }
  ExperimentRecord r;
  r.factor_name = fields[0];
  r.factor_value = ParseDouble(fields[1]);
  r.shape_id = ParseInt(fields[2]);
  r.instance_id = ParseInt(fields[3]);
  r.rot_error = ParseDouble(fields[4]);
  r.trans_error = ParseDouble(fields[5]);
  if (fields[6] != "0" && fields[6] != "1") {
    throw std::invalid_argument("record success flag must be 0 or 1");
  }
  r.success = fields[6] == "1";
  r.wall_time_s = ParseDouble(fields[7]);
  return r;
}

std::vector<ExperimentRecord> ReadRecords(const std::string& path) {
  std::vector<ExperimentRecord> records;
  std::ifstream in(path);
  if (!in) return records;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      if (line != kRecordHeader) {
        throw std::invalid_argument("unexpected record header in " + path);
      }
      header = false;
      continue;
    }
    if (line.empty()) continue;
    records.push_back(ParseRecord(line));
  }
  return records;
}

RecordWriter::RecordWriter(std::string path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_) && std::filesystem::file_size(path_) > 0) {
    for (const auto& r : ReadRecords(path_)) done_.insert(KeyOf(r));
    return;
  }
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create " + path_);
  out << kRecordHeader << '\n';
}

void RecordWriter::Append(const ExperimentRecord& record) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path_);
  out << FormatRecord(record) << '\n';
  out.flush();
  done_.insert(KeyOf(record));
}

std::string FormatSummaryCsv(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << "factor_name,factor_value,trials,successes,success_rate,"
         "rot_error_mean,rot_error_std,trans_error_mean,trans_error_std,"
         "wall_time_mean\n";
  for (const auto& r : rows) {
    out << r.factor_name << ',' << FormatDouble(r.factor_value) << ','
        << r.trials << ',' << r.successes << ',' << FormatDouble(r.success_rate)
        << ',' << FormatDouble(r.rot_error_mean) << ','
        << FormatDouble(r.rot_error_std) << ','
        << FormatDouble(r.trans_error_mean) << ','
        << FormatDouble(r.trans_error_std) << ','
        << FormatDouble(r.wall_time_mean) << '\n';
  }
  return out.str();
}

void WriteSummaryFiles(const std::vector<SummaryRow>& rows,
                       const std::string& prefix) {
  auto open = [](const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    return out;
  };
  {
    auto out = open(prefix + "_summary.csv");
    out << FormatSummaryCsv(rows);
  }
  auto curve = [&](const std::string& name, const std::string& columns,
                   auto&& emit) {
    auto out = open(prefix + "_" + name + ".dat");
    out << "# " << columns << '\n';
    for (const auto& r : rows) {
      out << FormatDouble(r.factor_value);
      emit(out, r);
      out << '\n';
    }
  };
  curve("rot_error", "factor_value mean std",
        [](std::ostream& o, const SummaryRow& r) {
          o << ' ' << FormatDouble(r.rot_error_mean) << ' '
            << FormatDouble(r.rot_error_std);
        });
  curve("trans_error", "factor_value mean std",
        [](std::ostream& o, const SummaryRow& r) {
          o << ' ' << FormatDouble(r.trans_error_mean) << ' '
            << FormatDouble(r.trans_error_std);
        });
  curve("success_rate", "factor_value success_rate",
        [](std::ostream& o, const SummaryRow& r) {
          o << ' ' << FormatDouble(r.success_rate);
        });
  curve("time", "factor_value mean_wall_time_s",
        [](std::ostream& o, const SummaryRow& r) {
          o << ' ' << FormatDouble(r.wall_time_mean);
        });
}

}  // namespace dugma
