#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "dugma/geometry.h"
#include "dugma/registration.h"

namespace dugma {

enum class Factor { kRotation, kOutliers, kNoise, kOcclusion };

std::string ToString(Factor factor);
// Accepts "rotation", "outliers", "noise", "occlusion".
Factor ParseFactor(const std::string& name);

struct Range {
  double lower = 0.0;
  double upper = 0.0;
};

// Inclusive sweep start, start + step, ..., end.
struct Sweep {
  double start = 0.0;
  double end = 0.0;
  double step = 1.0;

  std::vector<double> Values() const;
};

// Random ranges and controlled sweeps of the four perturbation factors.
// Noise is a fraction of the model radius; rotation is in degrees.
struct FactorRanges {
  Range rotation_random{-20.0, 20.0};
  Sweep rotation_controlled{-60.0, 60.0, 8.0};
  Range outliers_random{0.0, 500.0};
  Sweep outliers_controlled{0.0, 2000.0, 200.0};
  Range noise_random{0.0, 0.2};
  Sweep noise_controlled{0.0, 0.3, 0.03};
  Range occlusion_random{0.0, 0.15};
  Sweep occlusion_controlled{0.0, 0.3, 0.03};
  double sample_rate_fixed = 0.90;
  double sample_rate_moving = 0.85;
  // Each translation component is uniform in +-translation_frac * radius.
  double translation_frac = 0.1;

  void Validate() const;
  const Sweep& Controlled(Factor factor) const;
};

// Concrete values for one synthesized pair.
struct SynthesisFactors {
  double rotation_deg = 0.0;
  int outliers = 0;
  double noise_std_frac = 0.0;
  double occlusion_frac = 0.0;
  double sample_rate_fixed = 1.0;
  double sample_rate_moving = 1.0;
  double translation_frac = 0.0;
};

struct SyntheticPair {
  PointCloud<3> fixed;
  PointCloud<3> moving;
  // Applied to the moving copy (about the model centroid).
  RigidTransform<3> perturbation;
  // Inverse of the perturbation: the transform registration should recover.
  RigidTransform<3> ground_truth;
  // Injected per-axis noise standard deviations, one per output point
  // (outliers included); the covariances are model covariance + diag(std^2).
  std::vector<Eigen::Vector3d> fixed_noise_std;
  std::vector<Eigen::Vector3d> moving_noise_std;
  std::size_t fixed_inliers = 0;
  std::size_t moving_inliers = 0;
};

// Occlude, subsample, add anisotropic noise, add outliers, then perturb the
// moving copy. Deterministic in `seed`. Throws std::invalid_argument for a
// model under 50 points or an occlusion removing more than 90% of points.
SyntheticPair SynthesizePair(const PointCloud<3>& model,
                             const SynthesisFactors& factors,
                             std::uint64_t seed);

// The controlled factor takes `value`; the others are drawn from their
// random ranges.
SynthesisFactors DrawFactors(Factor controlled, double value,
                             const FactorRanges& ranges, std::uint64_t seed);

struct ExperimentRecord {
  std::string factor_name;
  double factor_value = 0.0;
  int shape_id = 0;
  int instance_id = 0;
  double rot_error = 0.0;
  double trans_error = 0.0;
  bool success = false;
  double wall_time_s = 0.0;
  // Failure message; not persisted.
  std::string note;
};

using TrialKey = std::tuple<std::string, double, int, int>;
TrialKey KeyOf(const ExperimentRecord& record);

struct ExperimentOptions {
  Factor factor = Factor::kRotation;
  std::vector<double> values;
  int instances = 3;
  std::uint64_t seed = 1;
  FactorRanges ranges;
  RegistrationConfig registration;
  // Replace every covariance by the identity (uncertainty-free ablation).
  bool identity_covariances = false;
  // When false wall_time_s is recorded as 0 so reruns are byte-identical.
  bool record_timing = true;
};

// The pair a trial registers: factors drawn and pair synthesized from the
// per-trial RNG stream.
SyntheticPair MakeTrialPair(const PointCloud<3>& model, int shape_id,
                            int instance_id, double value,
                            const ExperimentOptions& options);

// Synthesize, register and score one trial. The per-trial RNG stream is
// derived from (seed, factor, value, shape, instance) only.
ExperimentRecord RunTrial(const PointCloud<3>& model, int shape_id,
                          int instance_id, double value,
                          const ExperimentOptions& options);

// Controlled value x shape x instance sweep. Trials whose key is in `done`
// are skipped. Completed records are handed to `sink` in sweep order
// regardless of how trials are scheduled across threads. Trial failures are
// recorded as non-successes and never abort the sweep.
std::vector<ExperimentRecord> RunExperiment(
    const std::vector<PointCloud<3>>& models, const ExperimentOptions& options,
    const std::set<TrialKey>& done = {},
    const std::function<void(const ExperimentRecord&)>& sink = {});

struct SummaryRow {
  std::string factor_name;
  double factor_value = 0.0;
  int trials = 0;
  int successes = 0;
  double success_rate = 0.0;
  // Over successful trials only; NaN when there are none.
  double rot_error_mean = 0.0;
  double rot_error_std = 0.0;
  double trans_error_mean = 0.0;
  double trans_error_std = 0.0;
  double wall_time_mean = 0.0;
};

// One row per (factor, value), in ascending value order.
std::vector<SummaryRow> Summarize(const std::vector<ExperimentRecord>& records);

// Append-only CSV persistence of experiment records.
inline constexpr char kRecordHeader[] =
    "factor_name,factor_value,shape_id,instance_id,rot_error,trans_error,"
    "success,wall_time_s";

std::string FormatRecord(const ExperimentRecord& record);
// Throws std::invalid_argument on a malformed row.
ExperimentRecord ParseRecord(const std::string& line);
// Reads every record of a CSV written by RecordWriter; missing file -> empty.
std::vector<ExperimentRecord> ReadRecords(const std::string& path);

class RecordWriter {
 public:
  // Creates the file with the header if needed; otherwise loads the keys
  // already present so a rerun can skip them.
  explicit RecordWriter(std::string path);

  const std::set<TrialKey>& done() const { return done_; }
  void Append(const ExperimentRecord& record);

 private:
  std::string path_;
  std::set<TrialKey> done_;
};

std::string FormatSummaryCsv(const std::vector<SummaryRow>& rows);

// Writes <prefix>_summary.csv and whitespace-delimited curve files
// <prefix>_{rot_error,trans_error,success_rate,time}.dat.
void WriteSummaryFiles(const std::vector<SummaryRow>& rows,
                       const std::string& prefix);

}  // namespace dugma
