#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "dugma/geometry.h"
#include "dugma/registration.h"

namespace dugma::cli {

// Malformed or inconsistent user input; maps to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using AnyCloud = std::variant<PointCloud<2>, PointCloud<3>>;

// Plain-text cloud:
//
//   dugma_cloud 1
//   dim 3
//   count N
//   covariance 1
//   x y z [c00 c01 c02 c11 c12 c22]
//   ...
//
// Blank lines and lines starting with '#' are ignored anywhere.
struct CloudFile {
  AnyCloud cloud;
  // False when the file carries coordinates only; the cloud then holds
  // identity covariances as placeholders.
  bool has_covariance = false;

  int dim() const { return cloud.index() == 0 ? 2 : 3; }
};

CloudFile ReadCloudFile(const std::string& path);

template <int Dim>
void WriteCloudFile(const std::string& path, const PointCloud<Dim>& cloud,
                    bool with_covariance = true);
void WriteCloudFile(const std::string& path, const CloudFile& file);

// Rigid transform plus optional registration diagnostics:
//
//   dugma_transform 1
//   dim 3
//   rotation r00 r01 ... (row-major)
//   translation tx ty tz
//   converged 1
//   iterations K
//   trace iteration sigma objective_start objective_end rotation_step
//         translation_step solver_status solver_iterations   (one per line)
struct TransformFile {
  int dim = 3;
  Eigen::MatrixXd rotation;
  Eigen::VectorXd translation;
  std::optional<bool> converged;
  std::optional<int> iterations;
  std::vector<IterationRecord> trace;

  template <int Dim>
  RigidTransform<Dim> ToTransform() const;
  template <int Dim>
  static TransformFile FromTransform(const RigidTransform<Dim>& transform);
};

// Throws InputError if the file is malformed or the rotation is not a proper
// rotation.
TransformFile ReadTransformFile(const std::string& path);
void WriteTransformFile(const std::string& path, const TransformFile& file);

// Coordinates only. ".xyz": 2 or 3 numbers per line (extra columns such as
// normals or colours are ignored only in PLY). ".ply": ASCII PLY with x, y,
// (z) vertex properties.
CloudFile ImportXyz(const std::string& path);
// Whitespace-separated numeric rows with a constant column count.
std::vector<std::vector<double>> ReadNumericRows(const std::string& path);
CloudFile ImportPly(const std::string& path);
// Dispatches on the extension; ".cloud" files are read natively.
CloudFile ImportAny(const std::string& path);

}  // namespace dugma::cli
