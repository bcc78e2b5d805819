#include "cloud_io.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace dugma::cli {
namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Yields non-blank, non-comment lines with their 1-based line numbers.
class LineReader {
 public:
  explicit LineReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) throw InputError("cannot open " + path);
  }

  bool Next(std::string& line) {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_number_;
      line = Trim(raw);
      if (line.empty() || line[0] == '#') continue;
      return true;
    }
    return false;
  }

  [[noreturn]] void Fail(const std::string& message) const {
    throw InputError(path_ + ":" + std::to_string(line_number_) + ": " +
                     message);
  }

 private:
  std::string path_;
  std::ifstream in_;
  int line_number_ = 0;
};

std::vector<double> ParseNumbers(const std::string& line,
                                 const LineReader& reader) {
  std::vector<double> values;
  std::istringstream ss(line);
  std::string token;
  while (ss >> token) {
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end != token.c_str() + token.size()) {
      reader.Fail("not a number: '" + token + "'");
    }
    values.push_back(v);
  }
  return values;
}

// Reads "key value" and checks the key.
std::string ExpectKey(LineReader& reader, const std::string& key) {
  std::string line;
  if (!reader.Next(line)) reader.Fail("missing '" + key + "'");
  std::istringstream ss(line);
  std::string found;
  ss >> found;
  if (found != key) reader.Fail("expected '" + key + "', got '" + found + "'");
  std::string rest;
  std::getline(ss, rest);
  return Trim(rest);
}

long ParseCount(const std::string& text, const LineReader& reader) {
  char* end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || v < 0) {
    reader.Fail("expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::string FormatG17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <int Dim>
CloudFile BuildCloud(const std::vector<std::vector<double>>& rows,
                     bool has_covariance, const LineReader& reader) {
  typename PointCloud<Dim>::PointList points;
  typename PointCloud<Dim>::CovarianceList covariances;
  points.reserve(rows.size());
  covariances.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    Vec<Dim> p;
    for (int a = 0; a < Dim; ++a) p(a) = row[a];
    points.push_back(p);
    Mat<Dim> cov = Mat<Dim>::Identity();
    if (has_covariance) {
      int k = Dim;
      for (int r = 0; r < Dim; ++r) {
        for (int c = r; c < Dim; ++c) {
          cov(r, c) = row[k];
          cov(c, r) = row[k];
          ++k;
        }
      }
      const std::string problem = CheckCovariance<Dim>(cov);
      if (!problem.empty()) {
        reader.Fail("point " + std::to_string(i) + ": " + problem);
      }
    }
    covariances.push_back(cov);
  }
  CloudFile file{PointCloud<Dim>(std::move(points), std::move(covariances)),
                 has_covariance};
  return file;
}

CloudFile BuildAnyCloud(int dim, const std::vector<std::vector<double>>& rows,
                        bool has_covariance, const LineReader& reader) {
  try {
    if (dim == 2) return BuildCloud<2>(rows, has_covariance, reader);
    return BuildCloud<3>(rows, has_covariance, reader);
  } catch (const GeometryError& e) {
    throw InputError(e.what());
  }
}

}  // namespace

CloudFile ReadCloudFile(const std::string& path) {
  LineReader reader(path);
  const std::string version = ExpectKey(reader, "dugma_cloud");
  if (version != "1") reader.Fail("unsupported cloud version '" + version + "'");
  const long dim = ParseCount(ExpectKey(reader, "dim"), reader);
  if (dim != 2 && dim != 3) reader.Fail("dim must be 2 or 3");
  const long count = ParseCount(ExpectKey(reader, "count"), reader);
  const std::string flag = ExpectKey(reader, "covariance");
  if (flag != "0" && flag != "1") reader.Fail("covariance flag must be 0 or 1");
  const bool has_covariance = flag == "1";
  const std::size_t columns =
      dim + (has_covariance ? dim * (dim + 1) / 2 : 0);

  std::vector<std::vector<double>> rows;
  std::string line;
  while (reader.Next(line)) {
    std::vector<double> values = ParseNumbers(line, reader);
    if (values.size() != columns) {
      reader.Fail("expected " + std::to_string(columns) + " values, got " +
                  std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  if (static_cast<long>(rows.size()) != count) {
    throw InputError(path + ": header announces " + std::to_string(count) +
                     " points but " + std::to_string(rows.size()) +
                     " rows follow");
  }
  if (rows.empty()) throw InputError(path + ": cloud has no points");
  return BuildAnyCloud(static_cast<int>(dim), rows, has_covariance, reader);
}

template <int Dim>
void WriteCloudFile(const std::string& path, const PointCloud<Dim>& cloud,
                    bool with_covariance) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << "dugma_cloud 1\n"
      << "dim " << Dim << '\n'
      << "count " << cloud.size() << '\n'
      << "covariance " << (with_covariance ? 1 : 0) << '\n';
  std::string row;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    row.clear();
    const auto& p = cloud.point(i);
    for (int a = 0; a < Dim; ++a) {
      if (a > 0) row += ' ';
      row += FormatG17(p(a));
    }
    if (with_covariance) {
      const auto& c = cloud.covariance(i);
      for (int r = 0; r < Dim; ++r) {
        for (int k = r; k < Dim; ++k) {
          row += ' ';
          row += FormatG17(c(r, k));
        }
      }
    }
    out << row << '\n';
  }
  if (!out) throw InputError("failed writing " + path);
}

void WriteCloudFile(const std::string& path, const CloudFile& file) {
  std::visit(
      [&](const auto& cloud) {
        WriteCloudFile(path, cloud, file.has_covariance);
      },
      file.cloud);
}

template <int Dim>
RigidTransform<Dim> TransformFile::ToTransform() const {
  if (dim != Dim) {
    throw InputError("transform has dimension " + std::to_string(dim) +
                     ", expected " + std::to_string(Dim));
  }
  try {
    return RigidTransform<Dim>(Mat<Dim>(rotation), Vec<Dim>(translation));
  } catch (const GeometryError& e) {
    throw InputError(e.what());
  }
}

template <int Dim>
TransformFile TransformFile::FromTransform(const RigidTransform<Dim>& transform) {
  TransformFile file;
  file.dim = Dim;
  file.rotation = transform.rotation();
  file.translation = transform.translation();
  return file;
}

TransformFile ReadTransformFile(const std::string& path) {
  LineReader reader(path);
  const std::string version = ExpectKey(reader, "dugma_transform");
  if (version != "1") {
    reader.Fail("unsupported transform version '" + version + "'");
  }
  TransformFile file;
  const long dim = ParseCount(ExpectKey(reader, "dim"), reader);
  if (dim != 2 && dim != 3) reader.Fail("dim must be 2 or 3");
  file.dim = static_cast<int>(dim);

  bool have_rotation = false;
  bool have_translation = false;
  std::string line;
  while (reader.Next(line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    std::string rest;
    std::getline(ss, rest);
    rest = Trim(rest);
    if (key == "rotation") {
      const auto v = ParseNumbers(rest, reader);
      if (v.size() != static_cast<std::size_t>(dim * dim)) {
        reader.Fail("rotation needs " + std::to_string(dim * dim) + " values");
      }
      file.rotation.resize(dim, dim);
      for (long r = 0; r < dim; ++r) {
        for (long c = 0; c < dim; ++c) file.rotation(r, c) = v[r * dim + c];
      }
      have_rotation = true;
    } else if (key == "translation") {
      const auto v = ParseNumbers(rest, reader);
      if (v.size() != static_cast<std::size_t>(dim)) {
        reader.Fail("translation needs " + std::to_string(dim) + " values");
      }
      file.translation = Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
      have_translation = true;
    } else if (key == "converged") {
      if (rest != "0" && rest != "1") reader.Fail("converged must be 0 or 1");
      file.converged = rest == "1";
    } else if (key == "iterations") {
      file.iterations = static_cast<int>(ParseCount(rest, reader));
    } else if (key == "trace") {
      std::istringstream fields(rest);
      IterationRecord rec;
      std::string status;
      if (!(fields >> rec.iteration >> rec.sigma >> rec.objective_start >>
            rec.objective_end >> rec.rotation_step >> rec.translation_step >>
            status >> rec.solver_iterations)) {
        reader.Fail("malformed trace row");
      }
      if (status == "converged_grad") {
        rec.solver_status = SolverStatus::kConvergedGrad;
      } else if (status == "converged_step") {
        rec.solver_status = SolverStatus::kConvergedStep;
      } else if (status == "max_iters") {
        rec.solver_status = SolverStatus::kMaxIters;
      } else {
        reader.Fail("unknown solver status '" + status + "'");
      }
      file.trace.push_back(rec);
    } else {
      reader.Fail("unknown key '" + key + "'");
    }
  }
  if (!have_rotation || !have_translation) {
    throw InputError(path + ": transform needs rotation and translation");
  }
  if (!file.rotation.allFinite() || !file.translation.allFinite()) {
    throw InputError(path + ": transform has non-finite entries");
  }
  // Validates orthogonality and determinant.
  if (dim == 2) {
    file.ToTransform<2>();
  } else {
    file.ToTransform<3>();
  }
  return file;
}

void WriteTransformFile(const std::string& path, const TransformFile& file) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out << "dugma_transform 1\n" << "dim " << file.dim << '\n' << "rotation";
  for (int r = 0; r < file.dim; ++r) {
    for (int c = 0; c < file.dim; ++c) out << ' ' << FormatG17(file.rotation(r, c));
  }
  out << "\ntranslation";
  for (int a = 0; a < file.dim; ++a) out << ' ' << FormatG17(file.translation(a));
  out << '\n';
  if (file.converged) out << "converged " << (*file.converged ? 1 : 0) << '\n';
  if (file.iterations) out << "iterations " << *file.iterations << '\n';
  for (const auto& rec : file.trace) {
    out << "trace " << rec.iteration << ' ' << FormatG17(rec.sigma) << ' '
        << FormatG17(rec.objective_start) << ' '
        << FormatG17(rec.objective_end) << ' '
        << FormatG17(rec.rotation_step) << ' '
        << FormatG17(rec.translation_step) << ' '
        << ToString(rec.solver_status) << ' ' << rec.solver_iterations << '\n';
  }
  if (!out) throw InputError("failed writing " + path);
}

std::vector<std::vector<double>> ReadNumericRows(const std::string& path) {
  LineReader reader(path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (reader.Next(line)) {
    std::vector<double> values = ParseNumbers(line, reader);
    if (!rows.empty() && values.size() != rows.front().size()) {
      reader.Fail("inconsistent column count");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw InputError(path + ": no points");
  return rows;
}

CloudFile ImportXyz(const std::string& path) {
  const auto rows = ReadNumericRows(path);
  const std::size_t columns = rows.front().size();
  if (columns != 2 && columns != 3) {
    throw InputError(path + ": xyz rows need 2 or 3 coordinates");
  }
  LineReader reader(path);
  return BuildAnyCloud(static_cast<int>(columns), rows, false, reader);
}

CloudFile ImportPly(const std::string& path) {
  LineReader reader(path);
  std::string line;
  if (!reader.Next(line) || line != "ply") reader.Fail("not a PLY file");

  long vertex_count = -1;
  bool in_vertex = false;
  std::vector<std::string> properties;
  while (true) {
    if (!reader.Next(line)) reader.Fail("unterminated PLY header");
    std::istringstream ss(line);
    std::string word;
    ss >> word;
    if (word == "end_header") break;
    if (word == "format") {
      std::string format;
      ss >> format;
      if (format != "ascii") reader.Fail("only ASCII PLY is supported");
    } else if (word == "element") {
      std::string name;
      long count = 0;
      ss >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) vertex_count = count;
      if (!in_vertex && vertex_count < 0) {
        reader.Fail("vertex element must come first");
      }
    } else if (word == "property" && in_vertex) {
      std::string type;
      std::string name;
      ss >> type;
      if (type == "list") reader.Fail("list properties on vertices unsupported");
      ss >> name;
      properties.push_back(name);
    }
    // comment, obj_info and other elements' properties are ignored.
  }
  if (vertex_count < 0) reader.Fail("PLY has no vertex element");

  std::map<std::string, std::size_t> column;
  for (std::size_t k = 0; k < properties.size(); ++k) column[properties[k]] = k;
  if (!column.count("x") || !column.count("y")) {
    reader.Fail("PLY vertices need x and y properties");
  }
  const int dim = column.count("z") ? 3 : 2;
  const std::vector<std::string> axes = {"x", "y", "z"};

  std::vector<std::vector<double>> rows;
  for (long i = 0; i < vertex_count; ++i) {
    if (!reader.Next(line)) reader.Fail("fewer vertices than declared");
    const std::vector<double> values = ParseNumbers(line, reader);
    if (values.size() != properties.size()) {
      reader.Fail("vertex row has wrong number of properties");
    }
    std::vector<double> row;
    for (int a = 0; a < dim; ++a) row.push_back(values[column[axes[a]]]);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw InputError(path + ": no vertices");
  return BuildAnyCloud(dim, rows, false, reader);
}

CloudFile ImportAny(const std::string& path) {
  const std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".ply") return ImportPly(path);
  if (ext == ".xyz" || ext == ".txt" || ext == ".pts") return ImportXyz(path);
  if (ext == ".cloud") return ReadCloudFile(path);
  throw InputError("unsupported input extension '" + ext + "'");
}

template void WriteCloudFile<2>(const std::string&, const PointCloud<2>&, bool);
template void WriteCloudFile<3>(const std::string&, const PointCloud<3>&, bool);
template RigidTransform<2> TransformFile::ToTransform<2>() const;
template RigidTransform<3> TransformFile::ToTransform<3>() const;
template TransformFile TransformFile::FromTransform<2>(const RigidTransform<2>&);
template TransformFile TransformFile::FromTransform<3>(const RigidTransform<3>&);

}  // namespace dugma::cli
