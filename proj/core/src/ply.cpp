#include "equigrasp/ply.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "equigrasp/error.hpp"

namespace equigrasp {

void write_ply(const std::string& path, const PointCloud& cloud,
               const std::vector<double>* quality) {
  if (quality && static_cast<int>(quality->size()) != cloud.size())
    fail_config("write_ply: quality not count-aligned with positions");

  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) fail_io(fmt::format("write_ply: cannot open '{}' for writing", path));

  std::string header = "ply\nformat ascii 1.0\n";
  header += fmt::format("element vertex {}\n", cloud.size());
  header += "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals())
    header += "property double nx\nproperty double ny\nproperty double nz\n";
  if (cloud.has_labels()) header += "property int label\n";
  if (quality)
    header +=
        "property float quality\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n";
  header += "end_header\n";
  std::fputs(header.c_str(), f);

  for (int i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.positions[i];
    std::fprintf(f, "%.17g %.17g %.17g", p.x(), p.y(), p.z());
    if (cloud.has_normals()) {
      const Eigen::Vector3d& n = cloud.normals[i];
      std::fprintf(f, " %.17g %.17g %.17g", n.x(), n.y(), n.z());
    }
    if (cloud.has_labels()) std::fprintf(f, " %d", cloud.labels[i]);
    if (quality) {
      const double q = std::clamp((*quality)[i], 0.0, 1.0);
      const int green = static_cast<int>(std::lround(255.0 * q));
      std::fprintf(f, " %.9g %d %d %d", (*quality)[i], 255 - green, green, 0);
    }
    std::fputc('\n', f);
  }
  if (std::fclose(f) != 0) fail_io(fmt::format("write_ply: error closing '{}'", path));
}

PointCloud read_ply(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail_io(fmt::format("read_ply: cannot open '{}'", path));

  std::string line;
  if (!std::getline(in, line) || line != "ply")
    fail_io(fmt::format("read_ply: '{}' is not a PLY file", path));

  int vertex_count = -1;
  std::vector<std::string> props;
  bool ascii = false, in_vertex_element = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string kind;
      ls >> kind;
      ascii = (kind == "ascii");
    } else if (tok == "element") {
      std::string name;
      int count;
      ls >> name >> count;
      in_vertex_element = (name == "vertex");
      if (in_vertex_element) vertex_count = count;
    } else if (tok == "property" && in_vertex_element) {
      std::string type, name;
      ls >> type >> name;
      if (type == "list") fail_io("read_ply: list properties are not supported");
      props.push_back(name);
    } else if (tok == "end_header") {
      break;
    } else if (tok == "comment" || tok == "obj_info" || tok.empty()) {
      continue;
    }
  }
  if (!ascii) fail_io(fmt::format("read_ply: '{}' is not ascii-format", path));
  if (vertex_count < 0) fail_io(fmt::format("read_ply: '{}' has no vertex element", path));

  auto col = [&](const std::string& name) -> int {
    const auto it = std::find(props.begin(), props.end(), name);
    return it == props.end() ? -1 : static_cast<int>(it - props.begin());
  };
  const int cx = col("x"), cy = col("y"), cz = col("z");
  if (cx < 0 || cy < 0 || cz < 0) fail_io(fmt::format("read_ply: '{}' lacks x/y/z", path));
  const int cnx = col("nx"), cny = col("ny"), cnz = col("nz");
  const bool has_normals = cnx >= 0 && cny >= 0 && cnz >= 0;
  const int clab = col("label");

  PointCloud cloud;
  cloud.positions.reserve(vertex_count);
  std::vector<double> row(props.size());
  for (int i = 0; i < vertex_count; ++i) {
    if (!std::getline(in, line))
      fail_io(fmt::format("read_ply: '{}' ended after {} of {} vertices", path, i, vertex_count));
    std::istringstream ls(line);
    for (size_t j = 0; j < props.size(); ++j)
      if (!(ls >> row[j]))
        fail_io(fmt::format("read_ply: '{}' vertex {} has a malformed row", path, i));
    cloud.positions.emplace_back(row[cx], row[cy], row[cz]);
    if (has_normals) cloud.normals.emplace_back(row[cnx], row[cny], row[cnz]);
    if (clab >= 0) cloud.labels.push_back(static_cast<int>(std::llround(row[clab])));
  }
  return cloud;
}

}  // namespace equigrasp
