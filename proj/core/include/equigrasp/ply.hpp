#pragma once

#include <optional>
#include <string>
#include <vector>

#include "equigrasp/cloud.hpp"

namespace equigrasp {

// ASCII PLY with x y z, optional nx ny nz, optional integer label. Coordinates
// are written with %.17g so a write/read round trip reproduces doubles exactly.
// An optional per-point scalar is emitted as a float "quality" property plus a
// uchar red/green/blue ramp for viewers.
void write_ply(const std::string& path, const PointCloud& cloud,
               const std::vector<double>* quality = nullptr);

// Parses the header and picks out known properties; unknown vertex properties
// are skipped. Throws an io Error on malformed files.
PointCloud read_ply(const std::string& path);

}  // namespace equigrasp
