#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "desc/so3.hpp"
#include "desc/viewgraph.hpp"

namespace desc {

// Text formats, one record per line, '#' starts a comment line:
//   EDGE i j r11 r12 r13 r21 r22 r23 r31 r32 r33
//   NODE i r11 r12 r13 r21 r22 r23 r31 r32 r33
// Matrices are row-major. Node ids are 0-based consecutive integers.

/// Parses EDGE records. The node count is max(id) + 1, or `min_nodes` if larger.
ViewGraph read_pose_graph(std::istream& in, int min_nodes = 0);
ViewGraph read_pose_graph(const std::filesystem::path& path, int min_nodes = 0);

/// Parses NODE records; every id in [0, max id] must appear exactly once.
std::vector<Rotation> read_rotations(std::istream& in);
std::vector<Rotation> read_rotations(const std::filesystem::path& path);

void write_pose_graph(std::ostream& out, const ViewGraph& g);
void write_rotations(std::ostream& out, const std::vector<Rotation>& rotations);

/// %.17g formatting used by every file the library writes.
std::string format_double(double x);

/// Writes `contents` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

}  // namespace desc
