#include "desc/pose_graph_io.hpp"

#include <algorithm>
#include <fmt/core.h>
#include <fstream>
#include <optional>
#include <sstream>

#include "desc/error.hpp"

namespace desc {

namespace {

struct Record {
  std::string tag;
  std::vector<long long> ids;
  Mat3 m;
};

// Returns false for blank and comment lines.
bool parse_record(const std::string& line, int line_no, const std::string& expected_tag, int num_ids,
                  Record& rec) {
  std::istringstream ss(line);
  if (!(ss >> rec.tag) || rec.tag.front() == '#') return false;
  if (rec.tag != expected_tag) {
    throw InputError(fmt::format("line {}: expected {} record, found '{}'", line_no, expected_tag, rec.tag));
  }
  rec.ids.assign(static_cast<std::size_t>(num_ids), 0);
  for (auto& id : rec.ids) {
    if (!(ss >> id)) throw InputError(fmt::format("line {}: missing node id", line_no));
    if (id < 0) throw InputError(fmt::format("line {}: negative node id", line_no));
  }
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (!(ss >> rec.m(r, c))) throw InputError(fmt::format("line {}: expected 9 matrix entries", line_no));
  std::string extra;
  if (ss >> extra) throw InputError(fmt::format("line {}: trailing token '{}'", line_no, extra));
  return true;
}

Rotation checked_rotation(const Mat3& m, int line_no) {
  // 17-digit text round trips exactly; allow slack for hand-written files.
  if (!Rotation::is_rotation(m, 1e-6)) {
    throw InputError(fmt::format("line {}: matrix is not a rotation", line_no));
  }
  return Rotation::is_rotation(m) ? Rotation(m) : project_to_so3(m);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

}  // namespace

ViewGraph read_pose_graph(std::istream& in, int min_nodes) {
  struct Pending {
    int a, b;
    Rotation r;
  };
  std::vector<Pending> pending;
  int n = min_nodes;
  std::string line;
  int line_no = 0;
  Record rec;
  while (std::getline(in, line)) {
    ++line_no;
    if (!parse_record(line, line_no, "EDGE", 2, rec)) continue;
    const int a = static_cast<int>(rec.ids[0]);
    const int b = static_cast<int>(rec.ids[1]);
    pending.push_back({a, b, checked_rotation(rec.m, line_no)});
    n = std::max({n, a + 1, b + 1});
  }
  ViewGraph g(n);
  for (const auto& p : pending) g.add_edge(p.a, p.b, p.r);
  return g;
}

ViewGraph read_pose_graph(const std::filesystem::path& path, int min_nodes) {
  auto in = open_input(path);
  return read_pose_graph(in, min_nodes);
}

std::vector<Rotation> read_rotations(std::istream& in) {
  std::vector<std::optional<Rotation>> slots;
  std::string line;
  int line_no = 0;
  Record rec;
  while (std::getline(in, line)) {
    ++line_no;
    if (!parse_record(line, line_no, "NODE", 1, rec)) continue;
    const auto id = static_cast<std::size_t>(rec.ids[0]);
    if (id >= slots.size()) slots.resize(id + 1);
    if (slots[id]) throw InputError(fmt::format("line {}: duplicate NODE {}", line_no, id));
    slots[id] = checked_rotation(rec.m, line_no);
  }
  std::vector<Rotation> out;
  out.reserve(slots.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) throw InputError(fmt::format("NODE {} missing (ids must be consecutive)", i));
    out.push_back(*slots[i]);
  }
  return out;
}

std::vector<Rotation> read_rotations(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_rotations(in);
}

std::string format_double(double x) { return fmt::format("{:.17g}", x); }

namespace {

void write_matrix(std::ostream& out, const Mat3& m) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out << ' ' << format_double(m(r, c));
  out << '\n';
}

}  // namespace

void write_pose_graph(std::ostream& out, const ViewGraph& g) {
  for (const Edge& e : g.edges()) {
    out << "EDGE " << e.i << ' ' << e.j;
    write_matrix(out, e.rij.matrix());
  }
}

void write_rotations(std::ostream& out, const std::vector<Rotation>& rotations) {
  for (std::size_t i = 0; i < rotations.size(); ++i) {
    out << "NODE " << i;
    write_matrix(out, rotations[i].matrix());
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(fmt::format("cannot write '{}'", tmp.string()));
    out << contents;
    if (!out) throw InputError(fmt::format("write to '{}' failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace desc
