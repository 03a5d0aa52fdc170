#include "kfminset/io.hpp"

#include <array>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kfminset/evaluation.hpp"  // format_double

namespace kfminset {

namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const fs::path& path, std::size_t line,
                       const std::string& what) {
  throw ParseError(path.string(), line, what);
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_char(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& tok, const fs::path& path,
                    std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') {
    fail(path, line, "not a number: '" + tok + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& tok, const fs::path& path,
                       std::size_t line) {
  char* end = nullptr;
  const long long v = std::strtoll(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0') {
    fail(path, line, "not an integer: '" + tok + "'");
  }
  return static_cast<std::int64_t>(v);
}

// Reads all lines; drops a single trailing empty line (files end with \n).
std::vector<std::string> load_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, 0, "cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// Quaternion from TUM-ordered components, kept bit-exact when its norm is
// within tolerance of 1 (renormalizing would break byte-exact round trips).
Eigen::Quaterniond parse_quaternion(double qx, double qy, double qz, double qw,
                                    const fs::path& path, std::size_t line) {
  const Eigen::Quaterniond q(qw, qx, qy, qz);
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    fail(path, line, "quaternion norm deviates from 1 beyond tolerance");
  }
  return q;
}

void append_pose_fields(std::string& out, const Pose& p) {
  out += format_double(p.translation.x());
  out += ' ';
  out += format_double(p.translation.y());
  out += ' ';
  out += format_double(p.translation.z());
  out += ' ';
  out += format_double(p.rotation.x());
  out += ' ';
  out += format_double(p.rotation.y());
  out += ' ';
  out += format_double(p.rotation.z());
  out += ' ';
  out += format_double(p.rotation.w());
}

// ─── KITTI rotation canonicalization ───────────────────────────────────
// Printing a rotation matrix and converting it back through a quaternion is
// not an involution: matrix -> quaternion -> matrix can land on a slightly
// different matrix. Iterating that map always falls into a short cycle;
// writing the cycle's smallest member (byte order) makes every subsequent
// parse -> re-print reproduce the same bytes.

std::array<unsigned char, 72> matrix_bytes(const Mat3& m) {
  std::array<unsigned char, 72> bytes;
  double flat[9];
  int k = 0;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) flat[k++] = m(r, c);
  }
  std::memcpy(bytes.data(), flat, sizeof(flat));
  return bytes;
}

// Out-of-line on purpose: every matrix <-> quaternion conversion anywhere in
// this file must execute the exact same machine code. Inlined copies of the
// same Eigen expression can be compiled with different instruction
// selections at different call sites, producing results that differ in the
// last ulp — enough to derail the canonicalization walk below into a
// neighboring cycle and break byte-stable round trips.
__attribute__((noinline)) Eigen::Quaterniond rotation_from_matrix(
    const Mat3& m) {
  return Eigen::Quaterniond(m).normalized();
}

__attribute__((noinline)) Mat3 rotation_to_matrix(
    const Eigen::Quaterniond& q) {
  return q.toRotationMatrix();
}

Mat3 conversion_step(const Mat3& m) {
  return rotation_to_matrix(rotation_from_matrix(m));
}

bool same_bytes(const Mat3& a, const Mat3& b) {
  return matrix_bytes(a) == matrix_bytes(b);
}

Mat3 canonical_rotation(const Eigen::Quaterniond& q_in) {
  // Iterating matrix -> quaternion -> matrix always settles into a short
  // cycle (usually a fixed point), though the transient leading there can
  // run for thousands of steps while coefficients creep by one ulp at a
  // time. Print the cycle's byte-order minimum: a parsed-back canonical
  // matrix re-enters this walk as the exact successor of the printed member
  // (the reader uses the same rotation_from_matrix), lands in the same
  // cycle, and re-prints the same bytes. The input quaternion is not
  // renormalized: a fresh normalize of an already-unit quaternion can move
  // bits, and a genuinely non-unit first member can never recur, so it
  // never pollutes the cycle. Brent's cycle detection keeps the cost at
  // O(transient + cycle) conversions and O(1) memory.
  const Mat3 start = rotation_to_matrix(q_in);
  constexpr std::size_t kStepBudget = 4'000'000;
  std::size_t spent = 0;

  // Phase 1 (Brent): cycle length.
  std::size_t power = 1;
  std::size_t cycle_len = 1;
  Mat3 tortoise = start;
  Mat3 hare = conversion_step(start);
  ++spent;
  while (!same_bytes(tortoise, hare)) {
    if (power == cycle_len) {
      tortoise = hare;
      power *= 2;
      cycle_len = 0;
    }
    hare = conversion_step(hare);
    ++cycle_len;
    if (++spent > kStepBudget) return hare;  // give up canonicality
  }

  // Phase 2: first cycle member (advance two cursors cycle_len apart).
  tortoise = start;
  hare = start;
  for (std::size_t i = 0; i < cycle_len; ++i) {
    hare = conversion_step(hare);
    if (++spent > kStepBudget) return hare;
  }
  while (!same_bytes(tortoise, hare)) {
    tortoise = conversion_step(tortoise);
    hare = conversion_step(hare);
    if ((spent += 2) > kStepBudget) return hare;
  }

  // Phase 3: byte-order minimum over the cycle.
  Mat3 best = tortoise;
  auto best_key = matrix_bytes(best);
  Mat3 cur = tortoise;
  for (std::size_t i = 1; i < cycle_len; ++i) {
    cur = conversion_step(cur);
    const auto key = matrix_bytes(cur);
    if (key < best_key) {
      best = cur;
      best_key = key;
    }
  }
  return best;
}

}  // namespace

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, 0, "cannot open file");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(content.data(),
            static_cast<std::streamsize>(content.size()));
  if (!out) throw Error("write failed: " + path.string());
}

// ─── KITTI ─────────────────────────────────────────────────────────────

std::vector<Pose> kitti_load(const fs::path& path) {
  const auto lines = load_lines(path);
  std::vector<Pose> poses;
  poses.reserve(lines.size());
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t lineno = li + 1;
    const auto tok = split_ws(lines[li]);
    if (tok.empty() && li + 1 == lines.size()) break;  // trailing blank
    if (tok.size() != 12) {
      fail(path, lineno, "expected 12 fields, got " +
                             std::to_string(tok.size()));
    }
    double f[12];
    for (int k = 0; k < 12; ++k) f[k] = parse_double(tok[k], path, lineno);
    Mat3 r;
    r << f[0], f[1], f[2], f[4], f[5], f[6], f[8], f[9], f[10];
    if ((r.transpose() * r - Mat3::Identity()).norm() > 1e-6 ||
        r.determinant() < 0.0) {
      fail(path, lineno, "rotation block is not a rotation matrix");
    }
    Pose p;
    p.rotation = rotation_from_matrix(r);
    p.translation = Vec3(f[3], f[7], f[11]);
    poses.push_back(p);
  }
  return poses;
}

void kitti_save(const fs::path& path, const std::vector<Pose>& poses) {
  std::string out;
  for (const Pose& p : poses) {
    const Mat3 r = canonical_rotation(p.rotation);
    const double f[12] = {r(0, 0), r(0, 1), r(0, 2), p.translation.x(),
                          r(1, 0), r(1, 1), r(1, 2), p.translation.y(),
                          r(2, 0), r(2, 1), r(2, 2), p.translation.z()};
    for (int k = 0; k < 12; ++k) {
      if (k > 0) out += ' ';
      out += format_double(f[k]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

// ─── TUM ───────────────────────────────────────────────────────────────

std::vector<TumEntry> tum_load(const fs::path& path) {
  const auto lines = load_lines(path);
  std::vector<TumEntry> entries;
  entries.reserve(lines.size());
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t lineno = li + 1;
    const auto tok = split_ws(lines[li]);
    if (tok.empty() && li + 1 == lines.size()) break;
    if (tok.size() != 8) {
      fail(path, lineno,
           "expected 8 fields (timestamp tx ty tz qx qy qz qw), got " +
               std::to_string(tok.size()));
    }
    double f[8];
    for (int k = 0; k < 8; ++k) f[k] = parse_double(tok[k], path, lineno);
    TumEntry e;
    e.timestamp = f[0];
    e.pose.translation = Vec3(f[1], f[2], f[3]);
    e.pose.rotation = parse_quaternion(f[4], f[5], f[6], f[7], path, lineno);
    entries.push_back(e);
  }
  return entries;
}

void tum_save(const fs::path& path, const std::vector<TumEntry>& entries) {
  std::string out;
  for (const TumEntry& e : entries) {
    out += format_double(e.timestamp);
    out += ' ';
    append_pose_fields(out, e.pose);
    out += '\n';
  }
  write_text_file(path, out);
}

// ─── KFD1 ──────────────────────────────────────────────────────────────

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::vector<Descriptor> kfd1_load(const fs::path& path) {
  const std::string raw = read_text_file(path);
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  if (raw.size() < 12) {
    throw BadMagic("file too short for a descriptor header: " + path.string());
  }
  if (std::memcmp(raw.data(), "KFD1", 4) != 0) {
    throw BadMagic("bad descriptor file magic in " + path.string());
  }
  const std::uint32_t count = get_u32(bytes + 4);
  const std::uint32_t dim = get_u32(bytes + 8);
  const std::size_t expected =
      12 + 4ull * static_cast<std::size_t>(count) * dim;
  if (raw.size() != expected) {
    throw CountMismatch("descriptor payload of " + path.string() + " holds " +
                        std::to_string(raw.size() - 12) + " bytes, header " +
                        "promises " + std::to_string(expected - 12));
  }
  std::vector<Descriptor> out;
  out.reserve(count);
  std::size_t offset = 12;
  for (std::uint32_t i = 0; i < count; ++i) {
    Eigen::VectorXd v(static_cast<int>(dim));
    for (std::uint32_t k = 0; k < dim; ++k) {
      const std::uint32_t u = get_u32(bytes + offset);
      float f;
      std::memcpy(&f, &u, 4);
      v(static_cast<int>(k)) = static_cast<double>(f);
      offset += 4;
    }
    out.emplace_back(std::move(v));
  }
  return out;
}

void kfd1_save(const fs::path& path,
               const std::vector<Descriptor>& descriptors) {
  const std::uint32_t dim =
      descriptors.empty()
          ? 0u
          : static_cast<std::uint32_t>(descriptors[0].dimension());
  for (const Descriptor& d : descriptors) {
    if (static_cast<std::uint32_t>(d.dimension()) != dim) {
      throw DimensionMismatch("descriptors of mixed dimension in one file");
    }
  }
  std::string out;
  out.reserve(12 + 4 * descriptors.size() * dim);
  out += "KFD1";
  put_u32(out, static_cast<std::uint32_t>(descriptors.size()));
  put_u32(out, dim);
  for (const Descriptor& d : descriptors) {
    for (std::uint32_t k = 0; k < dim; ++k) {
      const auto f = static_cast<float>(d.values(static_cast<int>(k)));
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(out, u);
    }
  }
  write_text_file(path, out);
}

// ─── channels CSV ──────────────────────────────────────────────────────

namespace {
constexpr const char* kChannelsHeader = "id,spaciousness,entropy_proxy";
constexpr const char* kCandidatesHeader =
    "query_id,match_id,similarity,gt_distance,class,verified,residual";
}  // namespace

std::vector<ChannelRow> channels_load(const fs::path& path) {
  const auto lines = load_lines(path);
  if (lines.empty() || lines[0] != kChannelsHeader) {
    fail(path, 1, std::string("expected header '") + kChannelsHeader + "'");
  }
  std::vector<ChannelRow> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t lineno = li + 1;
    if (lines[li].empty() && li + 1 == lines.size()) break;
    const auto tok = split_char(lines[li], ',');
    if (tok.size() != 3) fail(path, lineno, "expected 3 comma-separated fields");
    ChannelRow r;
    r.id = parse_int(tok[0], path, lineno);
    r.spaciousness = parse_double(tok[1], path, lineno);
    r.entropy_proxy = parse_double(tok[2], path, lineno);
    rows.push_back(r);
  }
  return rows;
}

void channels_save(const fs::path& path, const std::vector<ChannelRow>& rows) {
  std::string out = kChannelsHeader;
  out += '\n';
  for (const ChannelRow& r : rows) {
    out += std::to_string(r.id);
    out += ',';
    out += format_double(r.spaciousness);
    out += ',';
    out += format_double(r.entropy_proxy);
    out += '\n';
  }
  write_text_file(path, out);
}

// ─── candidate CSV ─────────────────────────────────────────────────────

std::vector<CandidateRecord> candidates_load(const fs::path& path) {
  const auto lines = load_lines(path);
  if (lines.empty() || lines[0] != kCandidatesHeader) {
    fail(path, 1, std::string("expected header '") + kCandidatesHeader + "'");
  }
  std::vector<CandidateRecord> records;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t lineno = li + 1;
    if (lines[li].empty() && li + 1 == lines.size()) break;
    const auto tok = split_char(lines[li], ',');
    if (tok.size() != 7) fail(path, lineno, "expected 7 comma-separated fields");
    CandidateRecord r;
    r.candidate.query_id = parse_int(tok[0], path, lineno);
    r.candidate.match_id = parse_int(tok[1], path, lineno);
    r.candidate.similarity = parse_double(tok[2], path, lineno);
    r.candidate.gt_distance = parse_double(tok[3], path, lineno);
    if (tok[4] == "true_positive") {
      r.candidate.classification = CandidateClass::kTruePositive;
    } else if (tok[4] == "false_positive") {
      r.candidate.classification = CandidateClass::kFalsePositive;
    } else {
      fail(path, lineno, "unknown candidate class '" + tok[4] + "'");
    }
    if (tok[5] == "1") {
      r.verified = true;
    } else if (tok[5] == "0") {
      r.verified = false;
    } else {
      fail(path, lineno, "verified flag must be 0 or 1");
    }
    r.residual = parse_double(tok[6], path, lineno);
    records.push_back(r);
  }
  return records;
}

void candidates_save(const fs::path& path,
                     const std::vector<CandidateRecord>& records) {
  std::string out = kCandidatesHeader;
  out += '\n';
  for (const CandidateRecord& r : records) {
    out += std::to_string(r.candidate.query_id);
    out += ',';
    out += std::to_string(r.candidate.match_id);
    out += ',';
    out += format_double(r.candidate.similarity);
    out += ',';
    out += format_double(r.candidate.gt_distance);
    out += ',';
    out += r.candidate.classification == CandidateClass::kTruePositive
               ? "true_positive"
               : "false_positive";
    out += ',';
    out += r.verified ? '1' : '0';
    out += ',';
    out += format_double(r.residual);
    out += '\n';
  }
  write_text_file(path, out);
}

// ─── kept ids ──────────────────────────────────────────────────────────

std::vector<std::int64_t> kept_ids_load(const fs::path& path) {
  const auto lines = load_lines(path);
  if (lines.empty() || lines[0] != "id") fail(path, 1, "expected header 'id'");
  std::vector<std::int64_t> ids;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty() && li + 1 == lines.size()) break;
    ids.push_back(parse_int(lines[li], path, li + 1));
  }
  return ids;
}

void kept_ids_save(const fs::path& path,
                   const std::vector<std::int64_t>& ids) {
  std::string out = "id\n";
  for (std::int64_t id : ids) {
    out += std::to_string(id);
    out += '\n';
  }
  write_text_file(path, out);
}

// ─── pose graph dump ───────────────────────────────────────────────────

namespace {

void append_edge(std::string& out, const char* kind, const GraphEdge& e) {
  out += "EDGE ";
  out += kind;
  out += ' ';
  out += std::to_string(e.i);
  out += ' ';
  out += std::to_string(e.j);
  out += ' ';
  append_pose_fields(out, e.measurement);
  for (int r = 0; r < 6; ++r) {
    for (int c = r; c < 6; ++c) {
      out += ' ';
      out += format_double(e.information(r, c));
    }
  }
  out += '\n';
}

}  // namespace

void graph_save(const fs::path& path, const PoseGraph& graph) {
  std::string out;
  for (const auto& [id, pose] : graph.nodes()) {
    out += "VERTEX ";
    out += std::to_string(id);
    out += ' ';
    append_pose_fields(out, pose);
    out += '\n';
  }
  for (const GraphEdge& e : graph.odometry_edges()) {
    append_edge(out, "ODOM", e);
  }
  for (const GraphEdge& e : graph.loop_edges()) append_edge(out, "LOOP", e);
  write_text_file(path, out);
}

PoseGraph graph_load(const fs::path& path) {
  const auto lines = load_lines(path);
  PoseGraph graph;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const std::size_t lineno = li + 1;
    const auto tok = split_ws(lines[li]);
    if (tok.empty() && li + 1 == lines.size()) break;
    if (tok.empty()) fail(path, lineno, "empty line");
    if (tok[0] == "VERTEX") {
      if (tok.size() != 9) fail(path, lineno, "VERTEX needs 9 fields");
      const std::int64_t id = parse_int(tok[1], path, lineno);
      double f[7];
      for (int k = 0; k < 7; ++k) f[k] = parse_double(tok[k + 2], path, lineno);
      Pose p;
      p.translation = Vec3(f[0], f[1], f[2]);
      p.rotation = parse_quaternion(f[3], f[4], f[5], f[6], path, lineno);
      graph.add_node(id, p);
    } else if (tok[0] == "EDGE") {
      if (tok.size() != 32) {
        fail(path, lineno, "EDGE needs 32 fields, got " +
                               std::to_string(tok.size()));
      }
      GraphEdge e;
      e.i = parse_int(tok[2], path, lineno);
      e.j = parse_int(tok[3], path, lineno);
      double f[7];
      for (int k = 0; k < 7; ++k) f[k] = parse_double(tok[k + 4], path, lineno);
      e.measurement.translation = Vec3(f[0], f[1], f[2]);
      e.measurement.rotation =
          parse_quaternion(f[3], f[4], f[5], f[6], path, lineno);
      int field = 11;
      for (int r = 0; r < 6; ++r) {
        for (int c = r; c < 6; ++c) {
          const double w = parse_double(tok[field++], path, lineno);
          e.information(r, c) = w;
          e.information(c, r) = w;
        }
      }
      if (tok[1] == "ODOM") {
        graph.add_odometry_edge(e);
      } else if (tok[1] == "LOOP") {
        graph.add_loop_edge(e);
      } else {
        fail(path, lineno, "unknown edge kind '" + tok[1] + "'");
      }
    } else {
      fail(path, lineno, "unknown record '" + tok[0] + "'");
    }
  }
  return graph;
}

}  // namespace kfminset
