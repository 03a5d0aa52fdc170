#pragma once

// File formats: KITTI and TUM pose files, the KFD1 binary descriptor format,
// channel / candidate / kept-id CSVs, and the pose-graph text dump. Writers
// are byte-deterministic; files written here survive write -> read -> write
// byte-identically.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kfminset/descriptors.hpp"
#include "kfminset/errors.hpp"
#include "kfminset/geometry.hpp"
#include "kfminset/loopclosure.hpp"
#include "kfminset/posegraph.hpp"

namespace kfminset {

// ─── generic text helpers ──────────────────────────────────────────────

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

// ─── KITTI pose format ─────────────────────────────────────────────────
// One line per pose: 12 space-separated floats, the row-major 3x4 [R|t].
// The writer snaps each rotation matrix to a stable representative of its
// quaternion-conversion orbit so that parsing and re-writing reproduces the
// file exactly.

std::vector<Pose> kitti_load(const std::filesystem::path& path);
void kitti_save(const std::filesystem::path& path,
                const std::vector<Pose>& poses);

// ─── TUM trajectory format ─────────────────────────────────────────────
// One line per pose: `timestamp tx ty tz qx qy qz qw`. The loader accepts
// quaternions whose norm is within 1e-6 of 1 and keeps them bit-exact
// (no renormalization), so round trips are byte-identical.

struct TumEntry {
  double timestamp = 0.0;
  Pose pose;
};

std::vector<TumEntry> tum_load(const std::filesystem::path& path);
void tum_save(const std::filesystem::path& path,
              const std::vector<TumEntry>& entries);

// ─── KFD1 binary descriptor format ─────────────────────────────────────
// Little-endian layout: magic "KFD1", uint32 count, uint32 dimension, then
// count * dimension float32 values, one descriptor after another.

std::vector<Descriptor> kfd1_load(const std::filesystem::path& path);
void kfd1_save(const std::filesystem::path& path,
               const std::vector<Descriptor>& descriptors);

// ─── scalar channel CSV ────────────────────────────────────────────────
// Header `id,spaciousness,entropy_proxy`, one row per keyframe.

struct ChannelRow {
  std::int64_t id = 0;
  double spaciousness = 0.0;
  double entropy_proxy = 0.0;
};

std::vector<ChannelRow> channels_load(const std::filesystem::path& path);
void channels_save(const std::filesystem::path& path,
                   const std::vector<ChannelRow>& rows);

// ─── loop candidate CSV ────────────────────────────────────────────────
// Header `query_id,match_id,similarity,gt_distance,class,verified,residual`
// with class in {true_positive, false_positive} and verified in {0, 1}.

std::vector<CandidateRecord> candidates_load(
    const std::filesystem::path& path);
void candidates_save(const std::filesystem::path& path,
                     const std::vector<CandidateRecord>& records);

// ─── kept keyframe ids ─────────────────────────────────────────────────
// Header `id`, one kept keyframe id per line, in stream order.

std::vector<std::int64_t> kept_ids_load(const std::filesystem::path& path);
void kept_ids_save(const std::filesystem::path& path,
                   const std::vector<std::int64_t>& ids);

// ─── pose graph text dump ──────────────────────────────────────────────
// `VERTEX id tx ty tz qx qy qz qw` per node (ascending id), then
// `EDGE kind i j tx ty tz qx qy qz qw <21 upper-triangular omega floats>`
// with kind in {ODOM, LOOP}, odometry edges first, insertion order.
// Loading restores nodes and edges; gauge fixing is the caller's decision.

PoseGraph graph_load(const std::filesystem::path& path);
void graph_save(const std::filesystem::path& path, const PoseGraph& graph);

}  // namespace kfminset
