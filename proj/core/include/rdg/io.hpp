// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "rdg/depth_refiner.hpp"
#include "rdg/image.hpp"
#include "rdg/scene.hpp"
#include "rdg/synth.hpp"
#include "rdg/trainer.hpp"

namespace rdg {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kAppVersion = "0.1.0";

// ---- rasters ----

/// Grayscale PFM ("Pf"), scale -1.0 (little-endian), rows bottom-up,
/// float32 payload. Round-trips bit-exactly.
void write_pfm(const std::string& path, const DepthMap& d);
DepthMap read_pfm(const std::string& path);

/// 8-bit RGB PNG; values clamped to [0,1] and rounded to 255 levels.
void write_png8(const std::string& path, const ImageBuffer& img);
ImageBuffer read_png8(const std::string& path);

// ---- text files ----

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// ---- JSON documents (all versioned with schema_version) ----

struct SynthJob {
  SceneSpec scene;
  CorruptionModel corruption;
};
SynthJob parse_synth_job(const std::string& json_text);
std::string synth_job_to_json(const SynthJob& job);

std::string gaussian_set_to_json(const GaussianSet& set);
GaussianSet parse_gaussian_set(const std::string& json_text);

std::string cameras_to_json(const std::vector<Camera>& train,
                            const std::vector<Camera>& eval,
                            const Eigen::Vector3d& box_min,
                            const Eigen::Vector3d& box_max, double scene_extent);
struct CameraFile {
  std::vector<Camera> train, eval;
  Eigen::Vector3d box_min, box_max;
  double scene_extent = 1.0;
};
CameraFile parse_cameras(const std::string& json_text);

struct TrainJob {
  TrainConfig config;
  int init_count = 300;
};
TrainJob parse_train_job(const std::string& json_text);
std::string train_job_to_json(const TrainJob& job);

struct RefineJob {
  EnergyParams coarse = EnergyParams::coarse_pass();
  EnergyParams fine = EnergyParams::fine_pass();
};
RefineJob parse_refine_job(const std::string& json_text);
std::string refine_job_to_json(const RefineJob& job);

/// Applies dotted-path overrides of the form "a.b.c=value" to a JSON
/// document; values parse as JSON when possible, else as strings.
std::string apply_json_overrides(const std::string& json_text,
                                 const std::vector<std::string>& overrides);

// ---- run manifests ----

struct RunManifest {
  std::string command;
  std::string config_json;  // full resolved config snapshot
  std::vector<std::pair<std::string, std::string>> inputs;   // (role, path)
  std::vector<std::pair<std::string, std::string>> outputs;  // (role, path)
  unsigned seed = 0;
  std::string started_at;  // ISO-8601 UTC
  double wall_seconds = 0.0;
};

void write_manifest(const std::string& path, const RunManifest& m);
RunManifest read_manifest(const std::string& path);

}  // namespace rdg
