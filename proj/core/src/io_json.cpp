// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include <json.hpp>

#include "rdg/errors.hpp"
#include "rdg/io.hpp"

namespace rdg {
namespace {

using nlohmann::json;

json parse_document(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded())
    throw SchemaError(std::string(what) + ": not valid JSON");
  return j;
}

const json& require(const json& j, const char* field, const char* ctx) {
  auto it = j.find(field);
  if (it == j.end())
    throw SchemaError(std::string(ctx) + ": missing field '" + field + "'");
  return *it;
}

double require_num(const json& j, const char* field, const char* ctx) {
  const json& v = require(j, field, ctx);
  if (!v.is_number())
    throw SchemaError(std::string(ctx) + ": field '" + field + "' must be a number");
  return v.get<double>();
}

int require_int(const json& j, const char* field, const char* ctx) {
  const json& v = require(j, field, ctx);
  if (!v.is_number_integer())
    throw SchemaError(std::string(ctx) + ": field '" + field + "' must be an integer");
  return v.get<int>();
}

double opt_num(const json& j, const char* field, double fallback) {
  auto it = j.find(field);
  return it == j.end() ? fallback : it->get<double>();
}

int opt_int(const json& j, const char* field, int fallback) {
  auto it = j.find(field);
  return it == j.end() ? fallback : it->get<int>();
}

bool opt_bool(const json& j, const char* field, bool fallback) {
  auto it = j.find(field);
  return it == j.end() ? fallback : it->get<bool>();
}

void check_schema_version(const json& j, const char* ctx) {
  if (require_int(j, "schema_version", ctx) != kSchemaVersion)
    throw SchemaError(std::string(ctx) + ": unsupported schema_version");
}

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from_json(const json& j, const char* field, const char* ctx) {
  const json& v = require(j, field, ctx);
  if (!v.is_array() || v.size() != 3)
    throw SchemaError(std::string(ctx) + ": field '" + field + "' must be a 3-array");
  return {v[0].get<double>(), v[1].get<double>(), v[2].get<double>()};
}

json camera_to_json(const Camera& c) {
  json j;
  j["fx"] = c.fx;
  j["fy"] = c.fy;
  j["cx"] = c.cx;
  j["cy"] = c.cy;
  j["width"] = c.width;
  j["height"] = c.height;
  j["near"] = c.near_z;
  j["far"] = c.far_z;
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) rot.push_back(c.rot_wc(r, col));
  j["rot_wc"] = rot;
  j["t_wc"] = vec3_to_json(c.t_wc);
  return j;
}

Camera camera_from_json(const json& j, const char* ctx) {
  Camera c;
  c.fx = require_num(j, "fx", ctx);
  c.fy = require_num(j, "fy", ctx);
  c.cx = require_num(j, "cx", ctx);
  c.cy = require_num(j, "cy", ctx);
  c.width = require_int(j, "width", ctx);
  c.height = require_int(j, "height", ctx);
  c.near_z = require_num(j, "near", ctx);
  c.far_z = require_num(j, "far", ctx);
  const json& rot = require(j, "rot_wc", ctx);
  if (!rot.is_array() || rot.size() != 9)
    throw SchemaError(std::string(ctx) + ": field 'rot_wc' must be a 9-array");
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) c.rot_wc(r, col) = rot[r * 3 + col].get<double>();
  c.t_wc = vec3_from_json(j, "t_wc", ctx);
  return c;
}

json energy_params_to_json(const EnergyParams& p) {
  json j;
  j["w_u"] = p.w_u;
  j["w_p"] = p.w_p;
  j["w_h"] = p.w_h;
  j["theta_alpha"] = p.theta_alpha;
  j["theta_mu"] = p.theta_mu;
  j["theta_beta"] = p.theta_beta;
  j["tau"] = p.tau;
  j["gamma"] = p.gamma;
  j["labels"] = p.labels;
  j["unary_window_radius"] = p.unary_window_radius;
  j["neighborhood_radius"] = p.neighborhood_radius;
  j["icm_sweeps"] = p.icm_sweeps;
  j["epsilon"] = p.epsilon;
  return j;
}

EnergyParams energy_params_from_json(const json& j, const char* ctx) {
  EnergyParams p;
  p.w_u = opt_num(j, "w_u", p.w_u);
  p.w_p = opt_num(j, "w_p", p.w_p);
  p.w_h = opt_num(j, "w_h", p.w_h);
  p.theta_alpha = require_num(j, "theta_alpha", ctx);
  p.theta_mu = require_num(j, "theta_mu", ctx);
  p.theta_beta = require_num(j, "theta_beta", ctx);
  p.tau = opt_num(j, "tau", p.tau);
  p.gamma = opt_num(j, "gamma", p.gamma);
  p.labels = opt_int(j, "labels", p.labels);
  p.unary_window_radius = opt_int(j, "unary_window_radius", p.unary_window_radius);
  p.neighborhood_radius = opt_int(j, "neighborhood_radius", p.neighborhood_radius);
  p.icm_sweeps = opt_int(j, "icm_sweeps", p.icm_sweeps);
  p.epsilon = opt_num(j, "epsilon", p.epsilon);
  return p;
}

}  // namespace

SynthJob parse_synth_job(const std::string& text) {
  const char* ctx = "scene spec";
  const json j = parse_document(text, ctx);
  check_schema_version(j, ctx);
  SynthJob job;
  job.scene.n_gaussians = require_int(j, "n_gaussians", ctx);
  const std::string layout = require(j, "layout", ctx).get<std::string>();
  if (layout == "clustered")
    job.scene.layout = SceneSpec::Layout::kClustered;
  else if (layout == "uniform")
    job.scene.layout = SceneSpec::Layout::kUniform;
  else
    throw SchemaError("scene spec: field 'layout' must be 'clustered' or 'uniform'");
  job.scene.n_train = require_int(j, "n_train", ctx);
  job.scene.n_eval = require_int(j, "n_eval", ctx);
  job.scene.resolution = require_int(j, "resolution", ctx);
  job.scene.seed = static_cast<unsigned>(require_int(j, "seed", ctx));
  if (j.contains("corruption")) {
    const json& c = j["corruption"];
    job.corruption.scale = opt_num(c, "scale", 1.0);
    job.corruption.shift = opt_num(c, "shift", 0.0);
    job.corruption.blur_sigma = opt_num(c, "blur_sigma", 0.0);
    job.corruption.noise_sigma = opt_num(c, "noise_sigma", 0.0);
    job.corruption.seed = static_cast<unsigned>(opt_int(c, "seed", 0));
  }
  return job;
}

std::string synth_job_to_json(const SynthJob& job) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["n_gaussians"] = job.scene.n_gaussians;
  j["layout"] = job.scene.layout == SceneSpec::Layout::kClustered ? "clustered" : "uniform";
  j["n_train"] = job.scene.n_train;
  j["n_eval"] = job.scene.n_eval;
  j["resolution"] = job.scene.resolution;
  j["seed"] = job.scene.seed;
  j["corruption"] = {{"scale", job.corruption.scale},
                     {"shift", job.corruption.shift},
                     {"blur_sigma", job.corruption.blur_sigma},
                     {"noise_sigma", job.corruption.noise_sigma},
                     {"seed", job.corruption.seed}};
  return j.dump(2);
}

std::string gaussian_set_to_json(const GaussianSet& set) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["generation_tag"] = set.generation_tag;
  json prims = json::array();
  for (const GaussianPrimitive& p : set.primitives) {
    json e;
    e["position"] = vec3_to_json(p.position);
    e["rotation"] = json::array({p.rotation[0], p.rotation[1], p.rotation[2], p.rotation[3]});
    e["log_scale"] = vec3_to_json(p.log_scale);
    e["opacity_logit"] = p.opacity_logit;
    e["color"] = vec3_to_json(p.color);
    prims.push_back(e);
  }
  j["primitives"] = prims;
  return j.dump();
}

GaussianSet parse_gaussian_set(const std::string& text) {
  const char* ctx = "gaussian set";
  const json j = parse_document(text, ctx);
  check_schema_version(j, ctx);
  GaussianSet set;
  set.generation_tag = require(j, "generation_tag", ctx).get<std::uint64_t>();
  for (const json& e : require(j, "primitives", ctx)) {
    GaussianPrimitive p;
    p.position = vec3_from_json(e, "position", ctx);
    const json& q = require(e, "rotation", ctx);
    if (!q.is_array() || q.size() != 4)
      throw SchemaError("gaussian set: field 'rotation' must be a 4-array");
    for (int k = 0; k < 4; ++k) p.rotation[k] = q[k].get<double>();
    p.log_scale = vec3_from_json(e, "log_scale", ctx);
    p.opacity_logit = require_num(e, "opacity_logit", ctx);
    p.color = vec3_from_json(e, "color", ctx);
    set.primitives.push_back(p);
  }
  return set;
}

std::string cameras_to_json(const std::vector<Camera>& train,
                            const std::vector<Camera>& eval,
                            const Eigen::Vector3d& box_min,
                            const Eigen::Vector3d& box_max, double scene_extent) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["box_min"] = vec3_to_json(box_min);
  j["box_max"] = vec3_to_json(box_max);
  j["scene_extent"] = scene_extent;
  json tr = json::array(), ev = json::array();
  for (const Camera& c : train) tr.push_back(camera_to_json(c));
  for (const Camera& c : eval) ev.push_back(camera_to_json(c));
  j["train"] = tr;
  j["eval"] = ev;
  return j.dump(2);
}

CameraFile parse_cameras(const std::string& text) {
  const char* ctx = "cameras";
  const json j = parse_document(text, ctx);
  check_schema_version(j, ctx);
  CameraFile f;
  f.box_min = vec3_from_json(j, "box_min", ctx);
  f.box_max = vec3_from_json(j, "box_max", ctx);
  f.scene_extent = require_num(j, "scene_extent", ctx);
  for (const json& c : require(j, "train", ctx)) f.train.push_back(camera_from_json(c, ctx));
  for (const json& c : require(j, "eval", ctx)) f.eval.push_back(camera_from_json(c, ctx));
  return f;
}

TrainJob parse_train_job(const std::string& text) {
  const char* ctx = "train config";
  const json j = parse_document(text, ctx);
  check_schema_version(j, ctx);
  TrainJob job;
  TrainConfig& c = job.config;
  c.total_steps = require_int(j, "steps", ctx);
  c.depth_warmup = opt_int(j, "depth_warmup", c.depth_warmup);
  c.seed = static_cast<unsigned>(opt_int(j, "seed", 1));
  job.init_count = opt_int(j, "init_count", job.init_count);
  c.enable_depth_loss = opt_bool(j, "enable_depth_loss", true);
  c.enable_rdg = opt_bool(j, "enable_rdg", true);
  c.eval_every = opt_int(j, "eval_every", c.eval_every);

  if (j.contains("lr")) {
    const json& lr = j["lr"];
    c.lr.position = opt_num(lr, "position", c.lr.position);
    c.lr.opacity = opt_num(lr, "opacity", c.lr.opacity);
    c.lr.scale = opt_num(lr, "scale", c.lr.scale);
    c.lr.rotation = opt_num(lr, "rotation", c.lr.rotation);
    c.lr.color = opt_num(lr, "color", c.lr.color);
  }
  if (j.contains("loss")) {
    const json& l = j["loss"];
    c.loss.beta = opt_num(l, "beta", c.loss.beta);
    c.loss.lambda = opt_num(l, "lambda", c.loss.lambda);
    c.loss.omega0 = opt_num(l, "omega0", c.loss.omega0);
    c.loss.epsilon = opt_num(l, "epsilon", c.loss.epsilon);
  }
  c.loss.m = opt_int(j, "schedule_m", c.total_steps);
  if (j.contains("guidance")) {
    const json& g = j["guidance"];
    c.guidance.b0 = opt_num(g, "b0", c.guidance.b0);
    c.guidance.patch_px = opt_int(g, "patch_px", c.guidance.patch_px);
    c.guidance.detach_depth = opt_bool(g, "detach_depth", true);
    c.guidance.schedule_per_step = opt_bool(g, "schedule_per_step", true);
  }
  c.guidance.m = c.loss.m;
  if (j.contains("densify")) {
    const json& d = j["densify"];
    c.densify.interval = opt_int(d, "interval", c.densify.interval);
    c.densify.k_samples = opt_int(d, "k_samples", c.densify.k_samples);
    c.densify.grad_threshold = opt_num(d, "grad_threshold", c.densify.grad_threshold);
    c.densify.prune_opacity = opt_num(d, "prune_opacity", c.densify.prune_opacity);
    c.densify.opacity_reset_value = opt_num(d, "opacity_reset_value", c.densify.opacity_reset_value);
    c.densify.split_scale_fraction = opt_num(d, "split_scale_fraction", c.densify.split_scale_fraction);
    c.densify.adaptive_sampling = opt_bool(d, "adaptive_sampling", true);
    c.densify.adaptive_after = opt_int(d, "adaptive_after", c.densify.adaptive_after);
    c.densify.use_patch_depth_range = opt_bool(d, "use_patch_depth_range", false);
    if (d.contains("opacity_reset_steps")) {
      c.densify.opacity_reset_steps.clear();
      for (const json& s : d["opacity_reset_steps"])
        c.densify.opacity_reset_steps.push_back(s.get<int>());
    }
  }
  c.densify.patch_px = c.guidance.patch_px;
  if (j.contains("energy")) {
    const json& e = j["energy"];
    if (e.contains("coarse")) c.energy_coarse = energy_params_from_json(e["coarse"], ctx);
    if (e.contains("fine")) c.energy_fine = energy_params_from_json(e["fine"], ctx);
  }
  return job;
}

std::string train_job_to_json(const TrainJob& job) {
  const TrainConfig& c = job.config;
  json j;
  j["schema_version"] = kSchemaVersion;
  j["steps"] = c.total_steps;
  j["depth_warmup"] = c.depth_warmup;
  j["seed"] = c.seed;
  j["init_count"] = job.init_count;
  j["enable_depth_loss"] = c.enable_depth_loss;
  j["enable_rdg"] = c.enable_rdg;
  j["eval_every"] = c.eval_every;
  j["schedule_m"] = c.loss.m;
  j["lr"] = {{"position", c.lr.position},
             {"opacity", c.lr.opacity},
             {"scale", c.lr.scale},
             {"rotation", c.lr.rotation},
             {"color", c.lr.color}};
  j["loss"] = {{"beta", c.loss.beta},
               {"lambda", c.loss.lambda},
               {"omega0", c.loss.omega0},
               {"epsilon", c.loss.epsilon}};
  j["guidance"] = {{"b0", c.guidance.b0},
                   {"patch_px", c.guidance.patch_px},
                   {"detach_depth", c.guidance.detach_depth},
                   {"schedule_per_step", c.guidance.schedule_per_step}};
  json reset_steps = json::array();
  for (int s : c.densify.opacity_reset_steps) reset_steps.push_back(s);
  j["densify"] = {{"interval", c.densify.interval},
                  {"k_samples", c.densify.k_samples},
                  {"grad_threshold", c.densify.grad_threshold},
                  {"prune_opacity", c.densify.prune_opacity},
                  {"opacity_reset_value", c.densify.opacity_reset_value},
                  {"opacity_reset_steps", reset_steps},
                  {"split_scale_fraction", c.densify.split_scale_fraction},
                  {"adaptive_sampling", c.densify.adaptive_sampling},
                  {"adaptive_after", c.densify.adaptive_after},
                  {"use_patch_depth_range", c.densify.use_patch_depth_range}};
  j["energy"] = {{"coarse", energy_params_to_json(c.energy_coarse)},
                 {"fine", energy_params_to_json(c.energy_fine)}};
  return j.dump(2);
}

RefineJob parse_refine_job(const std::string& text) {
  const char* ctx = "refine params";
  const json j = parse_document(text, ctx);
  check_schema_version(j, ctx);
  RefineJob job;
  job.coarse = energy_params_from_json(require(j, "coarse", ctx), ctx);
  job.fine = energy_params_from_json(require(j, "fine", ctx), ctx);
  return job;
}

std::string refine_job_to_json(const RefineJob& job) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["coarse"] = energy_params_to_json(job.coarse);
  j["fine"] = energy_params_to_json(job.fine);
  return j.dump(2);
}

std::string apply_json_overrides(const std::string& text,
                                 const std::vector<std::string>& overrides) {
  json j = parse_document(text, "config");
  for (const std::string& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw SchemaError("override '" + ov + "' is not of the form key=value");
    const std::string path = ov.substr(0, eq);
    const std::string value = ov.substr(eq + 1);
    json* node = &j;
    size_t start = 0;
    while (true) {
      const size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot - start);
      if (key.empty()) throw SchemaError("override '" + ov + "' has an empty key");
      if (dot == std::string::npos) {
        json parsed = json::parse(value, nullptr, false);
        (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
        break;
      }
      node = &(*node)[key];
      start = dot + 1;
    }
  }
  return j.dump(2);
}

void write_manifest(const std::string& path, const RunManifest& m) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["app_version"] = kAppVersion;
  j["command"] = m.command;
  j["config"] = parse_document(m.config_json.empty() ? "{}" : m.config_json, "manifest config");
  json inputs = json::array(), outputs = json::array();
  for (const auto& [role, p] : m.inputs) inputs.push_back({{"role", role}, {"path", p}});
  for (const auto& [role, p] : m.outputs) outputs.push_back({{"role", role}, {"path", p}});
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["seed"] = m.seed;
  j["started_at"] = m.started_at;
  j["wall_seconds"] = m.wall_seconds;
  write_text_file(path, j.dump(2));
}

RunManifest read_manifest(const std::string& path) {
  const char* ctx = "manifest";
  const json j = parse_document(read_text_file(path), ctx);
  check_schema_version(j, ctx);
  RunManifest m;
  m.command = require(j, "command", ctx).get<std::string>();
  m.config_json = require(j, "config", ctx).dump();
  for (const json& e : require(j, "inputs", ctx))
    m.inputs.emplace_back(e["role"].get<std::string>(), e["path"].get<std::string>());
  for (const json& e : require(j, "outputs", ctx))
    m.outputs.emplace_back(e["role"].get<std::string>(), e["path"].get<std::string>());
  m.seed = static_cast<unsigned>(require_int(j, "seed", ctx));
  m.started_at = require(j, "started_at", ctx).get<std::string>();
  m.wall_seconds = require_num(j, "wall_seconds", ctx);
  return m;
}

}  // namespace rdg
