#include "kfminset/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <future>
#include <initializer_list>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include <json.hpp>

#include "kfminset/io.hpp"
#include "kfminset/rng.hpp"

namespace kfminset {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(const Clock::time_point& t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ─── JSON helpers (strict: unknown keys and wrong types are errors) ──────

void check_keys(const json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

const json& member(const json& j, const char* key) { return j.at(key); }

double jdouble(const json& j, const char* key, double def) {
  if (!j.contains(key)) return def;
  const json& v = member(j, key);
  if (!v.is_number()) {
    throw ConfigError(std::string("'") + key + "' must be a number");
  }
  return v.get<double>();
}

std::int64_t jint(const json& j, const char* key, std::int64_t def) {
  if (!j.contains(key)) return def;
  const json& v = member(j, key);
  if (!v.is_number_integer()) {
    throw ConfigError(std::string("'") + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

std::uint64_t juint(const json& j, const char* key, std::uint64_t def) {
  if (!j.contains(key)) return def;
  const json& v = member(j, key);
  if (!v.is_number_integer() ||
      (v.is_number_integer() && !v.is_number_unsigned() &&
       v.get<std::int64_t>() < 0)) {
    throw ConfigError(std::string("'") + key +
                      "' must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

bool jbool(const json& j, const char* key, bool def) {
  if (!j.contains(key)) return def;
  const json& v = member(j, key);
  if (!v.is_boolean()) {
    throw ConfigError(std::string("'") + key + "' must be a boolean");
  }
  return v.get<bool>();
}

std::string jstring(const json& j, const char* key, const std::string& def) {
  if (!j.contains(key)) return def;
  const json& v = member(j, key);
  if (!v.is_string()) {
    throw ConfigError(std::string("'") + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::string jstring_required(const json& j, const char* key,
                             const char* where) {
  if (!j.contains(key) || !member(j, key).is_string()) {
    throw ConfigError(std::string(where) + " requires string key '" + key +
                      "'");
  }
  return member(j, key).get<std::string>();
}

// ─── config <-> JSON ─────────────────────────────────────────────────────

json trajectory_to_json(const Trajectory& t) {
  json j;
  if (const auto* c = std::get_if<CircleTrajectory>(&t)) {
    j["kind"] = "circle";
    j["radius"] = c->radius;
    j["laps"] = c->laps;
  } else if (const auto* f = std::get_if<FigureEightTrajectory>(&t)) {
    j["kind"] = "figure8";
    j["scale"] = f->scale;
  } else {
    const auto& g = std::get<GridWalkTrajectory>(t);
    j["kind"] = "grid";
    j["blocks"] = g.blocks;
    j["revisit_prob"] = g.revisit_prob;
  }
  return j;
}

Trajectory trajectory_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("'trajectory' must be an object");
  const std::string kind = jstring_required(j, "kind", "trajectory");
  if (kind == "circle") {
    check_keys(j, "trajectory", {"kind", "radius", "laps"});
    CircleTrajectory c;
    c.radius = jdouble(j, "radius", c.radius);
    c.laps = static_cast<int>(jint(j, "laps", c.laps));
    return c;
  }
  if (kind == "figure8") {
    check_keys(j, "trajectory", {"kind", "scale"});
    FigureEightTrajectory f;
    f.scale = jdouble(j, "scale", f.scale);
    return f;
  }
  if (kind == "grid") {
    check_keys(j, "trajectory", {"kind", "blocks", "revisit_prob"});
    GridWalkTrajectory g;
    g.blocks = static_cast<int>(jint(j, "blocks", g.blocks));
    g.revisit_prob = jdouble(j, "revisit_prob", g.revisit_prob);
    return g;
  }
  throw ConfigError("unknown trajectory kind '" + kind + "'");
}

json world_to_json(const WorldConfig& w) {
  json j;
  j["seed"] = w.seed;
  j["trajectory"] = trajectory_to_json(w.trajectory);
  j["keyframe_spacing"] = w.keyframe_spacing;
  j["odom_sigma_t"] = w.odom_sigma_t;
  j["odom_sigma_r"] = w.odom_sigma_r;
  j["field"] = {{"seed", w.field.seed},
                {"dimension", w.field.dimension},
                {"num_frequencies", w.field.num_frequencies},
                {"length_scale", w.field.length_scale},
                {"noise_sigma", w.field.noise_sigma}};
  j["spaciousness_field_scale"] = w.spaciousness_field_scale;
  return j;
}

WorldConfig world_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("'world' must be an object");
  check_keys(j, "world",
             {"seed", "trajectory", "keyframe_spacing", "odom_sigma_t",
              "odom_sigma_r", "field", "spaciousness_field_scale"});
  WorldConfig w;
  w.seed = juint(j, "seed", w.seed);
  if (j.contains("trajectory")) {
    w.trajectory = trajectory_from_json(j.at("trajectory"));
  }
  w.keyframe_spacing = jdouble(j, "keyframe_spacing", w.keyframe_spacing);
  w.odom_sigma_t = jdouble(j, "odom_sigma_t", w.odom_sigma_t);
  w.odom_sigma_r = jdouble(j, "odom_sigma_r", w.odom_sigma_r);
  if (j.contains("field")) {
    const json& f = j.at("field");
    if (!f.is_object()) throw ConfigError("'field' must be an object");
    check_keys(f, "field",
               {"seed", "dimension", "num_frequencies", "length_scale",
                "noise_sigma"});
    w.field.seed = juint(f, "seed", w.field.seed);
    w.field.dimension =
        static_cast<int>(jint(f, "dimension", w.field.dimension));
    w.field.num_frequencies =
        static_cast<int>(jint(f, "num_frequencies", w.field.num_frequencies));
    w.field.length_scale = jdouble(f, "length_scale", w.field.length_scale);
    w.field.noise_sigma = jdouble(f, "noise_sigma", w.field.noise_sigma);
  }
  w.spaciousness_field_scale =
      jdouble(j, "spaciousness_field_scale", w.spaciousness_field_scale);
  return w;
}

json dataset_to_json(const DatasetSource& d) {
  json j;
  if (d.synthetic) {
    j["source"] = "synthetic";
    j["world"] = world_to_json(*d.synthetic);
  } else {
    const FileSource& f = *d.files;
    j["source"] = "files";
    j["format"] = trajectory_format_name(f.format);
    j["poses"] = f.poses.string();
    j["descriptors"] = f.descriptors.string();
    if (f.odometry) j["odometry"] = f.odometry->string();
    if (f.channels) j["channels"] = f.channels->string();
  }
  return j;
}

DatasetSource dataset_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("'dataset' must be an object");
  const std::string source = jstring_required(j, "source", "dataset");
  DatasetSource d;
  if (source == "synthetic") {
    check_keys(j, "dataset", {"source", "world"});
    d.synthetic =
        j.contains("world") ? world_from_json(j.at("world")) : WorldConfig{};
    return d;
  }
  if (source == "files") {
    check_keys(j, "dataset",
               {"source", "format", "poses", "descriptors", "odometry",
                "channels"});
    FileSource f;
    f.format = parse_trajectory_format(
        jstring(j, "format", trajectory_format_name(f.format)));
    f.poses = jstring_required(j, "poses", "files dataset");
    f.descriptors = jstring_required(j, "descriptors", "files dataset");
    if (j.contains("odometry")) {
      f.odometry = fs::path(jstring_required(j, "odometry", "files dataset"));
    }
    if (j.contains("channels")) {
      f.channels = fs::path(jstring_required(j, "channels", "files dataset"));
    }
    d.files = std::move(f);
    return d;
  }
  throw ConfigError("dataset source must be 'synthetic' or 'files'");
}

const char* scoring_mode_name(ScoringMode m) {
  return m == ScoringMode::kPaperLiteral ? "paper-literal" : "info-max";
}

ScoringMode scoring_mode_from(const std::string& s) {
  if (s == "paper-literal") return ScoringMode::kPaperLiteral;
  if (s == "info-max") return ScoringMode::kInfoMax;
  throw ConfigError("scoring_mode must be 'paper-literal' or 'info-max'");
}

}  // namespace

const char* trajectory_format_name(TrajectoryFormat fmt) {
  return fmt == TrajectoryFormat::kKitti ? "kitti" : "tum";
}

TrajectoryFormat parse_trajectory_format(const std::string& text) {
  if (text == "kitti") return TrajectoryFormat::kKitti;
  if (text == "tum") return TrajectoryFormat::kTum;
  throw ConfigError("trajectory format must be 'kitti' or 'tum'");
}

void RunConfig::validate() const {
  if (version != 1) throw ConfigError("unsupported config version");
  if (methods.empty()) {
    throw ConfigError("at least one sampler method is required");
  }
  std::set<std::string> names;
  for (const SamplerMethod& m : methods) {
    if (!names.insert(m.name()).second) {
      throw ConfigError("duplicate method '" + m.name() + "'");
    }
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  const bool has_synth = dataset.synthetic.has_value();
  const bool has_files = dataset.files.has_value();
  if (has_synth == has_files) {
    throw ConfigError("dataset must have exactly one source");
  }
  if (has_synth) dataset.synthetic->validate();
  if (has_files) {
    if (dataset.files->poses.empty() || dataset.files->descriptors.empty()) {
      throw ConfigError("files dataset requires poses and descriptors paths");
    }
  }
  sampler.validate();
  loop.validate();
  lm.validate();
  if (reopt_every < 1) throw ConfigError("reopt_every must be >= 1");
  if (rpe_delta < 1) throw ConfigError("rpe_delta must be >= 1");
  if (odom_sigma_t < 0.0 || odom_sigma_r < 0.0) {
    throw ConfigError("odometry sigmas must be nonnegative");
  }
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  check_keys(j, "config",
             {"version", "seed", "output_dir", "dataset", "methods",
              "sampler", "loop", "lm", "reopt_every", "rpe_delta",
              "odom_sigma_t", "odom_sigma_r", "deterministic_timing"});
  if (!j.contains("version")) {
    throw ConfigError("config must carry a 'version' field");
  }

  RunConfig cfg;
  cfg.version = static_cast<int>(jint(j, "version", 0));
  cfg.seed = juint(j, "seed", cfg.seed);
  cfg.output_dir = jstring(j, "output_dir", cfg.output_dir.string());

  if (j.contains("dataset")) {
    cfg.dataset = dataset_from_json(j.at("dataset"));
  } else {
    cfg.dataset.synthetic = WorldConfig{};
  }

  if (j.contains("methods")) {
    const json& m = j.at("methods");
    if (!m.is_array()) {
      throw ConfigError("'methods' must be an array of method names");
    }
    cfg.methods.clear();
    for (const json& item : m) {
      if (!item.is_string()) {
        throw ConfigError("'methods' entries must be strings");
      }
      cfg.methods.push_back(SamplerMethod::parse(item.get<std::string>()));
    }
  } else {
    cfg.methods = {SamplerMethod{SamplerMethod::Kind::kAll, 1.0},
                   SamplerMethod{SamplerMethod::Kind::kMsa, 1.0}};
  }

  if (j.contains("sampler")) {
    const json& s = j.at("sampler");
    if (!s.is_object()) throw ConfigError("'sampler' must be an object");
    check_keys(s, "sampler",
               {"window_size", "alpha", "beta", "delta_lower", "delta_upper",
                "scoring_mode"});
    cfg.sampler.window_size =
        static_cast<int>(jint(s, "window_size", cfg.sampler.window_size));
    cfg.sampler.alpha = jdouble(s, "alpha", cfg.sampler.alpha);
    cfg.sampler.beta = jdouble(s, "beta", cfg.sampler.beta);
    cfg.sampler.delta_lower =
        jdouble(s, "delta_lower", cfg.sampler.delta_lower);
    cfg.sampler.delta_upper =
        jdouble(s, "delta_upper", cfg.sampler.delta_upper);
    cfg.sampler.scoring_mode = scoring_mode_from(
        jstring(s, "scoring_mode", scoring_mode_name(cfg.sampler.scoring_mode)));
  }

  if (j.contains("loop")) {
    const json& l = j.at("loop");
    if (!l.is_object()) throw ConfigError("'loop' must be an object");
    check_keys(l, "loop",
               {"tau", "k", "exclusion_gap", "gt_radius", "verify_threshold",
                "sim_sigma_t", "sim_sigma_r", "sim_sigma_res"});
    cfg.loop.tau = jdouble(l, "tau", cfg.loop.tau);
    cfg.loop.k = static_cast<int>(jint(l, "k", cfg.loop.k));
    cfg.loop.exclusion_gap = jint(l, "exclusion_gap", cfg.loop.exclusion_gap);
    cfg.loop.gt_radius = jdouble(l, "gt_radius", cfg.loop.gt_radius);
    cfg.loop.verify_threshold =
        jdouble(l, "verify_threshold", cfg.loop.verify_threshold);
    cfg.loop.sim_sigma_t = jdouble(l, "sim_sigma_t", cfg.loop.sim_sigma_t);
    cfg.loop.sim_sigma_r = jdouble(l, "sim_sigma_r", cfg.loop.sim_sigma_r);
    cfg.loop.sim_sigma_res =
        jdouble(l, "sim_sigma_res", cfg.loop.sim_sigma_res);
  }

  if (j.contains("lm")) {
    const json& l = j.at("lm");
    if (!l.is_object()) throw ConfigError("'lm' must be an object");
    check_keys(l, "lm",
               {"max_iterations", "initial_lambda", "lambda_up",
                "lambda_down", "convergence_tol", "gradient_tol"});
    cfg.lm.max_iterations =
        static_cast<int>(jint(l, "max_iterations", cfg.lm.max_iterations));
    cfg.lm.initial_lambda =
        jdouble(l, "initial_lambda", cfg.lm.initial_lambda);
    cfg.lm.lambda_up = jdouble(l, "lambda_up", cfg.lm.lambda_up);
    cfg.lm.lambda_down = jdouble(l, "lambda_down", cfg.lm.lambda_down);
    cfg.lm.convergence_tol =
        jdouble(l, "convergence_tol", cfg.lm.convergence_tol);
    cfg.lm.gradient_tol = jdouble(l, "gradient_tol", cfg.lm.gradient_tol);
  }

  cfg.reopt_every = static_cast<int>(jint(j, "reopt_every", cfg.reopt_every));
  cfg.rpe_delta = static_cast<int>(jint(j, "rpe_delta", cfg.rpe_delta));
  // Default the odometry edge weights to the synthetic world's noise so the
  // graph weighting matches how the data was actually corrupted.
  if (cfg.dataset.synthetic) {
    cfg.odom_sigma_t = cfg.dataset.synthetic->odom_sigma_t;
    cfg.odom_sigma_r = cfg.dataset.synthetic->odom_sigma_r;
  }
  cfg.odom_sigma_t = jdouble(j, "odom_sigma_t", cfg.odom_sigma_t);
  cfg.odom_sigma_r = jdouble(j, "odom_sigma_r", cfg.odom_sigma_r);
  cfg.deterministic_timing =
      jbool(j, "deterministic_timing", cfg.deterministic_timing);

  cfg.validate();
  return cfg;
}

RunConfig load_config(const fs::path& path) {
  return parse_config(read_text_file(path));
}

std::string serialize_config(const RunConfig& cfg) {
  json j;
  j["version"] = cfg.version;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir.string();
  j["dataset"] = dataset_to_json(cfg.dataset);
  json methods = json::array();
  for (const SamplerMethod& m : cfg.methods) methods.push_back(m.name());
  j["methods"] = methods;
  j["sampler"] = {{"window_size", cfg.sampler.window_size},
                  {"alpha", cfg.sampler.alpha},
                  {"beta", cfg.sampler.beta},
                  {"delta_lower", cfg.sampler.delta_lower},
                  {"delta_upper", cfg.sampler.delta_upper},
                  {"scoring_mode", scoring_mode_name(cfg.sampler.scoring_mode)}};
  j["loop"] = {{"tau", cfg.loop.tau},
               {"k", cfg.loop.k},
               {"exclusion_gap", cfg.loop.exclusion_gap},
               {"gt_radius", cfg.loop.gt_radius},
               {"verify_threshold", cfg.loop.verify_threshold},
               {"sim_sigma_t", cfg.loop.sim_sigma_t},
               {"sim_sigma_r", cfg.loop.sim_sigma_r},
               {"sim_sigma_res", cfg.loop.sim_sigma_res}};
  j["lm"] = {{"max_iterations", cfg.lm.max_iterations},
             {"initial_lambda", cfg.lm.initial_lambda},
             {"lambda_up", cfg.lm.lambda_up},
             {"lambda_down", cfg.lm.lambda_down},
             {"convergence_tol", cfg.lm.convergence_tol},
             {"gradient_tol", cfg.lm.gradient_tol}};
  j["reopt_every"] = cfg.reopt_every;
  j["rpe_delta"] = cfg.rpe_delta;
  j["odom_sigma_t"] = cfg.odom_sigma_t;
  j["odom_sigma_r"] = cfg.odom_sigma_r;
  j["deterministic_timing"] = cfg.deterministic_timing;
  return j.dump(2) + "\n";
}

// ─── dataset loading ─────────────────────────────────────────────────────

namespace {

struct LoadedTrajectory {
  std::vector<Pose> poses;
  std::vector<double> timestamps;
};

LoadedTrajectory load_trajectory(const fs::path& path, TrajectoryFormat fmt) {
  LoadedTrajectory out;
  if (fmt == TrajectoryFormat::kKitti) {
    out.poses = kitti_load(path);
    out.timestamps.resize(out.poses.size());
    for (std::size_t i = 0; i < out.poses.size(); ++i) {
      out.timestamps[i] = 0.1 * static_cast<double>(i);
    }
  } else {
    for (const TumEntry& e : tum_load(path)) {
      out.poses.push_back(e.pose);
      out.timestamps.push_back(e.timestamp);
    }
  }
  return out;
}

}  // namespace

LoadedDataset load_dataset(const DatasetSource& source) {
  LoadedDataset out;
  if (source.synthetic) {
    source.synthetic->validate();
    out.data = generate(*source.synthetic);
    const Trajectory& t = source.synthetic->trajectory;
    out.description =
        std::holds_alternative<CircleTrajectory>(t)    ? "synthetic circle"
        : std::holds_alternative<FigureEightTrajectory>(t)
            ? "synthetic figure-eight"
            : "synthetic grid walk";
    return out;
  }
  if (!source.files) throw ConfigError("dataset has no source");
  const FileSource& f = *source.files;

  const LoadedTrajectory gt = load_trajectory(f.poses, f.format);
  LoadedTrajectory odom;
  if (f.odometry) {
    odom = load_trajectory(*f.odometry, f.format);
    if (odom.poses.size() != gt.poses.size()) {
      throw CountMismatch("odometry trajectory holds " +
                          std::to_string(odom.poses.size()) +
                          " poses but ground truth holds " +
                          std::to_string(gt.poses.size()));
    }
  } else {
    odom = gt;
    out.no_drift = true;
  }

  const std::vector<Descriptor> descriptors = kfd1_load(f.descriptors);
  if (descriptors.size() != gt.poses.size()) {
    throw CountMismatch("descriptor file holds " +
                        std::to_string(descriptors.size()) + " entries but " +
                        "the trajectory holds " +
                        std::to_string(gt.poses.size()) + " poses");
  }

  out.data.gt_poses = gt.poses;
  out.data.odom_poses = odom.poses;
  out.data.keyframes.resize(gt.poses.size());
  for (std::size_t i = 0; i < gt.poses.size(); ++i) {
    Keyframe& kf = out.data.keyframes[i];
    kf.id = static_cast<std::int64_t>(i);
    kf.timestamp = gt.timestamps[i];
    kf.pose = odom.poses[i];
    kf.descriptor = descriptors[i];
  }

  if (f.channels) {
    for (const ChannelRow& row : channels_load(*f.channels)) {
      if (row.id < 0 ||
          row.id >= static_cast<std::int64_t>(out.data.keyframes.size())) {
        throw ConfigError("channel row id " + std::to_string(row.id) +
                          " is outside the trajectory");
      }
      Keyframe& kf = out.data.keyframes[static_cast<std::size_t>(row.id)];
      kf.spaciousness = row.spaciousness;
      kf.entropy_proxy = row.entropy_proxy;
    }
  }

  out.data.gt_loop_pairs = gt_loop_pairs(out.data, kGtLoopRadius, kGtLoopGap);
  out.description = std::string("files (") + trajectory_format_name(f.format) +
                    (out.no_drift ? ", no-drift mode)" : ")");
  return out;
}

// ─── pipeline stages ─────────────────────────────────────────────────────

SampleOutcome run_sampler(const SamplerMethod& method,
                          const SamplerConfig& cfg,
                          const std::vector<Keyframe>& frames,
                          bool zero_timing) {
  const std::unique_ptr<StreamSampler> sampler = make_sampler(method, cfg);
  SampleOutcome out;
  for (const Keyframe& kf : frames) {
    for (Keyframe& kept : sampler->push(kf)) {
      out.kept.push_back(std::move(kept));
    }
  }
  for (Keyframe& kept : sampler->finish()) {
    out.kept.push_back(std::move(kept));
  }
  if (const auto* msa = dynamic_cast<const MsaSampler*>(sampler.get())) {
    out.windows_solved = msa->windows().size();
    if (!zero_timing && !msa->windows().empty()) {
      double total = 0.0;
      for (const WindowSolution& w : msa->windows()) total += w.solve_time;
      out.mean_window_seconds =
          total / static_cast<double>(msa->windows().size());
    }
  }
  return out;
}

Mat6 composed_odometry_information(double sigma_t, double sigma_r,
                                   std::int64_t steps) {
  if (steps < 1) throw ConfigError("composed edge needs at least one step");
  const double k = std::sqrt(static_cast<double>(steps));
  return diagonal_information(sigma_t * k, sigma_r * k);
}

PoseGraph build_graph(const std::vector<Keyframe>& kept,
                      const std::vector<Pose>& odom_poses,
                      const std::vector<LoopEdge>& loops,
                      double odom_sigma_t, double odom_sigma_r) {
  if (kept.empty()) throw TooFewPoses("cannot build a graph with no keyframes");
  const auto odom_at = [&](std::int64_t id) -> const Pose& {
    if (id < 0 || id >= static_cast<std::int64_t>(odom_poses.size())) {
      throw MissingGroundTruth("keyframe id " + std::to_string(id) +
                               " has no odometry pose");
    }
    return odom_poses[static_cast<std::size_t>(id)];
  };

  PoseGraph g;
  Pose state = odom_at(kept.front().id);
  g.add_node(kept.front().id, state);
  for (std::size_t k = 1; k < kept.size(); ++k) {
    const std::int64_t a = kept[k - 1].id;
    const std::int64_t b = kept[k].id;
    GraphEdge e;
    e.i = a;
    e.j = b;
    e.measurement = relative(odom_at(a), odom_at(b));
    e.information =
        composed_odometry_information(odom_sigma_t, odom_sigma_r, b - a);
    state = compose(state, e.measurement);
    g.add_node(b, state);
    g.add_odometry_edge(e);
  }
  for (const LoopEdge& loop : loops) {
    GraphEdge e;
    e.i = loop.i;
    e.j = loop.j;
    e.measurement = loop.measurement;
    e.information = loop.information;
    g.add_loop_edge(e);
  }
  g.fix_node(kept.front().id);
  return g;
}

// ─── per-method drivers ──────────────────────────────────────────────────

namespace {

template <typename F>
auto run_stage(const char* stage_name, const std::string& method, F&& fn)
    -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error("stage '" + std::string(stage_name) + "' failed for method '" +
                method + "': " + e.what());
  }
}

MethodResult make_row(const LoadedDataset& ds, const MethodRun& run,
                      int rpe_delta) {
  MethodResult r;
  r.method = run.method.name();
  r.input_frames = ds.data.keyframes.size();
  r.kept = run.sample.kept.size();

  std::map<std::int64_t, Pose> gt_map;
  std::map<std::int64_t, Pose> odom_map;
  std::vector<Pose> gt_seq;
  std::vector<Pose> opt_seq;
  for (const Keyframe& kf : run.sample.kept) {
    const auto idx = static_cast<std::size_t>(kf.id);
    gt_map[kf.id] = ds.data.gt_poses.at(idx);
    odom_map[kf.id] = kf.pose;
    gt_seq.push_back(ds.data.gt_poses.at(idx));
    opt_seq.push_back(run.optimized.at(kf.id));
  }

  std::tie(r.ate_t_before, r.ate_r_before) = ate(gt_map, odom_map);
  std::tie(r.ate_t_after, r.ate_r_after) = ate(gt_map, run.optimized);
  r.ate_t_improvement = r.ate_t_before > 0.0
                            ? ate_improvement(r.ate_t_before, r.ate_t_after)
                            : 0.0;
  r.ate_r_improvement = r.ate_r_before > 0.0
                            ? ate_improvement(r.ate_r_before, r.ate_r_after)
                            : 0.0;
  try {
    std::tie(r.rpe_t_after, r.rpe_r_after) = rpe(gt_seq, opt_seq, rpe_delta);
  } catch (const TooFewPoses&) {
    r.rpe_t_after = 0.0;
    r.rpe_r_after = 0.0;
  }

  r.detection = detection_metrics(run.detection.records);
  r.peak_memory_bytes =
      run.detection.memory_bytes.empty() ? 0 : run.detection.memory_bytes.back();

  if (!run.detection.query_seconds.empty()) {
    double total = 0.0;
    for (double t : run.detection.query_seconds) total += t;
    r.mean_query_seconds =
        total / static_cast<double>(run.detection.query_seconds.size());
  }
  if (!run.solve_seconds.empty()) {
    double total = 0.0;
    for (double t : run.solve_seconds) total += t;
    r.mean_solve_seconds =
        total / static_cast<double>(run.solve_seconds.size());
  }
  r.windows_solved = run.sample.windows_solved;
  r.mean_window_seconds = run.sample.mean_window_seconds;
  r.total_seconds = run.total_seconds;
  return r;
}

Rng method_rng(const RunConfig& cfg, const SamplerMethod& method) {
  return Rng(cfg.seed).fork(stable_hash(method.name()));
}

MethodRun run_method_batch(const LoadedDataset& ds, const RunConfig& cfg,
                           const SamplerMethod& method) {
  const auto t0 = Clock::now();
  MethodRun run;
  run.method = method;
  const std::string name = method.name();

  run.sample = run_stage("sample", name, [&] {
    return run_sampler(method, cfg.sampler, ds.data.keyframes,
                       cfg.deterministic_timing);
  });
  Rng rng = method_rng(cfg, method);
  run.detection = run_stage("detect", name, [&] {
    return detect_all(run.sample.kept, ds.data.gt_poses, cfg.loop, rng,
                      cfg.deterministic_timing);
  });
  run.graph = run_stage("graph", name, [&] {
    return build_graph(run.sample.kept, ds.data.odom_poses,
                       run.detection.edges, cfg.odom_sigma_t,
                       cfg.odom_sigma_r);
  });
  run_stage("optimize", name, [&] {
    const auto ts = Clock::now();
    OptimizeResult res = optimize(run.graph, cfg.lm);
    const double dt = cfg.deterministic_timing ? 0.0 : seconds_since(ts);
    run.optimized = std::move(res.poses);
    run.solve_steps = {run.sample.kept.back().id};
    run.solve_seconds = {dt};
    return 0;
  });
  run.total_seconds = cfg.deterministic_timing ? 0.0 : seconds_since(t0);
  run.row = run_stage("evaluate", name,
                      [&] { return make_row(ds, run, cfg.rpe_delta); });
  return run;
}

MethodRun run_method_online(const LoadedDataset& ds, const RunConfig& cfg,
                            const SamplerMethod& method) {
  const auto t0 = Clock::now();
  MethodRun run;
  run.method = method;
  const std::string name = method.name();

  run.sample = run_stage("sample", name, [&] {
    return run_sampler(method, cfg.sampler, ds.data.keyframes,
                       cfg.deterministic_timing);
  });
  Rng rng = method_rng(cfg, method);
  run.detection = run_stage("detect", name, [&] {
    return detect_all(run.sample.kept, ds.data.gt_poses, cfg.loop, rng,
                      cfg.deterministic_timing);
  });
  // The pre-optimization graph (for the artifact dump) and the streaming
  // steps share the same composed edges and dead-reckoned initial states.
  run.graph = run_stage("graph", name, [&] {
    return build_graph(run.sample.kept, ds.data.odom_poses,
                       run.detection.edges, cfg.odom_sigma_t,
                       cfg.odom_sigma_r);
  });
  run_stage("optimize", name, [&] {
    std::map<std::int64_t, std::vector<GraphEdge>> loops_by_query;
    for (const LoopEdge& loop : run.detection.edges) {
      GraphEdge e;
      e.i = loop.i;
      e.j = loop.j;
      e.measurement = loop.measurement;
      e.information = loop.information;
      loops_by_query[loop.j].push_back(e);
    }
    std::vector<IncrementalStep> steps;
    steps.reserve(run.sample.kept.size());
    for (std::size_t k = 0; k < run.sample.kept.size(); ++k) {
      IncrementalStep s;
      s.id = run.sample.kept[k].id;
      if (k == 0) {
        s.initial = run.graph.node(s.id);
      } else {
        GraphEdge e = run.graph.odometry_edges()[k - 1];
        s.odometry = e;
      }
      if (auto it = loops_by_query.find(s.id); it != loops_by_query.end()) {
        s.loops = it->second;
      }
      steps.push_back(std::move(s));
    }
    IncrementalResult inc = incremental_run(steps, cfg.lm, cfg.reopt_every,
                                            cfg.deterministic_timing);
    for (const auto& [id, pose] : inc.graph.nodes()) run.optimized[id] = pose;
    run.solve_steps = std::move(inc.solve_steps);
    run.solve_seconds = std::move(inc.solve_seconds);
    return 0;
  });
  run.total_seconds = cfg.deterministic_timing ? 0.0 : seconds_since(t0);
  run.row = run_stage("evaluate", name,
                      [&] { return make_row(ds, run, cfg.rpe_delta); });
  return run;
}

void write_method_artifacts(const fs::path& dir, const LoadedDataset& ds,
                            const MethodRun& run) {
  fs::create_directories(dir);

  std::vector<std::int64_t> ids;
  std::vector<TumEntry> gt_entries;
  std::vector<TumEntry> odom_entries;
  std::vector<TumEntry> opt_entries;
  for (const Keyframe& kf : run.sample.kept) {
    ids.push_back(kf.id);
    TumEntry gt{kf.timestamp,
                ds.data.gt_poses.at(static_cast<std::size_t>(kf.id))};
    TumEntry odom{kf.timestamp, kf.pose};
    TumEntry opt{kf.timestamp, run.optimized.at(kf.id)};
    gt_entries.push_back(gt);
    odom_entries.push_back(odom);
    opt_entries.push_back(opt);
  }
  kept_ids_save(dir / "kept.csv", ids);
  tum_save(dir / "kept_gt.tum", gt_entries);
  tum_save(dir / "kept_odom.tum", odom_entries);
  tum_save(dir / "optimized.tum", opt_entries);
  candidates_save(dir / "candidates.csv", run.detection.records);

  graph_save(dir / "graph.txt", run.graph);
  PoseGraph optimized_graph = run.graph;
  for (const auto& [id, pose] : run.optimized) {
    optimized_graph.set_node_pose(id, pose);
  }
  graph_save(dir / "graph_optimized.txt", optimized_graph);

  write_text_file(dir / "memory.csv",
                  series_csv("memory_bytes", run.detection.steps,
                             run.detection.memory_bytes));
  write_text_file(dir / "query_time.csv",
                  series_csv("query_seconds", run.detection.steps,
                             run.detection.query_seconds));
  write_text_file(dir / "pgo_time.csv",
                  series_csv("solve_seconds", run.solve_steps,
                             run.solve_seconds));
}

Report run_pipeline(const RunConfig& cfg, bool online) {
  cfg.validate();
  const LoadedDataset ds = load_dataset(cfg.dataset);

  fs::create_directories(cfg.output_dir);
  const std::string echo = serialize_config(cfg);
  write_text_file(cfg.output_dir / "config.json", echo);

  const int cap = std::max(1, thread_cap());
  std::vector<MethodRun> runs(cfg.methods.size());
  for (std::size_t wave = 0; wave < cfg.methods.size();
       wave += static_cast<std::size_t>(cap)) {
    const std::size_t end =
        std::min(cfg.methods.size(), wave + static_cast<std::size_t>(cap));
    std::vector<std::future<MethodRun>> futures;
    for (std::size_t m = wave; m < end; ++m) {
      futures.push_back(std::async(std::launch::async, [&, m] {
        return online ? run_method_online(ds, cfg, cfg.methods[m])
                      : run_method_batch(ds, cfg, cfg.methods[m]);
      }));
    }
    for (std::size_t m = wave; m < end; ++m) {
      runs[m] = futures[m - wave].get();
    }
  }

  Report report;
  report.seed = cfg.seed;
  report.config_echo = echo;
  for (const MethodRun& run : runs) {
    write_method_artifacts(cfg.output_dir / run.method.name(), ds, run);
    report.rows.push_back(run.row);
  }
  write_text_file(cfg.output_dir / "report.txt", render_report(report));
  write_text_file(cfg.output_dir / "summary.csv", summary_csv(report.rows));
  return report;
}

}  // namespace

Report run_batch(const RunConfig& cfg) { return run_pipeline(cfg, false); }

Report run_online(const RunConfig& cfg) { return run_pipeline(cfg, true); }

// ─── artifact re-evaluation ──────────────────────────────────────────────

namespace {

std::size_t last_series_value(const fs::path& path) {
  const std::string text = read_text_file(path);
  std::size_t value = 0;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {  // header
      first = false;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(path.string(), 0, "expected two comma-separated fields");
    }
    value = static_cast<std::size_t>(
        std::strtoull(line.c_str() + comma + 1, nullptr, 10));
  }
  return value;
}

}  // namespace

MethodResult evaluate_artifacts(const fs::path& method_dir,
                                const std::string& method_name,
                                int rpe_delta) {
  const std::vector<std::int64_t> ids = kept_ids_load(method_dir / "kept.csv");
  const std::vector<TumEntry> gt = tum_load(method_dir / "kept_gt.tum");
  const std::vector<TumEntry> odom = tum_load(method_dir / "kept_odom.tum");
  const std::vector<TumEntry> opt = tum_load(method_dir / "optimized.tum");
  if (gt.size() != ids.size() || odom.size() != ids.size() ||
      opt.size() != ids.size()) {
    throw CountMismatch("artifact trajectories disagree with kept.csv");
  }

  MethodResult r;
  r.method = method_name;
  r.kept = ids.size();

  std::map<std::int64_t, Pose> gt_map;
  std::map<std::int64_t, Pose> odom_map;
  std::map<std::int64_t, Pose> opt_map;
  std::vector<Pose> gt_seq;
  std::vector<Pose> opt_seq;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    gt_map[ids[i]] = gt[i].pose;
    odom_map[ids[i]] = odom[i].pose;
    opt_map[ids[i]] = opt[i].pose;
    gt_seq.push_back(gt[i].pose);
    opt_seq.push_back(opt[i].pose);
  }
  std::tie(r.ate_t_before, r.ate_r_before) = ate(gt_map, odom_map);
  std::tie(r.ate_t_after, r.ate_r_after) = ate(gt_map, opt_map);
  r.ate_t_improvement = r.ate_t_before > 0.0
                            ? ate_improvement(r.ate_t_before, r.ate_t_after)
                            : 0.0;
  r.ate_r_improvement = r.ate_r_before > 0.0
                            ? ate_improvement(r.ate_r_before, r.ate_r_after)
                            : 0.0;
  try {
    std::tie(r.rpe_t_after, r.rpe_r_after) = rpe(gt_seq, opt_seq, rpe_delta);
  } catch (const TooFewPoses&) {
  }

  r.detection = detection_metrics(candidates_load(method_dir / "candidates.csv"));
  r.peak_memory_bytes = last_series_value(method_dir / "memory.csv");
  return r;
}

int thread_cap() {
  const char* env = std::getenv("KF_MINSET_THREADS");
  long v = 0;
  if (env != nullptr && *env != '\0') {
    char* end = nullptr;
    v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 0) {
      throw ConfigError("KF_MINSET_THREADS must be a nonnegative integer");
    }
  }
  if (v == 0) {
    v = static_cast<long>(std::max(1u, std::thread::hardware_concurrency()));
  }
  return static_cast<int>(v);
}

}  // namespace kfminset
