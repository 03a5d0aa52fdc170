// kf-minset: keyframe-sampling benchmark driver.
//
// Subcommands cover the full pipeline (run-batch / run-online) plus the
// individual stages (synth, sample, loops, pgo, eval) so that every stage
// can be scripted independently against the documented file formats.
//
// Exit codes: 0 success, 1 configuration error, 2 pipeline error.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kfminset/io.hpp"
#include "kfminset/pipeline.hpp"
#include "kfminset/rng.hpp"

namespace fs = std::filesystem;
using namespace kfminset;

namespace {

using Clock = std::chrono::steady_clock;

std::vector<TumEntry> kept_entries(const std::vector<Keyframe>& kept,
                                   const std::vector<Pose>& poses_by_id) {
  std::vector<TumEntry> out;
  out.reserve(kept.size());
  for (const Keyframe& kf : kept) {
    out.push_back(
        TumEntry{kf.timestamp, poses_by_id.at(static_cast<std::size_t>(kf.id))});
  }
  return out;
}

void write_kept_files(const fs::path& dir, const LoadedDataset& ds,
                      const std::vector<Keyframe>& kept) {
  fs::create_directories(dir);
  std::vector<std::int64_t> ids;
  std::vector<TumEntry> odom;
  for (const Keyframe& kf : kept) {
    ids.push_back(kf.id);
    odom.push_back(TumEntry{kf.timestamp, kf.pose});
  }
  kept_ids_save(dir / "kept.csv", ids);
  tum_save(dir / "kept_gt.tum", kept_entries(kept, ds.data.gt_poses));
  tum_save(dir / "kept_odom.tum", odom);
}

int cmd_synth(const RunConfig& cfg) {
  if (!cfg.dataset.synthetic) {
    throw ConfigError("'synth' needs a config with a synthetic dataset source");
  }
  const LoadedDataset ds = load_dataset(cfg.dataset);
  fs::create_directories(cfg.output_dir);

  std::vector<TumEntry> gt;
  std::vector<TumEntry> odom;
  std::vector<Descriptor> descriptors;
  std::vector<ChannelRow> channels;
  for (const Keyframe& kf : ds.data.keyframes) {
    const auto i = static_cast<std::size_t>(kf.id);
    gt.push_back(TumEntry{kf.timestamp, ds.data.gt_poses.at(i)});
    odom.push_back(TumEntry{kf.timestamp, ds.data.odom_poses.at(i)});
    descriptors.push_back(kf.descriptor);
    channels.push_back(ChannelRow{kf.id, kf.spaciousness.value_or(0.0),
                                  kf.entropy_proxy.value_or(0.0)});
  }
  tum_save(cfg.output_dir / "gt.tum", gt);
  tum_save(cfg.output_dir / "odom.tum", odom);
  kfd1_save(cfg.output_dir / "descriptors.kfd1", descriptors);
  channels_save(cfg.output_dir / "channels.csv", channels);
  std::cout << "wrote " << ds.data.keyframes.size() << " frames ("
            << ds.description << ") to " << cfg.output_dir.string() << "\n";
  return 0;
}

int cmd_sample(const RunConfig& cfg) {
  const LoadedDataset ds = load_dataset(cfg.dataset);
  for (const SamplerMethod& method : cfg.methods) {
    const SampleOutcome outcome = run_sampler(
        method, cfg.sampler, ds.data.keyframes, cfg.deterministic_timing);
    write_kept_files(cfg.output_dir / method.name(), ds, outcome.kept);
    std::cout << method.name() << ": kept " << outcome.kept.size() << " of "
              << ds.data.keyframes.size() << " frames\n";
  }
  return 0;
}

int cmd_loops(const RunConfig& cfg) {
  const LoadedDataset ds = load_dataset(cfg.dataset);
  for (const SamplerMethod& method : cfg.methods) {
    const SampleOutcome outcome = run_sampler(
        method, cfg.sampler, ds.data.keyframes, cfg.deterministic_timing);
    Rng rng = Rng(cfg.seed).fork(stable_hash(method.name()));
    const DetectionResult detection =
        detect_all(outcome.kept, ds.data.gt_poses, cfg.loop, rng,
                   cfg.deterministic_timing);
    const PoseGraph graph =
        build_graph(outcome.kept, ds.data.odom_poses, detection.edges,
                    cfg.odom_sigma_t, cfg.odom_sigma_r);

    const fs::path dir = cfg.output_dir / method.name();
    write_kept_files(dir, ds, outcome.kept);
    candidates_save(dir / "candidates.csv", detection.records);
    graph_save(dir / "graph.txt", graph);
    write_text_file(dir / "memory.csv", series_csv("memory_bytes",
                                                   detection.steps,
                                                   detection.memory_bytes));
    write_text_file(dir / "query_time.csv",
                    series_csv("query_seconds", detection.steps,
                               detection.query_seconds));
    std::cout << method.name() << ": " << detection.records.size()
              << " candidates, " << detection.edges.size()
              << " verified edges\n";
  }
  return 0;
}

int cmd_pgo(const RunConfig& cfg) {
  for (const SamplerMethod& method : cfg.methods) {
    const fs::path dir = cfg.output_dir / method.name();
    PoseGraph graph = graph_load(dir / "graph.txt");
    if (graph.nodes().empty()) {
      throw TooFewPoses("graph dump holds no nodes");
    }
    graph.fix_node(graph.nodes().begin()->first);

    const auto t0 = Clock::now();
    const OptimizeResult result = optimize(graph, cfg.lm);
    const double dt =
        cfg.deterministic_timing
            ? 0.0
            : std::chrono::duration<double>(Clock::now() - t0).count();

    const std::vector<std::int64_t> ids = kept_ids_load(dir / "kept.csv");
    const std::vector<TumEntry> gt = tum_load(dir / "kept_gt.tum");
    if (gt.size() != ids.size()) {
      throw CountMismatch("kept_gt.tum disagrees with kept.csv");
    }
    PoseGraph optimized_graph = graph;
    std::vector<TumEntry> optimized;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      optimized.push_back(TumEntry{gt[i].timestamp, result.poses.at(ids[i])});
    }
    for (const auto& [id, pose] : result.poses) {
      optimized_graph.set_node_pose(id, pose);
    }
    graph_save(dir / "graph_optimized.txt", optimized_graph);
    tum_save(dir / "optimized.tum", optimized);
    write_text_file(dir / "pgo_time.csv",
                    series_csv("solve_seconds",
                               std::vector<std::int64_t>{ids.back()},
                               std::vector<double>{dt}));
    std::cout << method.name() << ": error " << result.initial_error << " -> "
              << result.final_error << " in " << result.accepted_steps
              << " accepted steps\n";
  }
  return 0;
}

int cmd_eval(const RunConfig& cfg) {
  Report report;
  report.seed = cfg.seed;
  report.config_echo = serialize_config(cfg);
  for (const SamplerMethod& method : cfg.methods) {
    report.rows.push_back(evaluate_artifacts(cfg.output_dir / method.name(),
                                             method.name(), cfg.rpe_delta));
  }
  write_text_file(cfg.output_dir / "report.txt", render_report(report));
  write_text_file(cfg.output_dir / "summary.csv", summary_csv(report.rows));
  std::cout << render_report(report);
  return 0;
}

int dispatch(const std::string& command, const RunConfig& cfg) {
  if (command == "synth") return cmd_synth(cfg);
  if (command == "sample") return cmd_sample(cfg);
  if (command == "loops") return cmd_loops(cfg);
  if (command == "pgo") return cmd_pgo(cfg);
  if (command == "eval") return cmd_eval(cfg);
  if (command == "run-batch") {
    std::cout << render_report(run_batch(cfg));
    return 0;
  }
  if (command == "run-online") {
    std::cout << render_report(run_online(cfg));
    return 0;
  }
  throw ConfigError("unknown subcommand '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"keyframe sampling and pose-graph benchmark"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  std::vector<std::string> method_overrides;

  const std::vector<std::pair<const char*, const char*>> commands = {
      {"synth", "generate a synthetic dataset as plain files"},
      {"sample", "run the keyframe samplers and write kept.csv per method"},
      {"loops", "sample, detect loop closures, and dump the constraint graph"},
      {"pgo", "optimize a previously dumped constraint graph"},
      {"eval", "recompute metrics from dumped artifacts"},
      {"run-batch", "full batch pipeline: sample, detect, optimize, evaluate"},
      {"run-online", "streaming pipeline with periodic re-optimization"},
  };
  for (const auto& [name, description] : commands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "JSON run configuration file")
        ->required();
    sub->add_option("--out", out_override,
                    "output directory (overrides the config)");
    sub->add_option("--seed", seed_override, "seed (overrides the config)");
    sub->add_option("--method", method_overrides,
                    "sampler method, repeatable (replaces config methods)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const CLI::App* chosen = app.get_subcommands().front();

  RunConfig cfg;
  try {
    cfg = load_config(config_path);
    if (chosen->count("--out") > 0) cfg.output_dir = out_override;
    if (chosen->count("--seed") > 0) cfg.seed = seed_override;
    if (!method_overrides.empty()) {
      cfg.methods.clear();
      for (const std::string& m : method_overrides) {
        cfg.methods.push_back(SamplerMethod::parse(m));
      }
    }
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    return dispatch(chosen->get_name(), cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
