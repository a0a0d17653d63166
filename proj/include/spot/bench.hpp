#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spot/evolve.hpp"
#include "spot/phantom.hpp"
#include "spot/trainer.hpp"

namespace spot {

// Every command drops a run_manifest.json into its output directory: the
// command name, the exact flag list, seed, code version and wall-clock
// bounds. Re-running the recorded flags reproduces all other outputs
// byte-for-byte (the manifest itself carries the timestamps).
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  std::string version;
  std::string out_dir;
  std::string started_at;
  std::string finished_at;
};

void write_run_manifest(const RunManifest& m,
                        const std::filesystem::path& out_dir);
RunManifest load_run_manifest(const std::filesystem::path& out_dir);

struct PhantomCmd {
  std::filesystem::path out_dir;
  int n_train = 40, n_val = 20, n_test = 50;
  std::uint64_t seed = 7;
  PhantomSpec spec;
  std::vector<std::string> argv;  // for the manifest
};
int cmd_phantom(const PhantomCmd& cmd);

struct TrainCmd {
  std::filesystem::path data_dir;
  std::filesystem::path weights_out;
  std::filesystem::path loss_csv;        // defaults next to weights_out
  std::filesystem::path candidates_csv;  // optional audit dump
  TrainingConfig training;
  CandidateConfig candidates;
  SegmenterConfig segmenter;
  std::vector<std::string> argv;
};
// Returns the held-out (test split) Pearson r between predicted score and
// true dice, also printed to stdout.
int cmd_train(const TrainCmd& cmd, double* heldout_pearson = nullptr);

struct HeatmapCmd {
  std::filesystem::path data_dir;
  std::string id;
  std::filesystem::path weights;
  std::filesystem::path out_dir;
  int stride = 2;
  double sharpen_k = 10.0;
  SegmenterConfig segmenter;
  std::vector<std::string> argv;
};
// Writes heatmap_<id>.csv with header x,y,dice,score over in-mask grid
// points at the given stride.
int cmd_heatmap(const HeatmapCmd& cmd);

struct EvolveCmd {
  std::filesystem::path data_dir;
  std::string id;     // single image, or
  std::string split;  // every image of a split
  std::filesystem::path weights;
  std::filesystem::path out_dir;
  EvolveConfig evolve;
  bool dump_masks = false;
  std::vector<std::string> argv;
};
// Writes trajectory_<id>.csv (iter,x,y,score,dice) per image.
int cmd_evolve(const EvolveCmd& cmd);

struct EvaluateCmd {
  std::filesystem::path data_dir;
  std::string split = "test";
  std::filesystem::path weights;
  std::filesystem::path out_dir;
  EvolveConfig evolve;
  int jobs = 1;
  std::vector<std::string> argv;
};
struct EvaluateSummary {
  double fraction_improved = 0.0;
  double mean_dice_initial = 0.0;
  double mean_dice_evolved = 0.0;
  double pearson_score_dice = 0.0;
  int n_images = 0;
  bool any_nonfinite = false;
};
// Writes per_image.csv (id,dice_initial,dice_evolved,score_initial,
// score_evolved) and summary.csv; prints the summary.
int cmd_evaluate(const EvaluateCmd& cmd, EvaluateSummary* summary = nullptr);

// Default output root: $SPOT_OUT_ROOT if set, else "./out".
std::filesystem::path default_out_root();

}  // namespace spot
