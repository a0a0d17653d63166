#include "spot/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <json.hpp>

#include "spot/dataset.hpp"
#include "spot/errors.hpp"
#include "spot/field.hpp"
#include "spot/pgm.hpp"
#include "spot/version.hpp"

namespace spot {

namespace fs = std::filesystem;

namespace {

std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Manifest bracket: written at command start, finalized at exit.
class ManifestScope {
 public:
  ManifestScope(const std::string& command, const std::vector<std::string>& argv,
                std::uint64_t seed, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    m_.command = command;
    m_.argv = argv;
    m_.seed = seed;
    m_.version = kVersion;
    m_.out_dir = out_dir.string();
    m_.started_at = now_iso8601();
    dir_ = out_dir;
    write_run_manifest(m_, dir_);
  }
  void finish() {
    m_.finished_at = now_iso8601();
    write_run_manifest(m_, dir_);
  }

 private:
  RunManifest m_;
  fs::path dir_;
};

}  // namespace

void write_run_manifest(const RunManifest& m, const fs::path& out_dir) {
  nlohmann::json j;
  j["command"] = m.command;
  j["argv"] = m.argv;
  j["seed"] = m.seed;
  j["version"] = m.version;
  j["out_dir"] = m.out_dir;
  j["started_at"] = m.started_at;
  j["finished_at"] = m.finished_at;
  std::ofstream out(out_dir / "run_manifest.json");
  if (!out)
    throw DataError("manifest: cannot write run_manifest.json in " +
                    out_dir.string());
  out << j.dump(2) << "\n";
}

RunManifest load_run_manifest(const fs::path& out_dir) {
  std::ifstream in(out_dir / "run_manifest.json");
  if (!in)
    throw DataError("manifest: missing run_manifest.json in " +
                    out_dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest: malformed run_manifest.json: " +
                    std::string(e.what()));
  }
  RunManifest m;
  m.command = j.value("command", "");
  m.argv = j.value("argv", std::vector<std::string>{});
  m.seed = j.value("seed", std::uint64_t{0});
  m.version = j.value("version", "");
  m.out_dir = j.value("out_dir", "");
  m.started_at = j.value("started_at", "");
  m.finished_at = j.value("finished_at", "");
  return m;
}

fs::path default_out_root() {
  if (const char* env = std::getenv("SPOT_OUT_ROOT")) return fs::path(env);
  return fs::path("out");
}

int cmd_phantom(const PhantomCmd& cmd) {
  ManifestScope manifest("phantom", cmd.argv, cmd.seed, cmd.out_dir);
  const Dataset ds =
      make_dataset(cmd.spec, cmd.n_train, cmd.n_val, cmd.n_test, cmd.seed);
  write_dataset(ds, cmd.out_dir);
  std::printf("phantom: wrote %d train / %d val / %d test samples to %s\n",
              cmd.n_train, cmd.n_val, cmd.n_test, cmd.out_dir.c_str());
  manifest.finish();
  return 0;
}

int cmd_train(const TrainCmd& cmd, double* heldout_pearson) {
  const fs::path out_dir = cmd.weights_out.parent_path().empty()
                               ? fs::path(".")
                               : cmd.weights_out.parent_path();
  ManifestScope manifest("train", cmd.argv, cmd.training.seed, out_dir);

  const auto train_samples = load_split(cmd.data_dir, "train");
  const auto val_samples = load_split(cmd.data_dir, "val");
  const auto test_samples = load_split(cmd.data_dir, "test");

  CandidateConfig cc = cmd.candidates;
  cc.seed = cmd.training.seed;
  const CandidateSet train_set =
      build_candidate_sets(train_samples, cc, cmd.segmenter);
  cc.seed = cmd.training.seed + 1;
  const CandidateSet val_set =
      build_candidate_sets(val_samples, cc, cmd.segmenter);
  cc.seed = cmd.training.seed + 2;
  const CandidateSet test_set =
      build_candidate_sets(test_samples, cc, cmd.segmenter);

  if (!cmd.candidates_csv.empty()) {
    CandidateSet all = train_set;
    all.insert(all.end(), val_set.begin(), val_set.end());
    all.insert(all.end(), test_set.begin(), test_set.end());
    write_candidate_csv(all, cmd.candidates_csv);
  }

  std::printf("train: %zu train / %zu val / %zu test candidates\n",
              train_set.size(), val_set.size(), test_set.size());
  const TrainResult result = train_regressor(train_set, val_set, cmd.training);

  save_params(result.params, cmd.weights_out);

  const fs::path loss_path = cmd.loss_csv.empty()
                                 ? out_dir / "loss.csv"
                                 : cmd.loss_csv;
  std::ofstream loss(loss_path);
  if (!loss) throw DataError("train: cannot write " + loss_path.string());
  loss << "epoch,train_mse,val_mse\n";
  for (const EpochLoss& e : result.curve)
    loss << e.epoch << ',' << fmt(e.train_mse) << ',' << fmt(e.val_mse)
         << '\n';

  // Held-out correlation between predictions and true dice.
  const std::vector<double> scores = predict_scores(test_set, result.params);
  std::vector<double> dices(test_set.size());
  for (size_t i = 0; i < test_set.size(); ++i) dices[i] = test_set[i].dice;
  const double r = pearson(scores, dices);
  if (heldout_pearson) *heldout_pearson = r;

  std::printf("train: best epoch %d, val MSE %.6f, held-out pearson r %.4f\n",
              result.best_epoch, result.best_val_mse, r);
  manifest.finish();
  return 0;
}

int cmd_heatmap(const HeatmapCmd& cmd) {
  if (cmd.stride < 1)
    throw std::invalid_argument("heatmap: stride must be >= 1");
  const RegressorParams params = load_params(cmd.weights);
  const Sample sample = load_sample(cmd.data_dir, cmd.id);
  ManifestScope manifest("heatmap", cmd.argv, 0, cmd.out_dir);

  std::ofstream out(cmd.out_dir / ("heatmap_" + cmd.id + ".csv"));
  if (!out)
    throw DataError("heatmap: cannot write output in " + cmd.out_dir.string());
  out << "x,y,dice,score\n";
  for (int y = 0; y < sample.gt.rows(); y += cmd.stride)
    for (int x = 0; x < sample.gt.cols(); x += cmd.stride) {
      if (sample.gt(y, x) == 0.0) continue;
      const Prompt p{double(x), double(y), 1};
      const Grid mask = sharpen(segment(sample.image, p, cmd.segmenter).logits,
                                cmd.sharpen_k);
      const double d = dice(mask, sample.gt);
      const double s = regressor_forward(sample.image, mask, params);
      out << x << ',' << y << ',' << fmt(d) << ',' << fmt(s) << '\n';
    }
  manifest.finish();
  return 0;
}

namespace {

void write_trajectory_csv(const Trajectory& traj, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("evolve: cannot write " + path.string());
  out << "iter,x,y,score,dice\n";
  for (const TrajectoryRecord& r : traj.records) {
    out << r.iter << ',' << fmt(r.prompt.x) << ',' << fmt(r.prompt.y) << ','
        << fmt(r.score) << ',';
    if (r.has_dice) out << fmt(r.dice);
    out << '\n';
  }
}

}  // namespace

int cmd_evolve(const EvolveCmd& cmd) {
  const RegressorParams params = load_params(cmd.weights);
  std::vector<Sample> samples;
  if (!cmd.id.empty())
    samples.push_back(load_sample(cmd.data_dir, cmd.id));
  else
    samples = load_split(cmd.data_dir, cmd.split);
  ManifestScope manifest("evolve", cmd.argv, 0, cmd.out_dir);

  bool any_nonfinite = false;
  for (const Sample& s : samples) {
    const Prompt p0 = initial_prompt(s);
    const EvolveResult res = evolve(s.image, p0, cmd.evolve, params, &s.gt);
    write_trajectory_csv(res.trajectory,
                         cmd.out_dir / ("trajectory_" + s.id + ".csv"));
    any_nonfinite = any_nonfinite || res.trajectory.aborted_nonfinite;
    if (cmd.dump_masks) {
      const fs::path mask_dir = cmd.out_dir / ("masks_" + s.id);
      fs::create_directories(mask_dir);
      for (const TrajectoryRecord& r : res.trajectory.records) {
        const Grid mask =
            sharpen(segment(s.image, r.prompt, cmd.evolve.segmenter).logits,
                    cmd.evolve.sharpen_k);
        char name[32];
        std::snprintf(name, sizeof name, "iter_%04d.pgm", r.iter);
        save_pgm(mask, mask_dir / name);
      }
    }
  }
  manifest.finish();
  return any_nonfinite ? 3 : 0;
}

int cmd_evaluate(const EvaluateCmd& cmd, EvaluateSummary* summary_out) {
  const RegressorParams params = load_params(cmd.weights);
  const std::vector<Sample> samples = load_split(cmd.data_dir, cmd.split);
  ManifestScope manifest("evaluate", cmd.argv, 0, cmd.out_dir);

  struct Row {
    std::string id;
    double dice_initial, dice_evolved, score_initial, score_evolved;
    bool nonfinite;
  };
  std::vector<Row> rows(samples.size());

  const auto run_one = [&](size_t i) {
    const Sample& s = samples[i];
    const Prompt p0 = initial_prompt(s);
    const EvolveResult res = evolve(s.image, p0, cmd.evolve, params, &s.gt);
    const auto& recs = res.trajectory.records;
    const auto& best = recs[size_t(res.trajectory.best_index)];
    rows[i] = Row{s.id, recs[0].dice, best.dice, recs[0].score, best.score,
                  res.trajectory.aborted_nonfinite};
  };

  const int jobs = std::max(1, cmd.jobs);
  if (jobs == 1) {
    for (size_t i = 0; i < samples.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    for (int j = 0; j < jobs; ++j)
      pool.emplace_back([&] {
        for (size_t i = next.fetch_add(1); i < samples.size();
             i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& t : pool) t.join();
  }

  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.id < b.id; });

  std::ofstream per(cmd.out_dir / "per_image.csv");
  if (!per)
    throw DataError("evaluate: cannot write output in " +
                    cmd.out_dir.string());
  per << "id,dice_initial,dice_evolved,score_initial,score_evolved\n";
  for (const Row& r : rows)
    per << r.id << ',' << fmt(r.dice_initial) << ',' << fmt(r.dice_evolved)
        << ',' << fmt(r.score_initial) << ',' << fmt(r.score_evolved) << '\n';

  EvaluateSummary sum;
  sum.n_images = int(rows.size());
  std::vector<double> scores, dices;
  for (const Row& r : rows) {
    if (r.dice_evolved > r.dice_initial) sum.fraction_improved += 1.0;
    sum.mean_dice_initial += r.dice_initial;
    sum.mean_dice_evolved += r.dice_evolved;
    sum.any_nonfinite = sum.any_nonfinite || r.nonfinite;
    scores.push_back(r.score_evolved);
    dices.push_back(r.dice_evolved);
  }
  sum.fraction_improved /= double(rows.size());
  sum.mean_dice_initial /= double(rows.size());
  sum.mean_dice_evolved /= double(rows.size());
  sum.pearson_score_dice = pearson(scores, dices);

  std::ofstream out(cmd.out_dir / "summary.csv");
  out << "n_images,fraction_improved,mean_dice_initial,mean_dice_evolved,"
         "pearson_score_dice\n";
  out << sum.n_images << ',' << fmt(sum.fraction_improved) << ','
      << fmt(sum.mean_dice_initial) << ',' << fmt(sum.mean_dice_evolved) << ','
      << fmt(sum.pearson_score_dice) << '\n';

  std::printf(
      "evaluate: %d images, fraction improved %.3f, mean dice %.4f -> %.4f, "
      "pearson(score, dice) %.4f\n",
      sum.n_images, sum.fraction_improved, sum.mean_dice_initial,
      sum.mean_dice_evolved, sum.pearson_score_dice);
  if (summary_out) *summary_out = sum;
  manifest.finish();
  return sum.any_nonfinite ? 3 : 0;
}

}  // namespace spot
