#include "spot/cli.hpp"

#include <cstdio>

#include <CLI11.hpp>

#include "spot/bench.hpp"
#include "spot/errors.hpp"
#include "spot/version.hpp"

namespace spot {

namespace {

void add_segmenter_flags(CLI::App* app, SegmenterConfig& cfg) {
  app->add_option("--kappa", cfg.kappa, "Surrogate logit scale");
  app->add_option("--tau", cfg.tau, "Surrogate affinity offset");
  app->add_option("--lambda-i", cfg.lambda_i, "Intensity-dissimilarity weight");
  app->add_option("--lambda-r", cfg.lambda_r, "Normalized-radius weight");
}

void add_evolve_flags(CLI::App* app, EvolveConfig& cfg) {
  app->add_option("--iters", cfg.max_iters, "Max ascent iterations")
      ->check(CLI::PositiveNumber);
  app->add_option("--lr", cfg.lr, "Adam step size for the prompt");
  app->add_option("--k", cfg.sharpen_k, "Sharpening slope")
      ->check(CLI::PositiveNumber);
  app->add_option("--clamp-margin", cfg.clamp_margin,
                  "Border margin when clamping prompts");
  add_segmenter_flags(app, cfg.segmenter);
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"spot: prompt evolution for promptable segmentation"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // phantom
  PhantomCmd phantom;
  auto* p = app.add_subcommand("phantom", "Generate a synthetic dataset");
  p->add_option("--out", phantom.out_dir, "Output directory");
  p->add_option("--train", phantom.n_train, "Training samples")
      ->check(CLI::PositiveNumber);
  p->add_option("--val", phantom.n_val, "Validation samples")
      ->check(CLI::PositiveNumber);
  p->add_option("--test", phantom.n_test, "Test samples")
      ->check(CLI::PositiveNumber);
  p->add_option("--seed", phantom.seed, "Master seed");
  p->add_option("--width", phantom.spec.width, "Image width")
      ->check(CLI::Range(8, 4096));
  p->add_option("--height", phantom.spec.height, "Image height")
      ->check(CLI::Range(8, 4096));
  p->add_option("--lung-intensity", phantom.spec.lung_intensity);
  p->add_option("--background-intensity", phantom.spec.background_intensity);
  p->add_option("--rib-amplitude", phantom.spec.rib_amplitude);
  p->add_option("--rib-period", phantom.spec.rib_period);
  p->add_option("--pathology-probability", phantom.spec.pathology_probability);
  p->add_option("--noise-sigma", phantom.spec.noise_sigma);
  p->add_option("--center-jitter", phantom.spec.center_jitter);
  p->add_option("--axis-jitter", phantom.spec.axis_jitter);

  // train
  TrainCmd train;
  auto* t = app.add_subcommand("train", "Train the quality regressor");
  t->add_option("--data", train.data_dir, "Dataset directory")->required();
  t->add_option("--weights-out", train.weights_out, "Weight file to write");
  t->add_option("--loss-csv", train.loss_csv, "Loss curve CSV path");
  t->add_option("--candidates-csv", train.candidates_csv,
                "Optional candidate audit CSV");
  t->add_option("--epochs", train.training.epochs, "Training epochs")
      ->check(CLI::PositiveNumber);
  t->add_option("--batch", train.training.batch_size, "Batch size")
      ->check(CLI::PositiveNumber);
  t->add_option("--lr", train.training.lr, "Learning rate")
      ->check(CLI::PositiveNumber);
  t->add_option("--seed", train.training.seed, "Training seed");
  t->add_option("--patience", train.training.patience,
                "Early-stop patience in epochs (0 = off)");
  t->add_option("--outside-offset", train.candidates.outside_offset,
                "Offset in pixels for outside prompts");
  t->add_option("--sharpen-k", train.candidates.sharpen_k,
                "Sharpening slope for prompt candidates");
  add_segmenter_flags(t, train.segmenter);

  // heatmap
  HeatmapCmd heatmap;
  auto* h = app.add_subcommand("heatmap", "Dice/score sweep over prompts");
  h->add_option("--data", heatmap.data_dir, "Dataset directory")->required();
  h->add_option("--id", heatmap.id, "Sample id")->required();
  h->add_option("--weights", heatmap.weights, "Weight file")->required();
  h->add_option("--out", heatmap.out_dir, "Output directory");
  h->add_option("--stride", heatmap.stride, "Grid stride in pixels")
      ->check(CLI::PositiveNumber);
  h->add_option("--k", heatmap.sharpen_k, "Sharpening slope")
      ->check(CLI::PositiveNumber);
  add_segmenter_flags(h, heatmap.segmenter);

  // evolve
  EvolveCmd evolve;
  auto* e = app.add_subcommand("evolve", "Run prompt evolution");
  e->add_option("--data", evolve.data_dir, "Dataset directory")->required();
  auto* eid = e->add_option("--id", evolve.id, "Single sample id");
  e->add_option("--split", evolve.split, "Whole split (train/val/test)")
      ->excludes(eid);
  e->add_option("--weights", evolve.weights, "Weight file")->required();
  e->add_option("--out", evolve.out_dir, "Output directory");
  e->add_flag("--dump-masks", evolve.dump_masks,
              "Write per-iteration mask PGMs");
  add_evolve_flags(e, evolve.evolve);

  // evaluate
  EvaluateCmd evaluate;
  auto* v = app.add_subcommand("evaluate", "Initial-vs-evolved dice study");
  v->add_option("--data", evaluate.data_dir, "Dataset directory")->required();
  v->add_option("--split", evaluate.split, "Split to evaluate");
  v->add_option("--weights", evaluate.weights, "Weight file")->required();
  v->add_option("--out", evaluate.out_dir, "Output directory");
  v->add_option("--jobs", evaluate.jobs, "Parallel workers")
      ->check(CLI::PositiveNumber);
  add_evolve_flags(v, evaluate.evolve);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*p) {
      if (phantom.out_dir.empty())
        phantom.out_dir = default_out_root() / "phantom";
      phantom.argv = args;
      return cmd_phantom(phantom);
    }
    if (*t) {
      if (train.weights_out.empty())
        train.weights_out = default_out_root() / "train" / "weights.spot";
      train.argv = args;
      return cmd_train(train);
    }
    if (*h) {
      if (heatmap.out_dir.empty())
        heatmap.out_dir = default_out_root() / "heatmap";
      heatmap.argv = args;
      return cmd_heatmap(heatmap);
    }
    if (*e) {
      if (evolve.id.empty() && evolve.split.empty()) {
        std::fprintf(stderr, "evolve: provide --id or --split\n");
        return 1;
      }
      if (evolve.out_dir.empty())
        evolve.out_dir = default_out_root() / "evolve";
      evolve.argv = args;
      return cmd_evolve(evolve);
    }
    if (*v) {
      if (evaluate.out_dir.empty())
        evaluate.out_dir = default_out_root() / "evaluate";
      evaluate.argv = args;
      return cmd_evaluate(evaluate);
    }
  } catch (const NumericalError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 3;
  } catch (const DataError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  } catch (const std::invalid_argument& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 2;
  }
  return 1;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(size_t(argc) - 1);
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args);
}

}  // namespace spot
