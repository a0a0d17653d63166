#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "spot/phantom.hpp"
#include "spot/segmenter.hpp"

namespace spot {

// Thresholds the signed distance map at -delta: positive delta dilates the
// mask, negative delta erodes it, zero returns it unchanged.
Grid levelset_perturb(const Grid& gt, double delta);

// Splits the foreground rows into three contiguous bands of near-equal
// foreground count and returns each band's centroid.
std::array<Prompt, 3> band_prompts(const Grid& gt);

// Uniformly sampled distinct pixels at signed distance <= -offset.
std::vector<Prompt> outside_prompts(const Grid& gt, int n, double offset,
                                    std::uint64_t seed);

// One scored (image, candidate mask, true dice) triple.
struct Candidate {
  std::string sample_id;
  std::shared_ptr<const Grid> image;
  Grid mask;
  double dice = 0.0;
  std::string source;  // "levelset", "band" or "outside"
  double delta = 0.0;  // for levelset candidates
  Prompt prompt;       // for prompt candidates
};
using CandidateSet = std::vector<Candidate>;

struct CandidateConfig {
  std::vector<double> deltas{-6.0, -4.0, -2.0, -1.0, 1.0, 2.0, 4.0, 6.0};
  bool include_prompts = true;  // 3 band + n_outside prompt candidates
  int n_outside = 3;
  double outside_offset = 5.0;
  double sharpen_k = 10.0;
  std::uint64_t seed = 0;
};

// Level-set masks are binary; prompt-derived masks are the surrogate's
// sharpened soft predictions. Every candidate carries its soft dice vs gt.
CandidateSet build_candidate_set(const Sample& sample,
                                 const CandidateConfig& cfg,
                                 const SegmenterConfig& seg);

// Concatenation over samples with per-sample derived seeds.
CandidateSet build_candidate_sets(const std::vector<Sample>& samples,
                                  const CandidateConfig& cfg,
                                  const SegmenterConfig& seg);

// Audit export: sample_id,source,delta_or_prompt,dice
void write_candidate_csv(const CandidateSet& set,
                         const std::filesystem::path& path);

}  // namespace spot
