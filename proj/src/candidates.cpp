#include "spot/candidates.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "spot/errors.hpp"
#include "spot/field.hpp"
#include "spot/rng.hpp"

namespace spot {

Grid levelset_perturb(const Grid& gt, double delta) {
  const Grid sdt = signed_distance(gt);  // validates the mask
  return (sdt > -delta).cast<double>();
}

std::array<Prompt, 3> band_prompts(const Grid& gt) {
  const int h = int(gt.rows());
  Eigen::ArrayXd row_count(h);
  for (int y = 0; y < h; ++y) row_count[y] = gt.row(y).sum();
  const double total = row_count.sum();
  if (total == 0.0) throw std::invalid_argument("band_prompts: empty mask");

  int first = 0, last = h - 1;
  while (row_count[first] == 0.0) ++first;
  while (row_count[last] == 0.0) --last;
  if (last - first < 2)
    throw std::invalid_argument(
        "band_prompts: cannot form 3 nonempty row bands");

  // Band boundaries at one and two thirds of the cumulative foreground.
  double cum = 0.0;
  int a = -1, b = -1;
  for (int y = first; y <= last; ++y) {
    cum += row_count[y];
    if (a < 0 && cum >= total / 3.0) a = y;
    if (b < 0 && cum >= 2.0 * total / 3.0) b = y;
  }
  if (b <= a) b = a + 1;
  if (a >= last || b >= last)
    throw std::invalid_argument("band_prompts: empty band");

  const auto band_centroid = [&](int y0, int y1) {
    double sx = 0.0, sy = 0.0, n = 0.0;
    for (int y = y0; y <= y1; ++y)
      for (int x = 0; x < gt.cols(); ++x)
        if (gt(y, x) != 0.0) {
          sx += x;
          sy += y;
          n += 1.0;
        }
    if (n == 0.0) throw std::invalid_argument("band_prompts: empty band");
    return Prompt{sx / n, sy / n, 1};
  };
  return {band_centroid(first, a), band_centroid(a + 1, b),
          band_centroid(b + 1, last)};
}

std::vector<Prompt> outside_prompts(const Grid& gt, int n, double offset,
                                    std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("outside_prompts: n must be >= 1");
  const Grid sdt = signed_distance(gt);
  std::vector<std::pair<int, int>> eligible;
  for (int y = 0; y < gt.rows(); ++y)
    for (int x = 0; x < gt.cols(); ++x)
      if (sdt(y, x) <= -offset) eligible.emplace_back(x, y);
  if (int(eligible.size()) < n)
    throw std::invalid_argument(
        "outside_prompts: not enough background pixels at the given offset");

  // Partial Fisher-Yates gives n distinct pixels.
  Pcg32 rng(seed, /*stream=*/0x07);
  std::vector<Prompt> out;
  out.reserve(size_t(n));
  for (int i = 0; i < n; ++i) {
    const auto j =
        i + int(rng.next_below(std::uint32_t(eligible.size() - size_t(i))));
    std::swap(eligible[size_t(i)], eligible[size_t(j)]);
    out.push_back(Prompt{double(eligible[size_t(i)].first),
                         double(eligible[size_t(i)].second), 1});
  }
  return out;
}

CandidateSet build_candidate_set(const Sample& sample,
                                 const CandidateConfig& cfg,
                                 const SegmenterConfig& seg) {
  auto image = std::make_shared<const Grid>(sample.image);
  CandidateSet set;
  for (const double delta : cfg.deltas) {
    Candidate c;
    c.sample_id = sample.id;
    c.image = image;
    c.mask = levelset_perturb(sample.gt, delta);
    c.dice = dice(c.mask, sample.gt);
    c.source = "levelset";
    c.delta = delta;
    set.push_back(std::move(c));
  }
  if (cfg.include_prompts) {
    std::vector<Prompt> prompts;
    std::vector<std::string> sources;
    for (const Prompt& p : band_prompts(sample.gt)) {
      prompts.push_back(p);
      sources.emplace_back("band");
    }
    for (const Prompt& p :
         outside_prompts(sample.gt, cfg.n_outside, cfg.outside_offset,
                         cfg.seed)) {
      prompts.push_back(p);
      sources.emplace_back("outside");
    }
    for (size_t i = 0; i < prompts.size(); ++i) {
      Candidate c;
      c.sample_id = sample.id;
      c.image = image;
      c.mask = sharpen(segment(sample.image, prompts[i], seg).logits,
                       cfg.sharpen_k);
      c.dice = dice(c.mask, sample.gt);
      c.source = sources[i];
      c.prompt = prompts[i];
      set.push_back(std::move(c));
    }
  }
  return set;
}

CandidateSet build_candidate_sets(const std::vector<Sample>& samples,
                                  const CandidateConfig& cfg,
                                  const SegmenterConfig& seg) {
  CandidateSet all;
  std::uint64_t stream = cfg.seed;
  for (const Sample& s : samples) {
    CandidateConfig per = cfg;
    per.seed = splitmix64(stream);
    CandidateSet one = build_candidate_set(s, per, seg);
    all.insert(all.end(), std::make_move_iterator(one.begin()),
               std::make_move_iterator(one.end()));
  }
  return all;
}

void write_candidate_csv(const CandidateSet& set,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("candidates: cannot write " + path.string());
  out << "sample_id,source,delta_or_prompt,dice\n";
  char buf[128];
  for (const Candidate& c : set) {
    if (c.source == "levelset")
      std::snprintf(buf, sizeof buf, "%g", c.delta);
    else
      std::snprintf(buf, sizeof buf, "%.3f;%.3f", c.prompt.x, c.prompt.y);
    out << c.sample_id << ',' << c.source << ',' << buf << ',';
    std::snprintf(buf, sizeof buf, "%.9g", c.dice);
    out << buf << '\n';
  }
}

}  // namespace spot
