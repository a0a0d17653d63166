#include "spot/dataset.hpp"

#include <fstream>
#include <sstream>

#include "spot/errors.hpp"
#include "spot/pgm.hpp"

namespace spot {

namespace fs = std::filesystem;

void write_dataset(const Dataset& ds, const fs::path& dir) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  std::ofstream manifest(dir / "manifest.csv");
  if (!manifest)
    throw DataError("dataset: cannot write manifest in " + dir.string());
  manifest << "id,image_path,mask_path,split\n";
  const auto dump = [&](const std::vector<Sample>& split, const char* name) {
    for (const Sample& s : split) {
      const std::string img_rel = "images/" + s.id + ".pgm";
      const std::string mask_rel = "masks/" + s.id + ".pgm";
      save_pgm(s.image, dir / img_rel);
      save_mask_pgm(s.gt, dir / mask_rel);
      manifest << s.id << ',' << img_rel << ',' << mask_rel << ',' << name
               << '\n';
    }
  };
  dump(ds.train, "train");
  dump(ds.val, "val");
  dump(ds.test, "test");
}

std::vector<ManifestRow> load_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.csv");
  if (!in)
    throw DataError("dataset: missing manifest.csv in " + dir.string());
  std::string line;
  if (!std::getline(in, line) || line != "id,image_path,mask_path,split")
    throw DataError("dataset: bad manifest header in " + dir.string());
  std::vector<ManifestRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    ManifestRow r;
    if (!std::getline(ss, r.id, ',') || !std::getline(ss, r.image_path, ',') ||
        !std::getline(ss, r.mask_path, ',') || !std::getline(ss, r.split))
      throw DataError("dataset: malformed manifest row: " + line);
    rows.push_back(std::move(r));
  }
  return rows;
}

namespace {

Sample load_row(const fs::path& dir, const ManifestRow& row) {
  Sample s;
  s.id = row.id;
  s.image = load_pgm(dir / row.image_path);
  s.gt = load_mask_pgm(dir / row.mask_path);
  if (s.image.rows() != s.gt.rows() || s.image.cols() != s.gt.cols())
    throw DataError("dataset: image/mask size mismatch for id " + row.id);
  return s;
}

}  // namespace

std::vector<Sample> load_split(const fs::path& dir, const std::string& split) {
  std::vector<Sample> out;
  for (const ManifestRow& row : load_manifest(dir))
    if (row.split == split) out.push_back(load_row(dir, row));
  if (out.empty())
    throw DataError("dataset: split '" + split + "' is empty in " +
                    dir.string());
  return out;
}

Sample load_sample(const fs::path& dir, const std::string& id) {
  for (const ManifestRow& row : load_manifest(dir))
    if (row.id == id) return load_row(dir, row);
  throw DataError("dataset: no sample with id '" + id + "' in " +
                  dir.string());
}

}  // namespace spot
