#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spot/phantom.hpp"

namespace spot {

// On-disk dataset layout:
//   <dir>/manifest.csv           header: id,image_path,mask_path,split
//   <dir>/images/<id>.pgm        16-bit P5
//   <dir>/masks/<id>.pgm         8-bit P5, 0/255
struct ManifestRow {
  std::string id, image_path, mask_path, split;
};

void write_dataset(const Dataset& ds, const std::filesystem::path& dir);

std::vector<ManifestRow> load_manifest(const std::filesystem::path& dir);

// Loads every sample of one split ("train", "val" or "test"), in manifest
// order. Throws DataError if the split is missing or empty.
std::vector<Sample> load_split(const std::filesystem::path& dir,
                               const std::string& split);

// Loads a single sample by id.
Sample load_sample(const std::filesystem::path& dir, const std::string& id);

}  // namespace spot
