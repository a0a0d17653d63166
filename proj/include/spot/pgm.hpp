#pragma once

#include <filesystem>

#include "spot/grid.hpp"

namespace spot {

// Binary PGM (P5) I/O. Image grids use maxval 65535 with big-endian words
// per the Netpbm spec, stored as round(value * 65535); masks use maxval 255
// with 0/255 semantics, thresholded at 128 on load.

void save_pgm(const Grid& g, const std::filesystem::path& path);
Grid load_pgm(const std::filesystem::path& path);

void save_mask_pgm(const Grid& mask, const std::filesystem::path& path);
Grid load_mask_pgm(const std::filesystem::path& path);

}  // namespace spot
