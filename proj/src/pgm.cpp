#include "spot/pgm.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "spot/errors.hpp"

namespace spot {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF && (std::isspace(c) || c == '#')) {
    if (c == '#')
      while (c != EOF && c != '\n') c = in.get();
    c = in.get();
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(char(c));
    c = in.get();
  }
  return tok;
}

struct PgmHeader {
  int width = 0, height = 0, maxval = 0;
};

PgmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  const std::string magic = next_token(in);
  if (magic != "P5") throw DataError("pgm: bad magic in " + path.string());
  PgmHeader h;
  try {
    h.width = std::stoi(next_token(in));
    h.height = std::stoi(next_token(in));
    h.maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw DataError("pgm: malformed header in " + path.string());
  }
  if (h.width < 1 || h.height < 1)
    throw DataError("pgm: malformed header in " + path.string());
  return h;
}

std::vector<char> read_payload(std::istream& in, size_t bytes,
                               const std::filesystem::path& path) {
  std::vector<char> buf(bytes);
  in.read(buf.data(), std::streamsize(bytes));
  if (size_t(in.gcount()) != bytes)
    throw DataError("pgm: truncated payload in " + path.string());
  return buf;
}

}  // namespace

void save_pgm(const Grid& g, const std::filesystem::path& path) {
  if ((g < 0.0).any() || (g > 1.0).any())
    throw std::invalid_argument("save_pgm: values outside [0,1]");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("pgm: cannot open for writing: " + path.string());
  out << "P5\n" << g.cols() << " " << g.rows() << "\n65535\n";
  std::vector<unsigned char> buf;
  buf.reserve(size_t(g.size()) * 2);
  for (int y = 0; y < g.rows(); ++y)
    for (int x = 0; x < g.cols(); ++x) {
      const auto w = std::uint16_t(std::lround(g(y, x) * 65535.0));
      buf.push_back((unsigned char)(w >> 8));  // big-endian per Netpbm
      buf.push_back((unsigned char)(w & 0xFF));
    }
  out.write((const char*)buf.data(), std::streamsize(buf.size()));
  if (!out) throw DataError("pgm: write failed: " + path.string());
}

Grid load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("pgm: cannot open: " + path.string());
  const PgmHeader h = read_header(in, path);
  if (h.maxval != 65535)
    throw DataError("pgm: unsupported maxval " + std::to_string(h.maxval) +
                    " in " + path.string() + " (expected 65535)");
  const auto buf = read_payload(in, size_t(h.width) * h.height * 2, path);
  Grid g(h.height, h.width);
  size_t i = 0;
  for (int y = 0; y < h.height; ++y)
    for (int x = 0; x < h.width; ++x, i += 2) {
      const unsigned hi = (unsigned char)buf[i];
      const unsigned lo = (unsigned char)buf[i + 1];
      g(y, x) = double((hi << 8) | lo) / 65535.0;
    }
  return g;
}

void save_mask_pgm(const Grid& mask, const std::filesystem::path& path) {
  if (!is_binary(mask))
    throw std::invalid_argument("save_mask_pgm: mask is not binary");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("pgm: cannot open for writing: " + path.string());
  out << "P5\n" << mask.cols() << " " << mask.rows() << "\n255\n";
  std::vector<unsigned char> buf;
  buf.reserve(size_t(mask.size()));
  for (int y = 0; y < mask.rows(); ++y)
    for (int x = 0; x < mask.cols(); ++x)
      buf.push_back(mask(y, x) != 0.0 ? 255 : 0);
  out.write((const char*)buf.data(), std::streamsize(buf.size()));
  if (!out) throw DataError("pgm: write failed: " + path.string());
}

Grid load_mask_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("pgm: cannot open: " + path.string());
  const PgmHeader h = read_header(in, path);
  if (h.maxval != 255)
    throw DataError("pgm: unsupported maxval " + std::to_string(h.maxval) +
                    " in " + path.string() + " (expected 255)");
  const auto buf = read_payload(in, size_t(h.width) * h.height, path);
  Grid m(h.height, h.width);
  size_t i = 0;
  for (int y = 0; y < h.height; ++y)
    for (int x = 0; x < h.width; ++x, ++i)
      m(y, x) = ((unsigned char)buf[i] >= 128) ? 1.0 : 0.0;
  return m;
}

}  // namespace spot
