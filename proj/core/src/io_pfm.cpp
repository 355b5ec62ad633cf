// Copyright Contributors to the rdg Project
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

#include "rdg/errors.hpp"
#include "rdg/io.hpp"

namespace rdg {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  return *reinterpret_cast<const std::uint8_t*>(&probe) == 1;
}

void swap_floats(std::vector<float>& v) {
  for (float& f : v) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    bits = ((bits & 0xff000000u) >> 24) | ((bits & 0x00ff0000u) >> 8) |
           ((bits & 0x0000ff00u) << 8) | ((bits & 0x000000ffu) << 24);
    std::memcpy(&f, &bits, 4);
  }
}

}  // namespace

void write_pfm(const std::string& path, const DepthMap& d) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path);
  std::fprintf(f.get(), "Pf\n%d %d\n-1.0\n", d.width(), d.height());

  const int h = d.height(), w = d.width();
  std::vector<float> row(static_cast<size_t>(w));
  for (int y = h - 1; y >= 0; --y) {  // bottom-up
    for (int x = 0; x < w; ++x) row[x] = static_cast<float>(d.at(y, x));
    if (!host_is_little_endian()) swap_floats(row);
    if (std::fwrite(row.data(), 4, row.size(), f.get()) != row.size())
      throw IoError("short write: " + path);
  }
}

DepthMap read_pfm(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open for reading: " + path);

  char magic[3] = {0, 0, 0};
  if (std::fscanf(f.get(), "%2s", magic) != 1 || std::strcmp(magic, "Pf") != 0)
    throw IoError("not a grayscale PFM (magic 'Pf' expected): " + path);
  int w = 0, h = 0;
  double scale = 0.0;
  if (std::fscanf(f.get(), "%d %d %lf", &w, &h, &scale) != 3 || w <= 0 || h <= 0)
    throw IoError("malformed PFM header: " + path);
  if (std::fgetc(f.get()) != '\n') throw IoError("malformed PFM header: " + path);

  const bool file_little = scale < 0.0;
  std::vector<float> row(static_cast<size_t>(w));
  DepthMap d(h, w);
  for (int y = h - 1; y >= 0; --y) {
    if (std::fread(row.data(), 4, row.size(), f.get()) != row.size())
      throw IoError("truncated PFM payload: " + path);
    if (file_little != host_is_little_endian()) swap_floats(row);
    for (int x = 0; x < w; ++x) d.at(y, x) = row[x];
  }
  return d;
}

std::string read_text_file(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw IoError("cannot open for reading: " + path);
  std::fseek(f.get(), 0, SEEK_END);
  const long size = std::ftell(f.get());
  std::fseek(f.get(), 0, SEEK_SET);
  std::string text(static_cast<size_t>(size), '\0');
  if (size > 0 && std::fread(text.data(), 1, text.size(), f.get()) != text.size())
    throw IoError("short read: " + path);
  return text;
}

void write_text_file(const std::string& path, const std::string& text) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw IoError("cannot open for writing: " + path);
  if (!text.empty() && std::fwrite(text.data(), 1, text.size(), f.get()) != text.size())
    throw IoError("short write: " + path);
}

}  // namespace rdg
