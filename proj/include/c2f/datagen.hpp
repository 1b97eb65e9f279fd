#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "c2f/io/png.hpp"

namespace c2f::datagen {

struct SynthConfig {
  std::size_t image_size = 64;  // multiple of 32
  double contrast_delta = 0.15; // (0, 1]
  double texture_scale = 16.0;  // first-octave lattice cell, in pixels
  double coverage_min = 0.15;
  double coverage_max = 0.35;
  std::uint64_t seed = 1;
  std::size_t count = 8;

  // Throws InvalidSpecError naming the offending field.
  void validate() const;
};

struct Sample {
  std::string id;
  io::Image8 image;  // RGB
  io::Image8 mask;   // gray, {0, 255}
  std::uint64_t seed = 0;
};

// splitmix64 finaliser.
std::uint64_t mix64(std::uint64_t x);
// Stateless hash of a seed and a sequence of words.
std::uint64_t hash_words(std::uint64_t seed, std::initializer_list<std::uint64_t> words);

// Sum of `octaves` bilinear value-noise layers (persistence 0.5), in [0, 1).
std::vector<double> value_noise(std::uint64_t key, std::size_t size, double cell,
                                std::size_t octaves);

std::string sample_id(std::size_t index, std::size_t count);
// Throws DataError naming the index when the coverage range cannot be hit.
Sample generate_sample(const SynthConfig& cfg, std::size_t index);
double mask_coverage(const io::Image8& mask);

struct ManifestRow {
  std::string id;
  std::string image;  // relative to the manifest directory
  std::string mask;
  std::uint64_t seed = 0;

  bool operator==(const ManifestRow&) const = default;
};

struct Manifest {
  std::filesystem::path root;  // directory holding manifest.tsv
  std::vector<ManifestRow> rows;

  std::filesystem::path image_path(const ManifestRow& row) const { return root / row.image; }
  std::filesystem::path mask_path(const ManifestRow& row) const { return root / row.mask; }
};

// Header `id\timage\tmask\tseed`, LF line endings.
std::string format_manifest(const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> parse_manifest(const std::string& text);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

// images/<id>.png, masks/<id>.png, manifest.tsv. Returns the manifest path.
std::filesystem::path write_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace c2f::datagen
