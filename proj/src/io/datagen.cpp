#include "c2f/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "c2f/errors.hpp"
#include "c2f/parallel.hpp"

namespace c2f::datagen {
namespace {

// Stream tags keep the per-sample draws independent.
enum Tag : std::uint64_t { kTexture = 1, kBlob = 2, kCentre = 3, kCoverage = 4 };

double unit(std::uint64_t h) { return static_cast<double>(h >> 11) * 0x1.0p-53; }

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp<long>(std::lround(v * 255.0), 0, 255));
}

}  // namespace

void SynthConfig::validate() const {
  if (image_size == 0 || image_size % 32 != 0) {
    throw InvalidSpecError("image_size must be a positive multiple of 32, got " +
                           std::to_string(image_size));
  }
  if (!(contrast_delta > 0.0 && contrast_delta <= 1.0)) {
    throw InvalidSpecError("contrast_delta must lie in (0, 1]");
  }
  if (!(texture_scale > 0.0)) throw InvalidSpecError("texture_scale must be positive");
  if (!(coverage_min > 0.0 && coverage_min <= coverage_max && coverage_max < 1.0)) {
    throw InvalidSpecError("coverage range must satisfy 0 < min <= max < 1");
  }
  if (count == 0) throw InvalidSpecError("count must be positive");
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_words(std::uint64_t seed, std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t w : words) h = mix64(h ^ mix64(w));
  return h;
}

std::vector<double> value_noise(std::uint64_t key, std::size_t size, double cell,
                                std::size_t octaves) {
  std::vector<double> out(size * size, 0.0);
  double amplitude = 1.0, total = 0.0;
  for (std::size_t o = 0; o < octaves; ++o) {
    const double c = std::max(cell / static_cast<double>(1u << o), 1.0);
    for (std::size_t y = 0; y < size; ++y) {
      const double fy = static_cast<double>(y) / c;
      const auto iy = static_cast<std::uint64_t>(fy);
      const double ty = fy - static_cast<double>(iy);
      for (std::size_t x = 0; x < size; ++x) {
        const double fx = static_cast<double>(x) / c;
        const auto ix = static_cast<std::uint64_t>(fx);
        const double tx = fx - static_cast<double>(ix);
        const double v00 = unit(hash_words(key, {o, ix, iy}));
        const double v10 = unit(hash_words(key, {o, ix + 1, iy}));
        const double v01 = unit(hash_words(key, {o, ix, iy + 1}));
        const double v11 = unit(hash_words(key, {o, ix + 1, iy + 1}));
        const double top = v00 + (v10 - v00) * tx;
        const double bottom = v01 + (v11 - v01) * tx;
        out[y * size + x] += amplitude * (top + (bottom - top) * ty);
      }
    }
    total += amplitude;
    amplitude *= 0.5;
  }
  for (double& v : out) v /= total;
  return out;
}

std::string sample_id(std::size_t index, std::size_t count) {
  const std::size_t width = std::max<std::size_t>(4, std::to_string(count - 1).size());
  std::string s = std::to_string(index);
  return std::string(width - std::min(width, s.size()), '0') + s;
}

double mask_coverage(const io::Image8& mask) {
  std::size_t fg = 0;
  for (auto v : mask.pixels) fg += v != 0;
  return static_cast<double>(fg) / static_cast<double>(mask.pixels.size());
}

Sample generate_sample(const SynthConfig& cfg, std::size_t index) {
  cfg.validate();
  const std::size_t n = cfg.image_size;
  const std::size_t pixels = n * n;
  Sample s;
  s.id = sample_id(index, cfg.count);
  s.seed = hash_words(cfg.seed, {index});

  // Blob: coarse noise plus a radial bump around a random centre.
  const std::vector<double> blob = value_noise(hash_words(s.seed, {kBlob}), n, n / 2.0, 2);
  const double cx = (0.3 + 0.4 * unit(hash_words(s.seed, {kCentre, 0}))) * n;
  const double cy = (0.3 + 0.4 * unit(hash_words(s.seed, {kCentre, 1}))) * n;
  std::vector<double> field(pixels);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      const double r = std::hypot(x + 0.5 - cx, y + 0.5 - cy) / static_cast<double>(n);
      field[y * n + x] = 0.5 * blob[y * n + x] + 0.5 * (1.0 - std::min(1.0, r / 0.7));
    }

  const double target = cfg.coverage_min +
                        (cfg.coverage_max - cfg.coverage_min) *
                            unit(hash_words(s.seed, {kCoverage}));
  auto coverage_at = [&](double t) {
    std::size_t fg = 0;
    for (double v : field) fg += v > t;
    return static_cast<double>(fg) / static_cast<double>(pixels);
  };
  double lo = *std::min_element(field.begin(), field.end());
  double hi = *std::max_element(field.begin(), field.end());
  double threshold = 0.0;
  bool found = false;
  for (int it = 0; it < 32 && !found; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double c = coverage_at(mid);
    if (c >= cfg.coverage_min && c <= cfg.coverage_max) {
      threshold = mid;
      found = true;
    } else if (c > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (!found) {
    throw DataError("sample " + std::to_string(index) + ": coverage range [" +
                    std::to_string(cfg.coverage_min) + ", " + std::to_string(cfg.coverage_max) +
                    "] unattainable after 32 bisection steps");
  }

  s.mask = io::Image8(n, n, 1);
  for (std::size_t i = 0; i < pixels; ++i) s.mask.pixels[i] = field[i] > threshold ? 255 : 0;

  // Same texture inside and outside; the object is shifted by delta, and both
  // regions are scaled by (1 - delta) so their variances match.
  s.image = io::Image8(n, n, 3);
  const double delta = cfg.contrast_delta;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> tex =
        value_noise(hash_words(s.seed, {kTexture, c}), n, cfg.texture_scale, 4);
    // Stretch to the full [0, 1] range; octave averaging compresses it.
    const auto [lo_it, hi_it] = std::minmax_element(tex.begin(), tex.end());
    const double t0 = *lo_it, span = std::max(*hi_it - *lo_it, 1e-12);
    for (std::size_t i = 0; i < pixels; ++i) {
      const double m = s.mask.pixels[i] ? 1.0 : 0.0;
      const double t = (tex[i] - t0) / span;
      s.image.pixels[i * 3 + c] = to_byte(t * (1.0 - delta) + delta * m);
    }
  }
  return s;
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
  std::string out = "id\timage\tmask\tseed\n";
  for (const auto& r : rows) {
    out += r.id + '\t' + r.image + '\t' + r.mask + '\t' + std::to_string(r.seed) + '\n';
  }
  return out;
}

std::vector<ManifestRow> parse_manifest(const std::string& text) {
  std::vector<ManifestRow> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  auto fail = [&](const std::string& why) {
    throw DataError("manifest line " + std::to_string(number) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++number;
    if (number == 1) {
      if (line != "id\timage\tmask\tseed") fail("expected header id\\timage\\tmask\\tseed");
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) fail("expected 4 tab-separated fields");
    ManifestRow row{fields[0], fields[1], fields[2], 0};
    if (row.id.empty() || row.image.empty() || row.mask.empty()) fail("empty field");
    const auto& seed = fields[3];
    const auto [ptr, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), row.seed);
    if (ec != std::errc() || ptr != seed.data() + seed.size()) fail("bad seed '" + seed + "'");
    rows.push_back(std::move(row));
  }
  if (number == 0) throw DataError("manifest is empty");
  return rows;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return Manifest{path.parent_path(), parse_manifest(buf.str())};
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  const std::string text = format_manifest(rows);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::filesystem::path write_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
  cfg.validate();
  std::error_code ec;
  for (const char* sub : {"images", "masks"}) {
    std::filesystem::create_directories(out_dir / sub, ec);
    if (ec) throw IoError("cannot create " + (out_dir / sub).string() + ": " + ec.message());
  }
  std::vector<Sample> samples(cfg.count);
  parallel_for(cfg.count, [&](std::size_t i) { samples[i] = generate_sample(cfg, i); });

  std::vector<ManifestRow> rows;
  for (const auto& s : samples) {
    ManifestRow row{s.id, "images/" + s.id + ".png", "masks/" + s.id + ".png", s.seed};
    io::write_png(out_dir / row.image, s.image);
    io::write_png(out_dir / row.mask, s.mask);
    rows.push_back(std::move(row));
  }
  const auto manifest = out_dir / "manifest.tsv";
  write_manifest(manifest, rows);
  return manifest;
}

}  // namespace c2f::datagen
