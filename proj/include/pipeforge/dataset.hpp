#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeforge/image.hpp"
#include "pipeforge/rng.hpp"

namespace pipeforge {

struct LabeledImage {
  Image image;
  int label = 0;
};

struct Dataset {
  int size = 0;         // square edge length
  int class_count = 0;
  int channels = 1;
  std::vector<LabeledImage> items;
};

inline constexpr const char* kDatasetMagic = "PIPEFORGE-DS-v1";

// ---------------------------------------------------------------------------
// Synthetic shape dataset
// ---------------------------------------------------------------------------
//
// One smooth pattern family per class, jittered in phase/scale, base
// intensity in [0.35, 0.65], fixed contrast so exposure distortions stay
// identifiable from intensity statistics.

namespace detail {

constexpr double kPatternAmp = 0.12;
constexpr double kRampAmp = 0.08;

inline Image synth_pattern(int family, int size, double base, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Image img(size, size, 1);
  const double a = kPatternAmp;
  const double freq = 0.24 + 0.08 * uni(rng);
  const double phase_x = uni(rng);
  const double phase_y = uni(rng);
  const double cx = size / 2.0 + (uni(rng) - 0.5) * 4.0;
  const double cy = size / 2.0 + (uni(rng) - 0.5) * 4.0;
  const double r0 = (0.25 + 0.10 * uni(rng)) * size;
  const double two_pi = 2.0 * 3.14159265358979323846;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double v = base;
      switch (family) {
        case 0:  // horizontal stripes
          v += a * std::sin(two_pi * (freq * y + phase_y));
          break;
        case 1:  // vertical stripes
          v += a * std::sin(two_pi * (freq * x + phase_x));
          break;
        case 2:  // checkerboard
          v += a * std::sin(two_pi * (freq * x + phase_x)) *
               std::sin(two_pi * (freq * y + phase_y));
          break;
        case 3: {  // soft disk
          const double d = std::hypot(x - cx, y - cy);
          v += a * std::tanh((r0 - d) / 1.5);
          break;
        }
        case 4:  // diagonal gradient
          v += a * (static_cast<double>(x + y) / (2.0 * (size - 1)) * 2.0 - 1.0);
          break;
        case 5: {  // ring
          const double d = std::hypot(x - cx, y - cy);
          v += -a + 2.0 * a * std::exp(-(d - r0) * (d - r0) / (2.0 * 2.25));
          break;
        }
        default:
          throw std::invalid_argument("synth_pattern: bad family");
      }
      // mild global ramp keeps the intensity distribution continuous
      v += kRampAmp * (static_cast<double>(x + y) / (2.0 * (size - 1)) * 2.0 - 1.0);
      img.at(y, x) = clamp01(v);
    }
  return img;
}

}  // namespace detail

inline Dataset gen_synthetic(int count, int size, int class_count, Rng& rng) {
  if (size < 8) throw std::invalid_argument("gen_synthetic: size must be >= 8");
  if (class_count < 2 || class_count > 6)
    throw std::invalid_argument("gen_synthetic: class_count must be in 2..6");
  if (count <= 0) throw std::invalid_argument("gen_synthetic: count must be > 0");
  Dataset ds;
  ds.size = size;
  ds.class_count = class_count;
  ds.channels = 1;
  std::uniform_real_distribution<double> base_dist(0.35, 0.65);
  for (int i = 0; i < count; ++i) {
    const int label = i % class_count;
    const double base = base_dist(rng);
    ds.items.push_back({detail::synth_pattern(label, size, base, rng), label});
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary ingestion
// ---------------------------------------------------------------------------
//
// Consecutive 3073-byte records: label byte then 1024-byte R, G, B planes,
// 32x32 row-major, scaled to [0,1] by /255.

inline Dataset load_cifar10_batch(const std::filesystem::path& path) {
  constexpr std::size_t kRecord = 3073;
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  if (bytes.empty() || bytes.size() % kRecord != 0)
    throw std::runtime_error("cifar10: file size " + std::to_string(bytes.size()) +
                             " is not a multiple of 3073");
  Dataset ds;
  ds.size = 32;
  ds.class_count = 10;
  ds.channels = 3;
  const std::size_t records = bytes.size() / kRecord;
  for (std::size_t r = 0; r < records; ++r) {
    const unsigned char* rec =
        reinterpret_cast<const unsigned char*>(bytes.data()) + r * kRecord;
    if (rec[0] > 9)
      throw std::runtime_error("cifar10: label byte out of range in record " +
                               std::to_string(r));
    LabeledImage li;
    li.label = rec[0];
    li.image = Image(32, 32, 3);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x)
          li.image.at(y, x, c) =
              rec[1 + c * 1024 + y * 32 + x] / 255.0;
    ds.items.push_back(std::move(li));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Dataset cache file
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::uint64_t u = 0;
  std::memcpy(&u, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i)
    buf[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  is.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!is) throw std::runtime_error("dataset cache: truncated");
  std::uint64_t u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    u |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  T v{};
  std::memcpy(&v, &u, sizeof(T));
  return v;
}

}  // namespace detail

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << kDatasetMagic << "\n";
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.items.size()));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.size));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.class_count));
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(ds.channels));
    for (const auto& li : ds.items) {
      os.put(static_cast<char>(li.label));
      for (double p : li.image.pixels) detail::write_le<double>(os, p);
    }
  }
  std::filesystem::rename(tmp, path);
}

inline Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::string magic;
  std::getline(is, magic);
  if (magic != kDatasetMagic)
    throw std::runtime_error("dataset cache: bad magic header");
  Dataset ds;
  const auto count = detail::read_le<std::uint32_t>(is);
  ds.size = static_cast<int>(detail::read_le<std::uint32_t>(is));
  ds.class_count = static_cast<int>(detail::read_le<std::uint32_t>(is));
  ds.channels = static_cast<int>(detail::read_le<std::uint32_t>(is));
  for (std::uint32_t r = 0; r < count; ++r) {
    LabeledImage li;
    li.label = static_cast<unsigned char>(is.get());
    li.image = Image(ds.size, ds.size, ds.channels);
    for (double& p : li.image.pixels) p = detail::read_le<double>(is);
    ds.items.push_back(std::move(li));
  }
  return ds;
}

}  // namespace pipeforge
