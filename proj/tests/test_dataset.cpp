#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>

#include "pipeforge/dataset.hpp"

using namespace pipeforge;

TEST_CASE("gen_synthetic: balanced labels, valid pixels, exact count") {
  Rng rng = make_rng(4, "synth");
  Dataset ds = gen_synthetic(100, 16, 4, rng);
  REQUIRE(ds.items.size() == 100);
  REQUIRE(ds.size == 16);
  REQUIRE(ds.class_count == 4);
  std::vector<int> counts(4, 0);
  for (const auto& li : ds.items) {
    ++counts[static_cast<std::size_t>(li.label)];
    REQUIRE(image_valid(li.image));
    for (double p : li.image.pixels) {
      REQUIRE(p >= 0.0);
      REQUIRE(p <= 1.0);
    }
  }
  for (int c : counts) REQUIRE(c == 25);
}

TEST_CASE("gen_synthetic: deterministic for a fixed seed") {
  Rng a = make_rng(9, "synth");
  Rng b = make_rng(9, "synth");
  Dataset d1 = gen_synthetic(40, 16, 4, a);
  Dataset d2 = gen_synthetic(40, 16, 4, b);
  for (std::size_t i = 0; i < d1.items.size(); ++i) {
    REQUIRE(d1.items[i].label == d2.items[i].label);
    REQUIRE(d1.items[i].image.pixels == d2.items[i].image.pixels);
  }
}

TEST_CASE("gen_synthetic: argument validation") {
  Rng rng = make_rng(0, "synth");
  REQUIRE_THROWS_AS(gen_synthetic(10, 4, 4, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(gen_synthetic(10, 16, 1, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(gen_synthetic(10, 16, 7, rng), std::invalid_argument);
  REQUIRE_THROWS_AS(gen_synthetic(0, 16, 4, rng), std::invalid_argument);
}

namespace {

std::filesystem::path write_cifar(const std::vector<unsigned char>& bytes,
                                  const char* name) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream os(path, std::ios::binary);
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  return path;
}

}  // namespace

TEST_CASE("cifar10 loader: two-record file reproduces every pixel exactly") {
  std::vector<unsigned char> bytes(2 * 3073);
  bytes[0] = 3;  // record 0 label
  for (std::size_t i = 1; i < 3073; ++i)
    bytes[i] = static_cast<unsigned char>((i * 7) % 256);
  bytes[3073] = 9;  // record 1 label
  for (std::size_t i = 1; i < 3073; ++i)
    bytes[3073 + i] = static_cast<unsigned char>((i * 13 + 5) % 256);
  const auto path = write_cifar(bytes, "pf_cifar_ok.bin");

  Dataset ds = load_cifar10_batch(path);
  REQUIRE(ds.items.size() == 2);
  REQUIRE(ds.size == 32);
  REQUIRE(ds.channels == 3);
  REQUIRE(ds.items[0].label == 3);
  REQUIRE(ds.items[1].label == 9);
  for (std::size_t r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
          const unsigned char byte = bytes[r * 3073 + 1 +
                                           static_cast<std::size_t>(c) * 1024 +
                                           static_cast<std::size_t>(y) * 32 +
                                           static_cast<std::size_t>(x)];
          REQUIRE(ds.items[r].image.at(y, x, c) == byte / 255.0);
        }
  std::filesystem::remove(path);
}

TEST_CASE("cifar10 loader: truncated file rejected") {
  std::vector<unsigned char> bytes(3072, 0);  // one byte short of a record
  const auto path = write_cifar(bytes, "pf_cifar_trunc.bin");
  REQUIRE_THROWS_AS(load_cifar10_batch(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("cifar10 loader: label byte out of range rejected") {
  std::vector<unsigned char> bytes(3073, 0);
  bytes[0] = 10;
  const auto path = write_cifar(bytes, "pf_cifar_label.bin");
  REQUIRE_THROWS_AS(load_cifar10_batch(path), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("cifar10 loader: missing file rejected") {
  REQUIRE_THROWS_AS(load_cifar10_batch("/nonexistent/cifar.bin"),
                    std::runtime_error);
}

TEST_CASE("dataset cache: bit-exact round trip") {
  Rng rng = make_rng(12, "cache");
  Dataset ds = gen_synthetic(30, 16, 3, rng);
  const auto path = std::filesystem::temp_directory_path() / "pf_cache.bin";
  save_dataset(ds, path);
  Dataset back = load_dataset(path);
  REQUIRE(back.size == ds.size);
  REQUIRE(back.class_count == ds.class_count);
  REQUIRE(back.channels == ds.channels);
  REQUIRE(back.items.size() == ds.items.size());
  for (std::size_t i = 0; i < ds.items.size(); ++i) {
    REQUIRE(back.items[i].label == ds.items[i].label);
    REQUIRE(back.items[i].image.pixels == ds.items[i].image.pixels);
  }
  std::filesystem::remove(path);
}

TEST_CASE("dataset cache: bad magic rejected") {
  const auto path = std::filesystem::temp_directory_path() / "pf_cache_bad.bin";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOT-A-DATASET\n";
  }
  REQUIRE_THROWS_AS(load_dataset(path), std::runtime_error);
  std::filesystem::remove(path);
}
