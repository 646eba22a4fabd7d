#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "pipeforge/operators.hpp"

using namespace pipeforge;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
  Rng rng = make_rng(seed, "img");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Image img(h, w, c);
  for (double& p : img.pixels) p = uni(rng);
  return img;
}

}  // namespace

TEST_CASE("apply_gamma closed forms") {
  Image img(2, 2, 1);
  img.pixels = {0.25, 0.5, 1.0, 0.0};
  const Image same = apply_gamma(img, 1.0);
  REQUIRE(same.pixels == img.pixels);

  const Image sq = apply_gamma(img, 2.0);
  REQUIRE(sq.at(0, 0) == Catch::Approx(0.0625));
  REQUIRE(sq.at(0, 1) == Catch::Approx(0.25));
  REQUIRE(sq.at(1, 0) == Catch::Approx(1.0));
  REQUIRE(sq.at(1, 1) == Catch::Approx(0.0));

  const Image rt = apply_gamma(img, 0.5);
  REQUIRE(rt.at(0, 0) == Catch::Approx(0.5));

  REQUIRE_THROWS_AS(apply_gamma(img, 0.05), std::invalid_argument);
  REQUIRE_THROWS_AS(apply_gamma(img, 11.0), std::invalid_argument);
}

TEST_CASE("add_gaussian_noise: sigma 0 is the identity and draws nothing") {
  const Image img = random_image(8, 8, 1, 1);
  Rng rng = make_rng(2, "noise");
  const auto before = rng;
  const Image out = add_gaussian_noise(img, 0.0, rng);
  REQUIRE(out.pixels == img.pixels);
  REQUIRE(rng == before);
}

TEST_CASE("add_gaussian_noise: output stays in [0,1], spread tracks sigma") {
  Image img(32, 32, 1);
  std::fill(img.pixels.begin(), img.pixels.end(), 0.5);
  Rng rng = make_rng(3, "noise");
  const Image out = add_gaussian_noise(img, 0.1, rng);
  double mean = 0.0;
  for (double p : out.pixels) {
    REQUIRE(p >= 0.0);
    REQUIRE(p <= 1.0);
    mean += p;
  }
  mean /= static_cast<double>(out.pixels.size());
  double var = 0.0;
  for (double p : out.pixels) var += (p - mean) * (p - mean);
  var /= static_cast<double>(out.pixels.size());
  // no clamping active at 0.5 +/- small noise: sd should be near 0.1
  REQUIRE(std::sqrt(var) == Catch::Approx(0.1).margin(0.01));
  REQUIRE_THROWS_AS(add_gaussian_noise(img, 0.6, rng), std::invalid_argument);
}

TEST_CASE("gaussian_blur: constant image unchanged (kernel sums to 1)") {
  Image img(6, 7, 3);
  std::fill(img.pixels.begin(), img.pixels.end(), 0.37);
  const Image out = gaussian_blur(img, 1.3);
  for (double p : out.pixels) REQUIRE(p == Catch::Approx(0.37).margin(1e-9));
}

TEST_CASE("gaussian_blur: impulse response is the outer product of 1-D kernels") {
  const double sigma = 0.8;
  // tabulate the normalized 1-D kernel directly
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] =
        std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= sum;

  const int n = 15, c = n / 2;
  Image img(n, n, 1);
  img.at(c, c) = 1.0;
  const Image out = gaussian_blur(img, sigma);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double expect =
          (std::abs(y - c) <= radius && std::abs(x - c) <= radius)
              ? k[static_cast<std::size_t>(y - c + radius)] *
                    k[static_cast<std::size_t>(x - c + radius)]
              : 0.0;
      REQUIRE(out.at(y, x) == Catch::Approx(expect).margin(1e-12));
    }
}

TEST_CASE("gaussian_blur: linearity within 1e-7") {
  const Image a = random_image(10, 10, 1, 5);
  const Image b = random_image(10, 10, 1, 6);
  const double ca = 0.3, cb = 0.45;  // keeps the combination inside [0,1]
  Image combo = a;
  for (std::size_t i = 0; i < combo.pixels.size(); ++i)
    combo.pixels[i] = ca * a.pixels[i] + cb * b.pixels[i];
  const Image lhs = gaussian_blur(combo, 1.1);
  const Image ba = gaussian_blur(a, 1.1);
  const Image bb = gaussian_blur(b, 1.1);
  for (std::size_t i = 0; i < lhs.pixels.size(); ++i)
    REQUIRE(std::abs(lhs.pixels[i] - (ca * ba.pixels[i] + cb * bb.pixels[i])) <
            1e-7);
}

TEST_CASE("median_filter: single outlier in a zeros image is removed") {
  Image img(5, 5, 1);
  img.at(2, 2) = 1.0;
  const Image out = median_filter(img, 3);
  for (double p : out.pixels) REQUIRE(p == 0.0);
  REQUIRE_THROWS_AS(median_filter(img, 4), std::invalid_argument);
}

TEST_CASE("median_filter: matches a brute-force sort oracle bit-exactly") {
  for (int window : {3, 5}) {
    const int radius = window / 2;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Image img = random_image(8, 8, 1, 1000 + seed);
      const Image out = median_filter(img, window);
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          std::vector<double> nb;
          for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx)
              nb.push_back(img.at(reflect_index(y + dy, 8),
                                  reflect_index(x + dx, 8)));
          std::sort(nb.begin(), nb.end());
          REQUIRE(out.at(y, x) == nb[nb.size() / 2]);
        }
    }
  }
}

TEST_CASE("mean_filter3: interior pixel is the 3x3 average") {
  const Image img = random_image(5, 5, 1, 77);
  const Image out = mean_filter3(img);
  double acc = 0.0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) acc += img.at(2 + dy, 2 + dx);
  REQUIRE(out.at(2, 2) == Catch::Approx(acc / 9.0).epsilon(1e-12));
}

TEST_CASE("histogram_stretch: maps per-channel min to 0 and max to 1") {
  Image img(2, 2, 1);
  img.pixels = {0.2, 0.4, 0.6, 0.5};
  const Image out = histogram_stretch(img);
  REQUIRE(out.at(0, 0) == Catch::Approx(0.0));
  REQUIRE(out.at(1, 0) == Catch::Approx(1.0));
  REQUIRE(out.at(0, 1) == Catch::Approx(0.5));

  Image flat(3, 3, 1);
  std::fill(flat.pixels.begin(), flat.pixels.end(), 0.4);
  const Image same = histogram_stretch(flat);
  REQUIRE(same.pixels == flat.pixels);
}

TEST_CASE("registry: duplicate ids rejected, provenance filters work") {
  OperatorRegistry reg = build_standard_registry();
  REQUIRE_THROWS_AS(
      reg.register_operator(detail::identity_op("identity_denoise",
                                                TaskKind::denoising)),
      std::invalid_argument);

  const auto training = reg.filter(TaskKind::exposure_correction,
                                   Provenance::training_pool);
  for (const auto& op : training)
    REQUIRE(op.provenance == Provenance::training_pool);
  REQUIRE(reg.contains("brighten_0.45"));
  bool found = false;
  for (const auto& op : training)
    if (op.id == "brighten_0.45") found = true;
  REQUIRE_FALSE(found);  // unseen-pool operator filtered out

  // the 4-operator unseen pool
  int unseen = 0;
  for (const auto& op : reg.all())
    if (op.provenance == Provenance::unseen_pool) ++unseen;
  REQUIRE(unseen == 4);
}

TEST_CASE("registry: eligibility queries match pool construction") {
  OperatorRegistry reg = build_standard_registry();

  SECTION("under_exposed -> exactly the brighteners plus identity") {
    const auto ops = reg.query_eligible(TaskKind::exposure_correction,
                                        Tag::under_exposed);
    std::set<std::string> ids;
    for (const auto& op : ops) ids.insert(op.id);
    REQUIRE(ids == std::set<std::string>{"brighten_0.40", "brighten_0.45",
                                         "brighten_0.50", "brighten_0.55",
                                         "identity_exposure"});
  }

  SECTION("no_noise -> exactly identity") {
    const auto ops = reg.query_eligible(TaskKind::denoising, Tag::no_noise);
    REQUIRE(ops.size() == 1);
    REQUIRE(ops[0].id == "identity_denoise");
  }

  SECTION("identity carries every tag") {
    const auto& id_op = reg.by_id("identity_exposure");
    for (Tag t : {Tag::under_exposed, Tag::well_exposed, Tag::over_exposed,
                  Tag::no_noise, Tag::low_noise, Tag::mid_noise, Tag::high_noise})
      REQUIRE(id_op.eligibility_tags.count(t) == 1);
  }
}

TEST_CASE("classifier operator: zero-parameter net gives a uniform posterior") {
  Rng rng = make_rng(0, "cls");
  DenseNet net = make_dense({16, 4}, HiddenActivation::tanh,
                            OutputActivation::softmax, rng);
  for (auto& w : net.weights) std::fill(w.begin(), w.end(), 0.0);
  OperatorDescriptor op = make_classifier_op("cls_test", std::move(net));
  const Image img = random_image(4, 4, 1, 9);
  const std::vector<double> probs = op.classify_fn(img);
  REQUIRE(probs.size() == 4);
  for (double p : probs) REQUIRE(p == Catch::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("manifest round-trips the image-operator pool") {
  OperatorRegistry reg = build_standard_registry();
  const auto dir = std::filesystem::temp_directory_path() / "pf_manifest_test";
  std::filesystem::create_directories(dir);
  save_manifest(reg, dir / "pool.manifest");
  OperatorRegistry back = load_manifest(dir / "pool.manifest");
  REQUIRE(back.all().size() == reg.all().size());
  for (const auto& op : reg.all()) {
    const auto& b = back.by_id(op.id);
    REQUIRE(b.task_kind == op.task_kind);
    REQUIRE(b.eligibility_tags == op.eligibility_tags);
    REQUIRE(b.provenance == op.provenance);
    REQUIRE(b.param == op.param);
    REQUIRE(b.is_identity == op.is_identity);
  }
  // behavior survives the round trip
  const Image img = random_image(6, 6, 1, 21);
  const Image a = reg.by_id("blur_1.0").image_fn(img);
  const Image b = back.by_id("blur_1.0").image_fn(img);
  REQUIRE(a.pixels == b.pixels);
  std::filesystem::remove_all(dir);
}
