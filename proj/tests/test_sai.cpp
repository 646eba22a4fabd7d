#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pipeforge/dataset.hpp"
#include "pipeforge/distortion.hpp"
#include "pipeforge/sai.hpp"

using namespace pipeforge;

TEST_CASE("extract_features: constant image closed forms") {
  Image img(8, 8, 1);
  std::fill(img.pixels.begin(), img.pixels.end(), 0.4);
  const AttributeFeatures f = extract_features(img);
  REQUIRE(f.size() == kFeatureCount);
  REQUIRE(f[0] == Catch::Approx(0.4));          // mean
  REQUIRE(f[1] == Catch::Approx(0.0).margin(1e-12));  // std
  REQUIRE(f[2] == Catch::Approx(0.4));          // min
  REQUIRE(f[3] == Catch::Approx(0.4));          // max
  REQUIRE(f[4] == Catch::Approx(0.0).margin(1e-12));  // laplacian variance
  REQUIRE(f[5] == Catch::Approx(0.0).margin(1e-12));  // hf energy
  // histogram: 0.4 falls in bin 2 of 6
  for (int b = 0; b < 6; ++b)
    REQUIRE(f[6 + b] == Catch::Approx(b == 2 ? 1.0 : 0.0));
}

TEST_CASE("extract_features: binary checkerboard closed forms") {
  Image img(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.at(y, x) = (x + y) % 2 ? 1.0 : 0.0;
  const AttributeFeatures f = extract_features(img);
  REQUIRE(f[0] == Catch::Approx(0.5));  // mean
  REQUIRE(f[5] == Catch::Approx(1.0));  // adjacent pixels always differ by 1
  REQUIRE(f[6 + 0] == Catch::Approx(0.5));
  REQUIRE(f[6 + 5] == Catch::Approx(0.5));
}

TEST_CASE("extract_features: noise strictly raises Laplacian-response variance") {
  Rng drng = make_rng(31, "ds");
  Dataset ds = gen_synthetic(100, 16, 4, drng);
  Rng nrng = make_rng(32, "noise");
  int higher = 0;
  for (const auto& li : ds.items) {
    const double clean_var = extract_features(li.image)[4];
    const Image noisy = add_gaussian_noise(li.image, 0.15, nrng);
    if (extract_features(noisy)[4] > clean_var) ++higher;
  }
  REQUIRE(higher == 100);
}

TEST_CASE("predict_attribute: zero-parameter model is uniform, class 0") {
  SaiModel model;
  Rng rng = make_rng(0, "sai");
  model.feature_net = make_dense({kFeatureCount, 3}, HiddenActivation::tanh,
                                 OutputActivation::softmax, rng);
  for (auto& w : model.feature_net.weights)
    std::fill(w.begin(), w.end(), 0.0);
  Image img(8, 8, 1);
  std::fill(img.pixels.begin(), img.pixels.end(), 0.3);
  const AttributePrediction pred = predict_attribute(model, img);
  REQUIRE(pred.predicted_class == 0);  // tie broken toward the lower index
  for (double p : pred.probabilities)
    REQUIRE(p == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("predict_attribute: deterministic for a fixed image") {
  Rng drng = make_rng(33, "ds");
  Dataset ds = gen_synthetic(120, 16, 4, drng);
  std::vector<SaiSample> samples;
  Rng rng = make_rng(34, "dist");
  for (const auto& li : ds.items) {
    for (int cls = 0; cls < 3; ++cls) {
      DistortionSpec spec{cls == 1 ? SequenceKind::none
                                   : SequenceKind::exposure_only,
                          static_cast<ExposureLevel>(cls), NoiseLevel::none};
      samples.push_back({distort(li.image, spec, rng), cls});
    }
  }
  SaiTrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 35;
  const SaiTrainResult r = train_sai(samples, Attribute::exposure, 3, cfg);
  const AttributePrediction a = predict_attribute(r.model, ds.items[0].image);
  const AttributePrediction b = predict_attribute(r.model, ds.items[0].image);
  REQUIRE(a.predicted_class == b.predicted_class);
  REQUIRE(a.probabilities == b.probabilities);
}

TEST_CASE("train_sai: missing class rejected") {
  Rng drng = make_rng(36, "ds");
  Dataset ds = gen_synthetic(10, 16, 4, drng);
  std::vector<SaiSample> samples;
  for (const auto& li : ds.items) samples.push_back({li.image, 0});
  SaiTrainConfig cfg;
  REQUIRE_THROWS_AS(train_sai(samples, Attribute::exposure, 3, cfg),
                    std::invalid_argument);
}

TEST_CASE("attribute tags map classes to the declared tags") {
  REQUIRE(exposure_tag(0) == Tag::under_exposed);
  REQUIRE(exposure_tag(1) == Tag::well_exposed);
  REQUIRE(exposure_tag(2) == Tag::over_exposed);
  REQUIRE_THROWS_AS(exposure_tag(3), std::invalid_argument);
  REQUIRE(noise_tag(0) == Tag::no_noise);
  REQUIRE(noise_tag(3) == Tag::high_noise);
  REQUIRE_THROWS_AS(noise_tag(4), std::invalid_argument);
}

TEST_CASE("build_mask: exposure stage masks by the exposure prediction") {
  OperatorRegistry reg = build_standard_registry();
  const auto candidates = reg.filter(TaskKind::exposure_correction);
  // prediction under (class 0): brighteners + identity true, darkeners false
  const EligibilityMask m = build_mask(TaskKind::exposure_correction,
                                       candidates, 0, 0);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const bool expect = candidates[i].is_identity ||
                        candidates[i].eligibility_tags.count(Tag::under_exposed);
    REQUIRE(m[i] == expect);
    if (candidates[i].id.rfind("darken", 0) == 0) REQUIRE_FALSE(m[i]);
    if (candidates[i].id.rfind("brighten", 0) == 0) REQUIRE(m[i]);
  }
}

TEST_CASE("build_mask: no_noise prediction leaves only identity") {
  OperatorRegistry reg = build_standard_registry();
  const auto candidates = reg.filter(TaskKind::denoising);
  const EligibilityMask m = build_mask(TaskKind::denoising, candidates, 0, 0);
  for (std::size_t i = 0; i < candidates.size(); ++i)
    REQUIRE(m[i] == candidates[i].is_identity);
}

TEST_CASE("build_mask: classification stages are unmasked") {
  OperatorRegistry reg = build_standard_registry();
  const auto candidates = reg.filter(TaskKind::exposure_correction);
  const EligibilityMask m =
      build_mask(TaskKind::classification, candidates, 2, 3);
  for (bool b : m) REQUIRE(b);
}

TEST_CASE("build_mask: all-true fallback when nothing matches") {
  OperatorDescriptor a;
  a.id = "a";
  a.task_kind = TaskKind::denoising;
  a.eligibility_tags = {Tag::low_noise};
  OperatorDescriptor b = a;
  b.id = "b";
  const EligibilityMask m =
      build_mask(TaskKind::denoising, {a, b}, 0, 3);  // prediction: high
  REQUIRE(m == EligibilityMask{true, true});
  REQUIRE_THROWS_AS(build_mask(TaskKind::denoising, {}, 0, 0),
                    std::invalid_argument);
}
