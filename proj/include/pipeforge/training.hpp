#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeforge/dataset.hpp"
#include "pipeforge/distortion.hpp"
#include "pipeforge/nn.hpp"
#include "pipeforge/operators.hpp"
#include "pipeforge/sai.hpp"

namespace pipeforge {

// ---------------------------------------------------------------------------
// Classifier pre-training (the frozen classification TSM operators)
// ---------------------------------------------------------------------------

enum class AugmentKind { clean, noise, exposure };

struct ClassifierTrainConfig {
  std::vector<int> hidden = {64};
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 3e-3;
  double validation_fraction = 0.2;
  int patience = 8;
  int augment_copies = 2;  // augmented copies per training sample
  std::uint64_t seed = 0;
};

struct ClassifierTrainResult {
  DenseNet net;
  double validation_accuracy = 0.0;  // on the (augmented) validation split
  double clean_accuracy = 0.0;       // on the clean validation images
};

namespace detail {

// Specialist training inputs: every sample is distorted, so the resulting
// classifier is strong on its distortion regime and noticeably weaker on
// clean inputs than the clean-trained one — selection between them matters.
inline Image augment_image(const Image& img, AugmentKind kind, Rng& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (kind == AugmentKind::noise) {
    Image out = add_gaussian_noise(img, uni(rng) < 0.5 ? 0.15 : 0.30, rng);
    // occasional post-blur mimics a denoised pipeline input
    const double r = uni(rng);
    if (r < 0.25) out = gaussian_blur(out, 0.5);
    else if (r < 0.5) out = gaussian_blur(out, 1.0);
    return out;
  }
  if (kind == AugmentKind::exposure) {
    return apply_gamma(img, uni(rng) < 0.5 ? 2.2 : 0.45);
  }
  return img;
}

}  // namespace detail

inline ClassifierTrainResult train_classifier(const Dataset& dataset,
                                              AugmentKind augment,
                                              const ClassifierTrainConfig& config) {
  Rng rng = make_rng(config.seed, "classifier-train");
  std::vector<std::size_t> order(dataset.items.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t val_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(config.validation_fraction *
                                  static_cast<double>(order.size())));
  const std::size_t train_count = order.size() - val_count;

  struct Sample {
    std::vector<double> pixels;
    int label;
  };
  std::vector<Sample> train, val;
  std::vector<Sample> val_clean;
  const int copies = augment == AugmentKind::clean ? 1 : config.augment_copies;
  for (std::size_t t = 0; t < order.size(); ++t) {
    const LabeledImage& li = dataset.items[order[t]];
    const bool is_val = t >= train_count;
    if (is_val) val_clean.push_back({li.image.pixels, li.label});
    for (int c = 0; c < copies; ++c) {
      Image img = (augment == AugmentKind::clean && c == 0)
                      ? li.image
                      : detail::augment_image(li.image, augment, rng);
      (is_val ? val : train).push_back({std::move(img.pixels), li.label});
    }
  }

  std::vector<int> sizes = {dataset.size * dataset.size * dataset.channels};
  for (int h : config.hidden) sizes.push_back(h);
  sizes.push_back(dataset.class_count);
  DenseNet net = make_dense(sizes, HiddenActivation::tanh,
                            OutputActivation::softmax, rng);
  AdamState adam = make_adam(net, config.learning_rate);

  auto accuracy_on = [&](const std::vector<Sample>& set, const DenseNet& n) {
    std::size_t correct = 0;
    for (const auto& s : set)
      if (argmax_index(forward(n, s.pixels)) == s.label) ++correct;
    return set.empty() ? 0.0
                       : static_cast<double>(correct) / static_cast<double>(set.size());
  };

  DenseNet best_net = net;
  double best_val = -1.0;
  int stale = 0;
  std::vector<std::size_t> idx(train.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t start = 0; start < idx.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(idx.size(), start + static_cast<std::size_t>(config.batch_size));
      GradientBundle grads = zero_gradients(net);
      for (std::size_t t = start; t < end; ++t) {
        const Sample& s = train[idx[t]];
        ForwardCache cache = forward_cached(net, s.pixels);
        const std::vector<double>& p = cache.activations.back();
        std::vector<double> dlogp(p.size(), 0.0);
        dlogp[static_cast<std::size_t>(s.label)] =
            -1.0 / std::max(p[static_cast<std::size_t>(s.label)], 1e-12);
        backward_accumulate(net, cache, dlogp, grads);
      }
      scale_gradients(grads, 1.0 / static_cast<double>(end - start));
      adam_step(net, grads, adam);
    }
    const double val_acc = accuracy_on(val, net);
    if (val_acc > best_val) {
      best_val = val_acc;
      best_net = net;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  ClassifierTrainResult result;
  result.net = std::move(best_net);
  result.validation_accuracy = best_val;
  result.clean_accuracy = accuracy_on(val_clean, result.net);
  return result;
}

// ---------------------------------------------------------------------------
// SAI dataset construction
// ---------------------------------------------------------------------------

// Draws distorted images labeled by one attribute.  Exposure classes are
// balanced for the exposure SAI, noise classes for the noise SAI; the
// nuisance attribute is sampled lightly so the identifier learns to ignore
// it (weights favor the regimes the SAI actually sees during rollouts).
inline std::vector<SaiSample> make_attribute_dataset(const Dataset& dataset,
                                                     Attribute attribute,
                                                     int samples_per_class,
                                                     std::uint64_t seed) {
  Rng rng = make_rng(seed, attribute == Attribute::exposure ? "sai-exposure"
                                                            : "sai-noise");
  std::uniform_int_distribution<std::size_t> pick(0, dataset.items.size() - 1);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<SaiSample> out;
  auto pick_sequence = [&](ExposureLevel e, NoiseLevel n) {
    if (e != ExposureLevel::well && n != NoiseLevel::none)
      return uni(rng) < 0.5 ? SequenceKind::exposure_then_noise
                            : SequenceKind::noise_then_exposure;
    if (e != ExposureLevel::well) return SequenceKind::exposure_only;
    if (n != NoiseLevel::none) return SequenceKind::noise_only;
    return SequenceKind::none;
  };
  if (attribute == Attribute::exposure) {
    for (int cls = 0; cls < 3; ++cls) {
      const ExposureLevel e = static_cast<ExposureLevel>(cls);
      for (int i = 0; i < samples_per_class; ++i) {
        const double r = uni(rng);
        const NoiseLevel n = r < 0.40   ? NoiseLevel::none
                             : r < 0.70 ? NoiseLevel::low
                             : r < 0.90 ? NoiseLevel::mid
                                        : NoiseLevel::high;
        DistortionSpec spec{pick_sequence(e, n), e, n};
        out.push_back(
            {distort(dataset.items[pick(rng)].image, spec, rng), cls});
      }
    }
  } else {
    for (int cls = 0; cls < 4; ++cls) {
      const NoiseLevel n = static_cast<NoiseLevel>(cls);
      for (int i = 0; i < samples_per_class; ++i) {
        const double r = uni(rng);
        const ExposureLevel e = r < 0.50   ? ExposureLevel::well
                                : r < 0.75 ? ExposureLevel::under
                                           : ExposureLevel::over;
        DistortionSpec spec{pick_sequence(e, n), e, n};
        out.push_back(
            {distort(dataset.items[pick(rng)].image, spec, rng), cls});
      }
    }
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

}  // namespace pipeforge
