#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeforge/image.hpp"
#include "pipeforge/nn.hpp"
#include "pipeforge/operators.hpp"
#include "pipeforge/rng.hpp"

namespace pipeforge {

enum class Attribute { exposure, noise };

// 12 hand-picked statistics: mean, std, min, max, Laplacian-response
// variance, high-frequency energy, 6-bin normalized histogram.
using AttributeFeatures = std::vector<double>;
inline constexpr int kFeatureCount = 12;

inline AttributeFeatures extract_features(const Image& input) {
  const Image img = to_grayscale(input);
  const std::size_t n = img.pixels.size();
  double mean = 0.0, mn = 1.0, mx = 0.0;
  for (double p : img.pixels) {
    mean += p;
    mn = std::min(mn, p);
    mx = std::max(mx, p);
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double p : img.pixels) var += (p - mean) * (p - mean);
  var /= static_cast<double>(n);
  // 3x3 discrete Laplacian, reflect padding
  double lap_mean = 0.0;
  std::vector<double> lap(n);
  std::size_t idx = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x, ++idx) {
      const double r = img.at(reflect_index(y - 1, img.height), x) +
                       img.at(reflect_index(y + 1, img.height), x) +
                       img.at(y, reflect_index(x - 1, img.width)) +
                       img.at(y, reflect_index(x + 1, img.width)) -
                       4.0 * img.at(y, x);
      lap[idx] = r;
      lap_mean += r;
    }
  lap_mean /= static_cast<double>(n);
  double lap_var = 0.0;
  for (double r : lap) lap_var += (r - lap_mean) * (r - lap_mean);
  lap_var /= static_cast<double>(n);
  // mean squared difference of horizontally adjacent pixels
  double hf = 0.0;
  std::size_t hf_count = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x + 1 < img.width; ++x, ++hf_count) {
      const double d = img.at(y, x + 1) - img.at(y, x);
      hf += d * d;
    }
  if (hf_count > 0) hf /= static_cast<double>(hf_count);
  AttributeFeatures f(kFeatureCount, 0.0);
  f[0] = mean;
  f[1] = std::sqrt(var);
  f[2] = mn;
  f[3] = mx;
  f[4] = lap_var;
  f[5] = hf;
  for (double p : img.pixels) {
    int bin = std::min(5, static_cast<int>(p * 6.0));
    f[6 + static_cast<std::size_t>(bin)] += 1.0 / static_cast<double>(n);
  }
  return f;
}

// Supervised attribute classifier with stored feature standardization.
struct SaiModel {
  DenseNet feature_net;
  Attribute attribute = Attribute::exposure;
  int class_count = 3;
  std::vector<double> feature_mean = std::vector<double>(kFeatureCount, 0.0);
  std::vector<double> feature_std = std::vector<double>(kFeatureCount, 1.0);
};

struct SaiTrainConfig {
  std::vector<int> hidden = {32, 32};
  int epochs = 60;
  int batch_size = 64;
  double learning_rate = 3e-3;
  double validation_fraction = 0.2;
  int patience = 10;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
};

struct SaiSample {
  Image image;
  int attribute_class = 0;
};

struct SaiTrainResult {
  SaiModel model;
  double validation_accuracy = 0.0;
};

inline std::vector<double> sai_input(const SaiModel& model, const Image& img) {
  AttributeFeatures f = extract_features(img);
  std::vector<double> x(kFeatureCount);
  for (int i = 0; i < kFeatureCount; ++i)
    x[static_cast<std::size_t>(i)] =
        (f[static_cast<std::size_t>(i)] - model.feature_mean[static_cast<std::size_t>(i)]) /
        model.feature_std[static_cast<std::size_t>(i)];
  return x;
}

struct AttributePrediction {
  int predicted_class = 0;
  std::vector<double> probabilities;
};

inline AttributePrediction predict_attribute(const SaiModel& model,
                                             const Image& img) {
  AttributePrediction pred;
  pred.probabilities = forward(model.feature_net, sai_input(model, img));
  // ties break toward the lower index (argmax keeps the first maximum)
  pred.predicted_class = argmax_index(pred.probabilities);
  return pred;
}

inline SaiTrainResult train_sai(const std::vector<SaiSample>& dataset,
                                Attribute attribute, int class_count,
                                const SaiTrainConfig& config) {
  std::set<int> seen;
  for (const auto& s : dataset) seen.insert(s.attribute_class);
  for (int c = 0; c < class_count; ++c)
    if (!seen.count(c))
      throw std::invalid_argument("train_sai: class " + std::to_string(c) +
                                  " missing from training data");
  Rng rng = make_rng(config.seed, "sai-train");
  // deterministic shuffle then split
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t val_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(config.validation_fraction *
                                  static_cast<double>(dataset.size())));
  const std::size_t train_count = dataset.size() - val_count;

  std::vector<std::vector<double>> features(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i)
    features[i] = extract_features(dataset[i].image);

  SaiTrainResult result;
  SaiModel& model = result.model;
  model.attribute = attribute;
  model.class_count = class_count;
  for (int i = 0; i < kFeatureCount; ++i) {
    double m = 0.0;
    for (std::size_t t = 0; t < train_count; ++t)
      m += features[order[t]][static_cast<std::size_t>(i)];
    m /= static_cast<double>(train_count);
    double v = 0.0;
    for (std::size_t t = 0; t < train_count; ++t) {
      const double d = features[order[t]][static_cast<std::size_t>(i)] - m;
      v += d * d;
    }
    v /= static_cast<double>(train_count);
    model.feature_mean[static_cast<std::size_t>(i)] = m;
    model.feature_std[static_cast<std::size_t>(i)] = std::max(std::sqrt(v), 1e-8);
  }
  auto standardized = [&](std::size_t i) {
    std::vector<double> x(kFeatureCount);
    for (int k = 0; k < kFeatureCount; ++k)
      x[static_cast<std::size_t>(k)] =
          (features[i][static_cast<std::size_t>(k)] -
           model.feature_mean[static_cast<std::size_t>(k)]) /
          model.feature_std[static_cast<std::size_t>(k)];
    return x;
  };

  std::vector<int> sizes = {kFeatureCount};
  for (int h : config.hidden) sizes.push_back(h);
  sizes.push_back(class_count);
  model.feature_net = make_dense(sizes, HiddenActivation::tanh,
                                 OutputActivation::softmax, rng);
  AdamState adam = make_adam(model.feature_net, config.learning_rate);

  DenseNet best_net = model.feature_net;
  double best_val = -1.0;
  int stale = 0;
  std::vector<std::size_t> train_idx(order.begin(),
                                     order.begin() + static_cast<std::ptrdiff_t>(train_count));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    for (std::size_t start = 0; start < train_count;
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(train_count, start + static_cast<std::size_t>(config.batch_size));
      GradientBundle grads = zero_gradients(model.feature_net);
      for (std::size_t t = start; t < end; ++t) {
        const std::size_t i = train_idx[t];
        ForwardCache cache = forward_cached(model.feature_net, standardized(i));
        const std::vector<double>& p = cache.activations.back();
        std::vector<double> dlogp(p.size(), 0.0);
        // dCE/dprob with the softmax jacobian applied downstream
        dlogp[static_cast<std::size_t>(dataset[i].attribute_class)] =
            -1.0 / std::max(p[static_cast<std::size_t>(dataset[i].attribute_class)], 1e-12);
        backward_accumulate(model.feature_net, cache, dlogp, grads);
      }
      scale_gradients(grads, 1.0 / static_cast<double>(end - start));
      adam_step(model.feature_net, grads, adam);
    }
    std::size_t correct = 0;
    for (std::size_t t = train_count; t < dataset.size(); ++t) {
      const std::size_t i = order[t];
      const std::vector<double> p = forward(model.feature_net, standardized(i));
      if (argmax_index(p) == dataset[i].attribute_class) ++correct;
    }
    const double val_acc = static_cast<double>(correct) / static_cast<double>(val_count);
    if (val_acc > best_val) {
      best_val = val_acc;
      best_net = model.feature_net;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  model.feature_net = best_net;
  result.validation_accuracy = best_val;
  return result;
}

// ---------------------------------------------------------------------------
// Eligibility masking
// ---------------------------------------------------------------------------

using EligibilityMask = std::vector<bool>;

inline Tag exposure_tag(int exposure_class) {
  switch (exposure_class) {
    case 0: return Tag::under_exposed;
    case 1: return Tag::well_exposed;
    case 2: return Tag::over_exposed;
  }
  throw std::invalid_argument("exposure_tag: class out of range");
}

inline Tag noise_tag(int noise_class) {
  switch (noise_class) {
    case 0: return Tag::no_noise;
    case 1: return Tag::low_noise;
    case 2: return Tag::mid_noise;
    case 3: return Tag::high_noise;
  }
  throw std::invalid_argument("noise_tag: class out of range");
}

// True where the candidate's tags contain the attribute tag relevant to the
// stage; identity operators always pass; all-true fallback when nothing
// matches so the policy is never starved.
inline EligibilityMask build_mask(TaskKind stage_task,
                                  const std::vector<OperatorDescriptor>& candidates,
                                  int exposure_pred, int noise_pred) {
  if (candidates.empty())
    throw std::invalid_argument("build_mask: empty candidate list");
  EligibilityMask mask(candidates.size(), false);
  if (stage_task == TaskKind::exposure_correction ||
      stage_task == TaskKind::denoising) {
    const Tag tag = stage_task == TaskKind::exposure_correction
                        ? exposure_tag(exposure_pred)
                        : noise_tag(noise_pred);
    for (std::size_t i = 0; i < candidates.size(); ++i)
      mask[i] = candidates[i].is_identity ||
                candidates[i].eligibility_tags.count(tag) > 0;
  } else {
    mask.assign(candidates.size(), true);
  }
  if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; }))
    mask.assign(candidates.size(), true);
  return mask;
}

}  // namespace pipeforge
