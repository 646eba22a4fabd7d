#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pipeforge/dataset.hpp"
#include "pipeforge/image.hpp"
#include "pipeforge/nn.hpp"
#include "pipeforge/operators.hpp"
#include "pipeforge/rng.hpp"

namespace pipeforge {

enum class SequenceKind {
  exposure_then_noise,
  noise_then_exposure,
  exposure_only,
  noise_only,
  none
};
enum class ExposureLevel { under, well, over };
enum class NoiseLevel { none, low, mid, high };

inline std::string sequence_name(SequenceKind k) {
  switch (k) {
    case SequenceKind::exposure_then_noise: return "exposure_then_noise";
    case SequenceKind::noise_then_exposure: return "noise_then_exposure";
    case SequenceKind::exposure_only: return "exposure_only";
    case SequenceKind::noise_only: return "noise_only";
    case SequenceKind::none: return "none";
  }
  return "?";
}

inline std::string exposure_name(ExposureLevel e) {
  switch (e) {
    case ExposureLevel::under: return "under";
    case ExposureLevel::well: return "well";
    case ExposureLevel::over: return "over";
  }
  return "?";
}

inline std::string noise_name(NoiseLevel n) {
  switch (n) {
    case NoiseLevel::none: return "none";
    case NoiseLevel::low: return "low";
    case NoiseLevel::mid: return "mid";
    case NoiseLevel::high: return "high";
  }
  return "?";
}

struct DistortionSpec {
  SequenceKind sequence_kind = SequenceKind::none;
  ExposureLevel exposure_level = ExposureLevel::well;
  NoiseLevel noise_level = NoiseLevel::none;

  bool valid() const {
    if (sequence_kind == SequenceKind::exposure_only &&
        noise_level != NoiseLevel::none)
      return false;
    if (sequence_kind == SequenceKind::noise_only &&
        exposure_level != ExposureLevel::well)
      return false;
    if (sequence_kind == SequenceKind::none &&
        (noise_level != NoiseLevel::none || exposure_level != ExposureLevel::well))
      return false;
    return true;
  }

  std::string key() const {
    return "seq=" + sequence_name(sequence_kind) +
           ";exp=" + exposure_name(exposure_level) +
           ";noise=" + noise_name(noise_level);
  }
};

// Distortion magnitudes: gamma per exposure level, sigma per noise level.
inline double exposure_gamma(ExposureLevel e) {
  switch (e) {
    case ExposureLevel::under: return 2.2;
    case ExposureLevel::well: return 1.0;
    case ExposureLevel::over: return 0.45;
  }
  return 1.0;
}

inline double noise_sigma(NoiseLevel n) {
  switch (n) {
    case NoiseLevel::none: return 0.0;
    case NoiseLevel::low: return 0.05;
    case NoiseLevel::mid: return 0.15;
    case NoiseLevel::high: return 0.30;
  }
  return 0.0;
}

// Distortion curriculum: explicit weighted atoms over valid specs.
struct Curriculum {
  std::vector<std::pair<DistortionSpec, double>> atoms;

  void validate() const {
    if (atoms.empty()) throw std::invalid_argument("curriculum: empty");
    double sum = 0.0;
    for (const auto& [spec, p] : atoms) {
      if (!spec.valid()) throw std::invalid_argument("curriculum: invalid spec");
      if (p < 0.0) throw std::invalid_argument("curriculum: negative weight");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::invalid_argument("curriculum: weights must sum to 1");
  }
};

// Default mix: the doubly-distorted sequences carry most of the weight
// (they are the interesting regime), single-distortion sequences a smaller
// share, plus a few clean episodes.  Exposure is under/over 50:50.  Noise
// levels are skewed toward mid/high: sigma 0.05 is nearly benign and
// over-sampling it would just pad every method's accuracy with free
// episodes.
inline Curriculum default_curriculum(double none_weight = 0.10) {
  Curriculum c;
  const double scale = (1.0 - none_weight) / 0.9;
  const double pair_w = 0.30 * scale;    // each exposure+noise sequence
  const double single_w = 0.15 * scale;  // each single-distortion sequence
  const std::pair<NoiseLevel, double> noise_mix[] = {
      {NoiseLevel::low, 0.15}, {NoiseLevel::mid, 0.45}, {NoiseLevel::high, 0.40}};
  for (SequenceKind seq : {SequenceKind::exposure_then_noise,
                           SequenceKind::noise_then_exposure}) {
    for (ExposureLevel e : {ExposureLevel::under, ExposureLevel::over})
      for (const auto& [n, w] : noise_mix)
        c.atoms.push_back({{seq, e, n}, pair_w * w / 2.0});
  }
  for (ExposureLevel e : {ExposureLevel::under, ExposureLevel::over})
    c.atoms.push_back(
        {{SequenceKind::exposure_only, e, NoiseLevel::none}, single_w / 2.0});
  for (const auto& [n, w] : noise_mix)
    c.atoms.push_back(
        {{SequenceKind::noise_only, ExposureLevel::well, n}, single_w * w});
  if (none_weight > 0.0)
    c.atoms.push_back(
        {{SequenceKind::none, ExposureLevel::well, NoiseLevel::none}, none_weight});
  return c;
}

inline DistortionSpec sample_distortion(Rng& rng, const Curriculum& curriculum) {
  curriculum.validate();
  std::vector<double> probs;
  probs.reserve(curriculum.atoms.size());
  for (const auto& [spec, p] : curriculum.atoms) probs.push_back(p);
  return curriculum.atoms[static_cast<std::size_t>(categorical_sample(probs, rng))]
      .first;
}

inline Image distort(const Image& img, const DistortionSpec& spec, Rng& rng) {
  if (!spec.valid()) throw std::invalid_argument("distort: invalid spec");
  auto expose = [&](const Image& in) {
    return spec.exposure_level == ExposureLevel::well
               ? in
               : apply_gamma(in, exposure_gamma(spec.exposure_level));
  };
  auto noise = [&](const Image& in) {
    return add_gaussian_noise(in, noise_sigma(spec.noise_level), rng);
  };
  switch (spec.sequence_kind) {
    case SequenceKind::exposure_then_noise: return noise(expose(img));
    case SequenceKind::noise_then_exposure: return expose(noise(img));
    case SequenceKind::exposure_only: return expose(img);
    case SequenceKind::noise_only: return noise(img);
    case SequenceKind::none: return img;
  }
  return img;
}

// Fixed high-level restoration order per distortion sequence (restoration
// undoes distortions in reverse), then classification.
inline std::vector<TaskKind> stage_plan_for(const DistortionSpec& spec) {
  switch (spec.sequence_kind) {
    case SequenceKind::exposure_then_noise:
      return {TaskKind::denoising, TaskKind::exposure_correction,
              TaskKind::classification};
    case SequenceKind::noise_then_exposure:
      return {TaskKind::exposure_correction, TaskKind::denoising,
              TaskKind::classification};
    case SequenceKind::exposure_only:
      return {TaskKind::exposure_correction, TaskKind::classification};
    case SequenceKind::noise_only:
      return {TaskKind::denoising, TaskKind::classification};
    case SequenceKind::none:
      return {TaskKind::classification};
  }
  return {TaskKind::classification};
}

struct EpisodeSpec {
  Image distorted;
  Image clean;
  int label = 0;
  DistortionSpec spec;
  std::vector<TaskKind> stage_plan;
};

inline EpisodeSpec make_episode(const LabeledImage& sample,
                                const DistortionSpec& spec, Rng& rng) {
  EpisodeSpec ep;
  ep.clean = sample.image;
  ep.label = sample.label;
  ep.spec = spec;
  ep.distorted = distort(sample.image, spec, rng);
  ep.stage_plan = stage_plan_for(spec);
  return ep;
}

}  // namespace pipeforge
