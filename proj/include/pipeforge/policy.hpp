#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeforge/image.hpp"
#include "pipeforge/nn.hpp"
#include "pipeforge/operators.hpp"
#include "pipeforge/rng.hpp"
#include "pipeforge/sai.hpp"

namespace pipeforge {

inline constexpr int kSummaryDim = 68;
inline constexpr int kEmbedDim = 32;
inline constexpr int kKeyDim = 16;

// One stage policy: shared embedding network over candidate outputs, key and
// query networks whose scaled dot products score the candidates.
struct PolicyParams {
  DenseNet embed_net;   // summary (68) -> embedding (32), shared
  DenseNet key_net;     // embedding -> key (16)
  DenseNet query_net;   // mean embedding -> query (16)
  TaskKind stage_task = TaskKind::classification;
};

inline PolicyParams init_policy(TaskKind stage_task, Rng& rng) {
  PolicyParams p;
  p.stage_task = stage_task;
  p.embed_net = make_dense({kSummaryDim, 64, kEmbedDim}, HiddenActivation::tanh,
                           OutputActivation::linear, rng);
  p.key_net = make_dense({kEmbedDim, kKeyDim}, HiddenActivation::tanh,
                         OutputActivation::linear, rng);
  p.query_net = make_dense({kEmbedDim, kKeyDim}, HiddenActivation::tanh,
                           OutputActivation::linear, rng);
  return p;
}

struct PolicyGrad {
  GradientBundle embed;
  GradientBundle key;
  GradientBundle query;
};

inline PolicyGrad zero_policy_grad(const PolicyParams& p) {
  return {zero_gradients(p.embed_net), zero_gradients(p.key_net),
          zero_gradients(p.query_net)};
}

// Maps any candidate output to a fixed 68-dim summary: 8x8 area-downsampled
// grayscale plus mean/std/min/max for images; the class-probability vector
// zero-padded for classifiers.
inline std::vector<double> make_image_summary(const Image& input) {
  const Image img = to_grayscale(input);
  std::vector<double> s;
  s.reserve(kSummaryDim);
  for (int by = 0; by < 8; ++by)
    for (int bx = 0; bx < 8; ++bx) {
      const int y0 = by * img.height / 8, y1 = (by + 1) * img.height / 8;
      const int x0 = bx * img.width / 8, x1 = (bx + 1) * img.width / 8;
      double acc = 0.0;
      int count = 0;
      for (int y = y0; y < std::max(y1, y0 + 1); ++y)
        for (int x = x0; x < std::max(x1, x0 + 1); ++x, ++count)
          acc += img.at(std::min(y, img.height - 1), std::min(x, img.width - 1));
      s.push_back(acc / count);
    }
  AttributeFeatures f = extract_features(input);
  s.push_back(f[0]);
  s.push_back(f[1]);
  s.push_back(f[2]);
  s.push_back(f[3]);
  return s;
}

inline std::vector<double> make_classifier_summary(
    const std::vector<double>& probs) {
  if (probs.size() > kSummaryDim)
    throw std::invalid_argument("classifier summary: too many classes");
  std::vector<double> s(kSummaryDim, 0.0);
  std::copy(probs.begin(), probs.end(), s.begin());
  return s;
}

struct CandidateEvaluation {
  std::vector<std::vector<double>> summaries;
  std::vector<ForwardCache> embed_caches;
  std::vector<std::vector<double>> embeddings;
  std::vector<bool> failed;
};

// Embeds precomputed summaries through the shared embedding network.
inline CandidateEvaluation embed_summaries(
    const PolicyParams& params, std::vector<std::vector<double>> summaries,
    std::vector<bool> failed = {}) {
  CandidateEvaluation eval;
  eval.summaries = std::move(summaries);
  eval.failed = failed.empty() ? std::vector<bool>(eval.summaries.size(), false)
                               : std::move(failed);
  for (const auto& s : eval.summaries) {
    eval.embed_caches.push_back(forward_cached(params.embed_net, s));
    eval.embeddings.push_back(eval.embed_caches.back().activations.back());
  }
  return eval;
}

// Runs every candidate on the input and embeds each output.  A failing
// operator is flagged (and later force-masked) rather than fatal.
inline CandidateEvaluation embed_candidates(
    const PolicyParams& params, const Image& img,
    const std::vector<OperatorDescriptor>& candidates) {
  if (candidates.empty())
    throw std::invalid_argument("embed_candidates: no candidates");
  std::vector<std::vector<double>> summaries;
  std::vector<bool> failed;
  for (const auto& op : candidates) {
    try {
      if (op.task_kind == TaskKind::classification)
        summaries.push_back(make_classifier_summary(classify(op, img)));
      else
        summaries.push_back(make_image_summary(op.image_fn(img)));
      failed.push_back(false);
    } catch (const std::exception&) {
      summaries.emplace_back(kSummaryDim, 0.0);
      failed.push_back(true);
    }
  }
  return embed_summaries(params, std::move(summaries), std::move(failed));
}

struct ScoreResult {
  std::vector<double> mean_embedding;
  ForwardCache query_cache;
  std::vector<ForwardCache> key_caches;
  std::vector<std::vector<double>> keys;
  std::vector<double> query;
  std::vector<double> scores;
};

// query = Q(mean of embeddings); key_i = K(e_i); score_i = k_i.q / sqrt(d_k).
inline ScoreResult score_candidates(const PolicyParams& params,
                                    const CandidateEvaluation& eval) {
  if (eval.embeddings.empty())
    throw std::invalid_argument("score_candidates: no embeddings");
  ScoreResult r;
  const std::size_t n = eval.embeddings.size();
  r.mean_embedding.assign(kEmbedDim, 0.0);
  for (const auto& e : eval.embeddings)
    for (int d = 0; d < kEmbedDim; ++d)
      r.mean_embedding[static_cast<std::size_t>(d)] += e[static_cast<std::size_t>(d)];
  for (double& v : r.mean_embedding) v /= static_cast<double>(n);
  r.query_cache = forward_cached(params.query_net, r.mean_embedding);
  r.query = r.query_cache.activations.back();
  const double scale = 1.0 / std::sqrt(static_cast<double>(kKeyDim));
  for (const auto& e : eval.embeddings) {
    r.key_caches.push_back(forward_cached(params.key_net, e));
    r.keys.push_back(r.key_caches.back().activations.back());
    double dot = 0.0;
    for (int d = 0; d < kKeyDim; ++d)
      dot += r.keys.back()[static_cast<std::size_t>(d)] *
             r.query[static_cast<std::size_t>(d)];
    r.scores.push_back(dot * scale);
  }
  return r;
}

// Backpropagates dL/d(score) through key, query and the shared embedding
// network (including the mean-pooling path into the query).
inline void score_backward(const PolicyParams& params,
                           const CandidateEvaluation& eval,
                           const ScoreResult& sr,
                           const std::vector<double>& d_scores,
                           PolicyGrad& grads) {
  const std::size_t n = eval.embeddings.size();
  const double scale = 1.0 / std::sqrt(static_cast<double>(kKeyDim));
  std::vector<double> d_query(kKeyDim, 0.0);
  std::vector<std::vector<double>> d_embed(n,
                                           std::vector<double>(kEmbedDim, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = d_scores[i] * scale;
    if (g != 0.0) {
      std::vector<double> d_key(kKeyDim);
      for (int d = 0; d < kKeyDim; ++d) {
        d_key[static_cast<std::size_t>(d)] = g * sr.query[static_cast<std::size_t>(d)];
        d_query[static_cast<std::size_t>(d)] +=
            g * sr.keys[i][static_cast<std::size_t>(d)];
      }
      d_embed[i] = backward_accumulate(params.key_net, sr.key_caches[i], d_key,
                                       grads.key);
    }
  }
  std::vector<double> d_mean = backward_accumulate(params.query_net,
                                                   sr.query_cache, d_query,
                                                   grads.query);
  for (std::size_t i = 0; i < n; ++i)
    for (int d = 0; d < kEmbedDim; ++d)
      d_embed[i][static_cast<std::size_t>(d)] +=
          d_mean[static_cast<std::size_t>(d)] / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    backward_accumulate(params.embed_net, eval.embed_caches[i], d_embed[i],
                        grads.embed);
}

inline std::vector<double> masked_scores(const ScoreResult& sr,
                                         const EligibilityMask& mask,
                                         const std::vector<bool>& failed) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> out = sr.scores;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!mask[i] || failed[i]) out[i] = -inf;
  return out;
}

enum class SelectMode { sample, greedy };

struct ActionDistribution {
  std::vector<double> probabilities;
  int sampled_index = 0;
  double log_prob = 0.0;
  EligibilityMask mask;
};

inline ActionDistribution select_action(
    const PolicyParams& params, const Image& img,
    const std::vector<OperatorDescriptor>& candidates,
    const EligibilityMask& mask, Rng& rng, SelectMode mode) {
  if (mask.size() != candidates.size())
    throw std::invalid_argument("select_action: mask/candidate size mismatch");
  CandidateEvaluation eval = embed_candidates(params, img, candidates);
  ScoreResult sr = score_candidates(params, eval);
  ActionDistribution dist;
  dist.mask = mask;
  dist.probabilities = softmax(masked_scores(sr, mask, eval.failed));
  dist.sampled_index = mode == SelectMode::sample
                           ? categorical_sample(dist.probabilities, rng)
                           : argmax_index(dist.probabilities);
  dist.log_prob = std::log(std::max(
      dist.probabilities[static_cast<std::size_t>(dist.sampled_index)], 1e-300));
  return dist;
}

struct LogProbGrad {
  double log_prob = 0.0;
  PolicyGrad grads;
};

// Log-probability of a fixed action plus its gradient, from precomputed
// summaries (the PPO update path re-uses cached summaries).
inline LogProbGrad log_prob_and_grad_from_summaries(
    const PolicyParams& params, const std::vector<std::vector<double>>& summaries,
    const EligibilityMask& mask, int action_index) {
  if (action_index < 0 || static_cast<std::size_t>(action_index) >= mask.size() ||
      !mask[static_cast<std::size_t>(action_index)])
    throw std::invalid_argument("log_prob_and_grad: action index masked");
  CandidateEvaluation eval = embed_summaries(params, summaries);
  ScoreResult sr = score_candidates(params, eval);
  const std::vector<double> probs =
      softmax(masked_scores(sr, mask, eval.failed));
  LogProbGrad out;
  out.log_prob = std::log(
      std::max(probs[static_cast<std::size_t>(action_index)], 1e-300));
  out.grads = zero_policy_grad(params);
  std::vector<double> d_scores(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i)
    d_scores[i] = (static_cast<int>(i) == action_index ? 1.0 : 0.0) - probs[i];
  score_backward(params, eval, sr, d_scores, out.grads);
  return out;
}

inline LogProbGrad log_prob_and_grad(
    const PolicyParams& params, const Image& img,
    const std::vector<OperatorDescriptor>& candidates,
    const EligibilityMask& mask, int action_index) {
  CandidateEvaluation eval = embed_candidates(params, img, candidates);
  std::vector<std::vector<double>> summaries = eval.summaries;
  return log_prob_and_grad_from_summaries(params, summaries, mask, action_index);
}

inline std::vector<double> flatten_policy(const PolicyParams& p) {
  std::vector<double> out = flatten_params(p.embed_net);
  std::vector<double> k = flatten_params(p.key_net);
  std::vector<double> q = flatten_params(p.query_net);
  out.insert(out.end(), k.begin(), k.end());
  out.insert(out.end(), q.begin(), q.end());
  return out;
}

inline void unflatten_policy(PolicyParams& p, const std::vector<double>& flat) {
  const std::size_t ne = flatten_params(p.embed_net).size();
  const std::size_t nk = flatten_params(p.key_net).size();
  const std::size_t nq = flatten_params(p.query_net).size();
  if (flat.size() != ne + nk + nq)
    throw std::invalid_argument("unflatten_policy: size mismatch");
  unflatten_params(p.embed_net, {flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(ne)});
  unflatten_params(p.key_net,
                   {flat.begin() + static_cast<std::ptrdiff_t>(ne),
                    flat.begin() + static_cast<std::ptrdiff_t>(ne + nk)});
  unflatten_params(p.query_net,
                   {flat.begin() + static_cast<std::ptrdiff_t>(ne + nk), flat.end()});
}

inline std::vector<double> flatten_policy_grad(const PolicyGrad& g) {
  std::vector<double> out = flatten_gradients(g.embed);
  std::vector<double> k = flatten_gradients(g.key);
  std::vector<double> q = flatten_gradients(g.query);
  out.insert(out.end(), k.begin(), k.end());
  out.insert(out.end(), q.begin(), q.end());
  return out;
}

}  // namespace pipeforge
