#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeforge/rng.hpp"

namespace pipeforge {

enum class HiddenActivation { tanh, relu };
enum class OutputActivation { linear, softmax };

// Dense feed-forward network with explicit parameters.  weights[k] is
// row-major (layer_sizes[k+1] x layer_sizes[k]).
struct DenseNet {
  std::vector<int> layer_sizes;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  HiddenActivation hidden_activation = HiddenActivation::tanh;
  OutputActivation output_activation = OutputActivation::linear;

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }
};

// Gradients shape-matched to a DenseNet.
struct GradientBundle {
  std::vector<std::vector<double>> d_weights;
  std::vector<std::vector<double>> d_biases;
};

struct AdamState {
  long step_count = 0;
  std::vector<std::vector<double>> m_weights, v_weights;
  std::vector<std::vector<double>> m_biases, v_biases;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline DenseNet make_dense(std::vector<int> layer_sizes,
                           HiddenActivation hidden, OutputActivation out,
                           Rng& rng) {
  if (layer_sizes.size() < 2)
    throw std::invalid_argument("DenseNet needs at least input and output");
  DenseNet net;
  net.layer_sizes = std::move(layer_sizes);
  net.hidden_activation = hidden;
  net.output_activation = out;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k + 1 < net.layer_sizes.size(); ++k) {
    const int fan_in = net.layer_sizes[k];
    const int fan_out = net.layer_sizes[k + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> w(static_cast<std::size_t>(fan_out) * fan_in);
    for (double& v : w) v = normal(rng) * scale;
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(fan_out, 0.0);
  }
  return net;
}

inline GradientBundle zero_gradients(const DenseNet& net) {
  GradientBundle g;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    g.d_weights.emplace_back(net.weights[k].size(), 0.0);
    g.d_biases.emplace_back(net.biases[k].size(), 0.0);
  }
  return g;
}

inline AdamState make_adam(const DenseNet& net, double learning_rate = 3e-4) {
  AdamState s;
  s.learning_rate = learning_rate;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    s.m_weights.emplace_back(net.weights[k].size(), 0.0);
    s.v_weights.emplace_back(net.weights[k].size(), 0.0);
    s.m_biases.emplace_back(net.biases[k].size(), 0.0);
    s.v_biases.emplace_back(net.biases[k].size(), 0.0);
  }
  return s;
}

// Numerically stable softmax.  -inf entries map to exactly 0; all -inf is
// an error (empty candidate set).
inline std::vector<double> softmax(const std::vector<double>& scores) {
  const double inf = std::numeric_limits<double>::infinity();
  double max_score = -inf;
  for (double s : scores) max_score = std::max(max_score, s);
  if (max_score == -inf)
    throw std::invalid_argument("softmax: all scores are -inf");
  std::vector<double> out(scores.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out[i] = (scores[i] == -inf) ? 0.0 : std::exp(scores[i] - max_score);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

inline double cross_entropy(const std::vector<double>& probs, int label) {
  if (label < 0 || static_cast<std::size_t>(label) >= probs.size())
    throw std::out_of_range("cross_entropy: label out of range");
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-12));
}

inline int categorical_sample(const std::vector<double>& probs, Rng& rng) {
  double sum = std::accumulate(probs.begin(), probs.end(), 0.0);
  if (probs.empty() || std::abs(sum - 1.0) > 1e-6)
    throw std::invalid_argument("categorical_sample: not a probability vector");
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u = uni(rng) * sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

inline int argmax_index(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

// Activations per layer, kept for the backward pass.  activations[0] is the
// input; activations[k+1] is the post-activation output of layer k.
struct ForwardCache {
  std::vector<std::vector<double>> pre_activations;
  std::vector<std::vector<double>> activations;
};

namespace detail {

inline double act(double x, HiddenActivation a) {
  return a == HiddenActivation::tanh ? std::tanh(x) : std::max(0.0, x);
}
inline double act_grad(double pre, double post, HiddenActivation a) {
  return a == HiddenActivation::tanh ? 1.0 - post * post
                                     : (pre > 0.0 ? 1.0 : 0.0);
}

}  // namespace detail

inline ForwardCache forward_cached(const DenseNet& net,
                                   const std::vector<double>& input) {
  if (static_cast<int>(input.size()) != net.input_size())
    throw std::invalid_argument("forward: input size mismatch");
  ForwardCache cache;
  cache.activations.push_back(input);
  std::vector<double> cur = input;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const int rows = net.layer_sizes[k + 1];
    const int cols = net.layer_sizes[k];
    std::vector<double> pre(static_cast<std::size_t>(rows));
    const double* w = net.weights[k].data();
    for (int r = 0; r < rows; ++r) {
      double acc = net.biases[k][static_cast<std::size_t>(r)];
      const double* wr = w + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += wr[c] * cur[static_cast<std::size_t>(c)];
      pre[static_cast<std::size_t>(r)] = acc;
    }
    std::vector<double> post(pre);
    const bool last = (k + 1 == net.layer_count());
    if (!last) {
      for (std::size_t i = 0; i < post.size(); ++i)
        post[i] = detail::act(pre[i], net.hidden_activation);
    } else if (net.output_activation == OutputActivation::softmax) {
      post = softmax(pre);
    }
    cache.pre_activations.push_back(std::move(pre));
    cur = post;
    cache.activations.push_back(std::move(post));
  }
  return cache;
}

inline std::vector<double> forward(const DenseNet& net,
                                   const std::vector<double>& input) {
  return forward_cached(net, input).activations.back();
}

// Backpropagates dL/d(output) through the network.  Returns parameter
// gradients via `grads` (accumulated, not overwritten) and dL/d(input).
inline std::vector<double> backward_accumulate(
    const DenseNet& net, const ForwardCache& cache,
    const std::vector<double>& output_grad, GradientBundle& grads) {
  if (static_cast<int>(output_grad.size()) != net.output_size())
    throw std::invalid_argument("backward: output grad size mismatch");
  std::vector<double> delta;  // dL/d(pre-activation) of the current layer
  // Output layer activation jacobian.
  if (net.output_activation == OutputActivation::softmax) {
    const std::vector<double>& p = cache.activations.back();
    double dot = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * output_grad[i];
    delta.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i)
      delta[i] = p[i] * (output_grad[i] - dot);
  } else {
    delta = output_grad;
  }
  for (std::size_t k = net.layer_count(); k-- > 0;) {
    const int rows = net.layer_sizes[k + 1];
    const int cols = net.layer_sizes[k];
    const std::vector<double>& below = cache.activations[k];
    double* dw = grads.d_weights[k].data();
    for (int r = 0; r < rows; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      grads.d_biases[k][static_cast<std::size_t>(r)] += d;
      double* dwr = dw + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) dwr[c] += d * below[static_cast<std::size_t>(c)];
    }
    std::vector<double> prev(static_cast<std::size_t>(cols), 0.0);
    const double* w = net.weights[k].data();
    for (int r = 0; r < rows; ++r) {
      const double d = delta[static_cast<std::size_t>(r)];
      const double* wr = w + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) prev[static_cast<std::size_t>(c)] += d * wr[c];
    }
    if (k > 0) {
      for (int c = 0; c < cols; ++c) {
        prev[static_cast<std::size_t>(c)] *= detail::act_grad(
            cache.pre_activations[k - 1][static_cast<std::size_t>(c)],
            cache.activations[k][static_cast<std::size_t>(c)],
            net.hidden_activation);
      }
    }
    delta = std::move(prev);
  }
  return delta;
}

inline GradientBundle backward(const DenseNet& net, const ForwardCache& cache,
                               const std::vector<double>& output_grad) {
  GradientBundle g = zero_gradients(net);
  backward_accumulate(net, cache, output_grad, g);
  return g;
}

inline void accumulate(GradientBundle& into, const GradientBundle& from,
                       double scale = 1.0) {
  for (std::size_t k = 0; k < into.d_weights.size(); ++k) {
    for (std::size_t i = 0; i < into.d_weights[k].size(); ++i)
      into.d_weights[k][i] += scale * from.d_weights[k][i];
    for (std::size_t i = 0; i < into.d_biases[k].size(); ++i)
      into.d_biases[k][i] += scale * from.d_biases[k][i];
  }
}

inline void scale_gradients(GradientBundle& g, double s) {
  for (auto& layer : g.d_weights)
    for (double& v : layer) v *= s;
  for (auto& layer : g.d_biases)
    for (double& v : layer) v *= s;
}

namespace detail {

inline void adam_update(std::vector<double>& param, const std::vector<double>& g,
                        std::vector<double>& m, std::vector<double>& v,
                        const AdamState& s, double bc1, double bc2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    param[i] -= s.learning_rate * mhat / (std::sqrt(vhat) + s.epsilon);
  }
}

}  // namespace detail

inline void adam_step(DenseNet& net, const GradientBundle& grads,
                      AdamState& state) {
  for (const auto& layer : grads.d_weights)
    for (double v : layer)
      if (!std::isfinite(v))
        throw std::runtime_error("adam_step: non-finite gradient");
  for (const auto& layer : grads.d_biases)
    for (double v : layer)
      if (!std::isfinite(v))
        throw std::runtime_error("adam_step: non-finite gradient");
  state.step_count += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    detail::adam_update(net.weights[k], grads.d_weights[k], state.m_weights[k],
                        state.v_weights[k], state, bc1, bc2);
    detail::adam_update(net.biases[k], grads.d_biases[k], state.m_biases[k],
                        state.v_biases[k], state, bc1, bc2);
  }
}

// Flat parameter views, used by finite-difference checks and checksums.
inline std::vector<double> flatten_params(const DenseNet& net) {
  std::vector<double> out;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    out.insert(out.end(), net.weights[k].begin(), net.weights[k].end());
    out.insert(out.end(), net.biases[k].begin(), net.biases[k].end());
  }
  return out;
}

inline void unflatten_params(DenseNet& net, const std::vector<double>& flat) {
  std::size_t pos = 0;
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                net.weights[k].size(), net.weights[k].begin());
    pos += net.weights[k].size();
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                net.biases[k].size(), net.biases[k].begin());
    pos += net.biases[k].size();
  }
}

inline std::vector<double> flatten_gradients(const GradientBundle& g) {
  std::vector<double> out;
  for (std::size_t k = 0; k < g.d_weights.size(); ++k) {
    out.insert(out.end(), g.d_weights[k].begin(), g.d_weights[k].end());
    out.insert(out.end(), g.d_biases[k].begin(), g.d_biases[k].end());
  }
  return out;
}

}  // namespace pipeforge
