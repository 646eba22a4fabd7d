#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeforge/distortion.hpp"
#include "pipeforge/policy.hpp"
#include "pipeforge/sai.hpp"

namespace pipeforge {

struct Transition {
  int stage_index = 0;
  TaskKind stage_task = TaskKind::classification;
  std::vector<std::vector<double>> summaries;  // cached candidate summaries
  std::vector<std::string> candidate_ids;
  EligibilityMask mask;
  int action_index = 0;
  double old_log_prob = 0.0;
};

struct Trajectory {
  std::vector<Transition> transitions;
  double terminal_reward = 0.0;  // 1 iff the chosen classifier was correct
  DistortionSpec spec;
};

struct BaselineTracker {
  double running_mean = 0.0;
  double momentum = 0.99;
  bool initialized = false;
};

inline void update_baseline(BaselineTracker& baseline, double batch_accuracy) {
  if (!(batch_accuracy >= 0.0 && batch_accuracy <= 1.0))
    throw std::invalid_argument("update_baseline: accuracy out of [0,1]");
  if (!baseline.initialized) {
    baseline.running_mean = batch_accuracy;
    baseline.initialized = true;
  } else {
    baseline.running_mean = baseline.momentum * baseline.running_mean +
                            (1.0 - baseline.momentum) * batch_accuracy;
  }
}

struct PpoConfig {
  double clip_epsilon = 0.2;
  int epochs_per_update = 4;
  int episodes_per_update = 256;
  double gamma = 1.0;
  double entropy_coefficient = 0.01;
  double learning_rate = 3e-4;
  int minibatch_size = 64;
  int update_count = 60;
  std::uint64_t master_seed = 0;

  void validate() const {
    if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0))
      throw std::invalid_argument("ppo: clip_epsilon out of (0,1)");
    if (!(gamma > 0.0 && gamma <= 1.0))
      throw std::invalid_argument("ppo: gamma out of (0,1]");
    if (epochs_per_update <= 0 || episodes_per_update <= 0 ||
        minibatch_size <= 0 || update_count < 0)
      throw std::invalid_argument("ppo: non-positive loop parameter");
    if (learning_rate <= 0.0 || entropy_coefficient < 0.0)
      throw std::invalid_argument("ppo: bad optimizer parameter");
  }
};

inline std::vector<double> compute_advantage(const Trajectory& traj,
                                             const BaselineTracker& baseline,
                                             double gamma) {
  const std::size_t L = traj.transitions.size();
  std::vector<double> adv(L);
  for (std::size_t l = 0; l < L; ++l)
    adv[l] = std::pow(gamma, static_cast<double>(L - 1 - l)) *
                 traj.terminal_reward -
             baseline.running_mean;
  return adv;
}

// ---------------------------------------------------------------------------
// Rollouts
// ---------------------------------------------------------------------------

enum class PoolFilter { training_only, all, unseen_only };

// Stage candidate resolution.  Classifiers are available in every pool
// configuration (a stage plan always ends in classification); identity
// operators likewise accompany the unseen pool.
inline std::vector<OperatorDescriptor> candidates_for_stage(
    const OperatorRegistry& registry, TaskKind task, PoolFilter filter) {
  if (task == TaskKind::classification)
    return registry.filter(TaskKind::classification);
  std::vector<OperatorDescriptor> out;
  for (const auto& op : registry.filter(task)) {
    const bool in_training = op.provenance == Provenance::training_pool;
    switch (filter) {
      case PoolFilter::training_only:
        if (in_training) out.push_back(op);
        break;
      case PoolFilter::all:
        out.push_back(op);
        break;
      case PoolFilter::unseen_only:
        if (!in_training || op.is_identity) out.push_back(op);
        break;
    }
  }
  return out;
}

struct RolloutEnv {
  const Dataset* dataset = nullptr;
  Curriculum curriculum;
  const OperatorRegistry* registry = nullptr;
  const SaiModel* exposure_sai = nullptr;
  const SaiModel* noise_sai = nullptr;
  PoolFilter pool_filter = PoolFilter::training_only;
};

using PolicyMap = std::map<TaskKind, PolicyParams>;

struct EpisodeResult {
  Trajectory trajectory;
  std::vector<std::string> chosen_ids;
  int predicted_label = -1;
  int true_label = -1;
};

// Plays one episode: at each stage the SAI masks the candidate set, the
// stage policy picks an operator, and the state advances; the terminal
// classification decides the reward.
inline EpisodeResult run_episode(const PolicyMap& policies,
                                 const RolloutEnv& env, const EpisodeSpec& ep,
                                 Rng& rng, SelectMode mode) {
  EpisodeResult result;
  result.true_label = ep.label;
  result.trajectory.spec = ep.spec;
  Image current = ep.distorted;
  for (std::size_t stage = 0; stage < ep.stage_plan.size(); ++stage) {
    const TaskKind task = ep.stage_plan[stage];
    auto pit = policies.find(task);
    if (pit == policies.end())
      throw std::runtime_error("run_episode: no policy for task " +
                               task_kind_name(task));
    const std::vector<OperatorDescriptor> candidates =
        candidates_for_stage(*env.registry, task, env.pool_filter);
    if (candidates.empty())
      throw std::runtime_error("run_episode: empty candidate pool for " +
                               task_kind_name(task));
    const int exposure_pred =
        predict_attribute(*env.exposure_sai, current).predicted_class;
    const int noise_pred =
        predict_attribute(*env.noise_sai, current).predicted_class;
    const EligibilityMask mask =
        build_mask(task, candidates, exposure_pred, noise_pred);
    CandidateEvaluation eval =
        embed_candidates(pit->second, current, candidates);
    ScoreResult sr = score_candidates(pit->second, eval);
    const std::vector<double> probs =
        softmax(masked_scores(sr, mask, eval.failed));
    const int action = mode == SelectMode::sample
                           ? categorical_sample(probs, rng)
                           : argmax_index(probs);
    Transition t;
    t.stage_index = static_cast<int>(stage);
    t.stage_task = task;
    t.summaries = eval.summaries;
    for (const auto& c : candidates) t.candidate_ids.push_back(c.id);
    t.mask = mask;
    t.action_index = action;
    t.old_log_prob =
        std::log(std::max(probs[static_cast<std::size_t>(action)], 1e-300));
    result.chosen_ids.push_back(candidates[static_cast<std::size_t>(action)].id);
    if (task == TaskKind::classification) {
      // the chosen classifier's probabilities are the head of its summary
      const auto& s = t.summaries[static_cast<std::size_t>(action)];
      std::vector<double> probs_out(
          s.begin(), s.begin() + env.dataset->class_count);
      result.predicted_label = argmax_index(probs_out);
      result.trajectory.terminal_reward =
          result.predicted_label == ep.label ? 1.0 : 0.0;
    } else {
      current = candidates[static_cast<std::size_t>(action)].image_fn(current);
    }
    result.trajectory.transitions.push_back(std::move(t));
  }
  return result;
}

inline std::vector<Trajectory> collect_rollouts(const PolicyMap& policies,
                                                const RolloutEnv& env,
                                                const PpoConfig& config,
                                                Rng& rng) {
  const int count = config.episodes_per_update;
  for (TaskKind task : {TaskKind::exposure_correction, TaskKind::denoising,
                        TaskKind::classification})
    if (!policies.count(task))
      throw std::runtime_error("collect_rollouts: missing policy for " +
                               task_kind_name(task));
  std::vector<Trajectory> out;
  std::uniform_int_distribution<std::size_t> pick(0, env.dataset->items.size() - 1);
  for (int i = 0; i < count; ++i) {
    const LabeledImage& sample = env.dataset->items[pick(rng)];
    const DistortionSpec spec = sample_distortion(rng, env.curriculum);
    const EpisodeSpec ep = make_episode(sample, spec, rng);
    out.push_back(
        run_episode(policies, env, ep, rng, SelectMode::sample).trajectory);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clipped surrogate loss
// ---------------------------------------------------------------------------

struct PpoLossResult {
  double loss = 0.0;
  double surrogate = 0.0;  // mean of the clipped surrogate terms
  double entropy = 0.0;    // mean policy entropy
  int dropped = 0;         // transitions with non-finite ratio
  PolicyGrad grads;
};

inline PpoLossResult ppo_loss(const PolicyParams& policy,
                              const std::vector<const Transition*>& transitions,
                              const std::vector<double>& advantages,
                              double clip_epsilon, double entropy_coefficient) {
  if (transitions.size() != advantages.size())
    throw std::invalid_argument("ppo_loss: transition/advantage mismatch");
  PpoLossResult result;
  result.grads = zero_policy_grad(policy);
  const double n = static_cast<double>(transitions.size());
  for (std::size_t t = 0; t < transitions.size(); ++t) {
    const Transition& tr = *transitions[t];
    if (tr.stage_task != policy.stage_task)
      throw std::invalid_argument("ppo_loss: transition from another stage");
    CandidateEvaluation eval = embed_summaries(policy, tr.summaries);
    ScoreResult sr = score_candidates(policy, eval);
    const std::vector<double> probs =
        softmax(masked_scores(sr, tr.mask, eval.failed));
    const std::size_t a = static_cast<std::size_t>(tr.action_index);
    const double new_log_prob = std::log(std::max(probs[a], 1e-300));
    const double ratio = std::exp(new_log_prob - tr.old_log_prob);
    if (!std::isfinite(ratio)) {
      ++result.dropped;
      continue;
    }
    const double adv = advantages[t];
    const double unclipped = ratio * adv;
    const double clipped =
        std::clamp(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon) * adv;
    result.surrogate += std::min(unclipped, clipped) / n;
    double entropy = 0.0;
    for (double p : probs)
      if (p > 0.0) entropy -= p * std::log(p);
    result.entropy += entropy / n;
    // gradient flows only when the unclipped branch is active
    const double d_log_prob =
        unclipped <= clipped ? ratio * adv : 0.0;
    std::vector<double> d_scores(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double indicator = (i == a) ? 1.0 : 0.0;
      double ds = -(d_log_prob * (indicator - probs[i])) / n;
      if (probs[i] > 0.0)
        ds += (entropy_coefficient / n) * probs[i] *
              (std::log(probs[i]) + entropy);
      d_scores[i] = ds;
    }
    score_backward(policy, eval, sr, d_scores, result.grads);
  }
  result.loss = -result.surrogate - entropy_coefficient * result.entropy;
  return result;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct MetricsRecord {
  int update = 0;
  double mean_reward = 0.0;
  double baseline = 0.0;
  double loss_exposure = 0.0;
  double loss_denoise = 0.0;
  double loss_classify = 0.0;
  double wall_seconds = 0.0;
};

struct PolicyAdam {
  AdamState embed, key, query;
};

inline PolicyAdam make_policy_adam(const PolicyParams& p, double lr) {
  return {make_adam(p.embed_net, lr), make_adam(p.key_net, lr),
          make_adam(p.query_net, lr)};
}

inline void policy_adam_step(PolicyParams& p, const PolicyGrad& g,
                             PolicyAdam& adam) {
  adam_step(p.embed_net, g.embed, adam.embed);
  adam_step(p.key_net, g.key, adam.key);
  adam_step(p.query_net, g.query, adam.query);
}

struct TrainState {
  PolicyMap policies;
  std::map<TaskKind, PolicyAdam> adam;
  BaselineTracker baseline;
  std::vector<MetricsRecord> metrics;
};

inline TrainState make_train_state(const PpoConfig& config) {
  TrainState st;
  Rng rng = make_rng(config.master_seed, "policy-init");
  for (TaskKind task : {TaskKind::exposure_correction, TaskKind::denoising,
                        TaskKind::classification}) {
    st.policies[task] = init_policy(task, rng);
    st.adam.emplace(task, make_policy_adam(st.policies[task], config.learning_rate));
  }
  return st;
}

// One PPO round: collect, update each stage policy for epochs_per_update
// epochs of shuffled minibatches, then fold the batch accuracy into the
// running-mean baseline.
inline MetricsRecord train_update(TrainState& st, const RolloutEnv& env,
                                  const PpoConfig& config, int update_index) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rollout_rng = make_rng(config.master_seed, "rollout",
                             static_cast<std::uint64_t>(update_index));
  const std::vector<Trajectory> batch =
      collect_rollouts(st.policies, env, config, rollout_rng);
  double batch_accuracy = 0.0;
  for (const auto& traj : batch) batch_accuracy += traj.terminal_reward;
  batch_accuracy /= static_cast<double>(batch.size());

  std::map<TaskKind, std::vector<const Transition*>> by_task;
  std::map<TaskKind, std::vector<double>> adv_by_task;
  for (const auto& traj : batch) {
    const std::vector<double> adv =
        compute_advantage(traj, st.baseline, config.gamma);
    for (std::size_t l = 0; l < traj.transitions.size(); ++l) {
      const Transition& tr = traj.transitions[l];
      by_task[tr.stage_task].push_back(&tr);
      adv_by_task[tr.stage_task].push_back(adv[l]);
    }
  }

  MetricsRecord rec;
  rec.update = update_index;
  rec.mean_reward = batch_accuracy;
  Rng shuffle_rng = make_rng(config.master_seed, "shuffle",
                             static_cast<std::uint64_t>(update_index));
  for (auto& [task, transitions] : by_task) {
    PolicyParams& policy = st.policies[task];
    PolicyAdam& adam = st.adam.at(task);
    const std::vector<double>& advantages = adv_by_task[task];
    double loss_sum = 0.0;
    int loss_count = 0;
    std::vector<std::size_t> order(transitions.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < config.epochs_per_update; ++epoch) {
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      for (std::size_t start = 0; start < order.size();
           start += static_cast<std::size_t>(config.minibatch_size)) {
        const std::size_t end = std::min(
            order.size(), start + static_cast<std::size_t>(config.minibatch_size));
        std::vector<const Transition*> mb;
        std::vector<double> mb_adv;
        for (std::size_t i = start; i < end; ++i) {
          mb.push_back(transitions[order[i]]);
          mb_adv.push_back(advantages[order[i]]);
        }
        PpoLossResult lr = ppo_loss(policy, mb, mb_adv, config.clip_epsilon,
                                    config.entropy_coefficient);
        policy_adam_step(policy, lr.grads, adam);
        loss_sum += lr.loss;
        ++loss_count;
      }
    }
    const double mean_loss = loss_count ? loss_sum / loss_count : 0.0;
    switch (task) {
      case TaskKind::exposure_correction: rec.loss_exposure = mean_loss; break;
      case TaskKind::denoising: rec.loss_denoise = mean_loss; break;
      case TaskKind::classification: rec.loss_classify = mean_loss; break;
      default: break;
    }
  }
  update_baseline(st.baseline, batch_accuracy);
  rec.baseline = st.baseline.running_mean;
  rec.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

inline void train_loop(TrainState& st, const RolloutEnv& env,
                       const PpoConfig& config,
                       const std::function<void(const MetricsRecord&)>&
                           on_update = {}) {
  config.validate();
  for (int u = 0; u < config.update_count; ++u) {
    MetricsRecord rec = train_update(st, env, config, u);
    st.metrics.push_back(rec);
    if (on_update) on_update(rec);
  }
}

inline std::string metrics_header() {
  return "update\tmean_reward\tbaseline\tloss_exposure\tloss_denoise\t"
         "loss_classify\twall_seconds";
}

inline std::string metrics_line(const MetricsRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\t%.3f",
                r.update, r.mean_reward, r.baseline, r.loss_exposure,
                r.loss_denoise, r.loss_classify, r.wall_seconds);
  return buf;
}

}  // namespace pipeforge
