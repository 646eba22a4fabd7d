#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeforge/ppo.hpp"

namespace pipeforge {

enum class TestBed { known, partially_known, unknown };

inline std::string bed_name(TestBed b) {
  switch (b) {
    case TestBed::known: return "known";
    case TestBed::partially_known: return "partially_known";
    case TestBed::unknown: return "unknown";
  }
  return "?";
}

inline PoolFilter bed_pool_filter(TestBed b) {
  switch (b) {
    case TestBed::known: return PoolFilter::training_only;
    case TestBed::partially_known: return PoolFilter::all;
    case TestBed::unknown: return PoolFilter::unseen_only;
  }
  return PoolFilter::all;
}

struct TestBedConfig {
  TestBed bed = TestBed::known;
  int episode_count = 2000;
  Curriculum curriculum;
  std::uint64_t seed = 0;
};

struct EvalRow {
  std::string method;  // auto_transrl | template | vanilla
  std::string bed;
  std::string spec_key;
  double accuracy = 0.0;
  double half_width = 0.0;  // 95% normal-approximation half width
  int episodes = 0;
};

struct MethodResult {
  std::map<std::string, std::pair<int, int>> per_spec;  // key -> (correct, n)
  std::vector<std::vector<std::string>> episode_ops;    // operator ids used
  std::vector<int> episode_correct;
};

namespace detail {

inline void tally(MethodResult& r, const std::string& key, bool correct,
                  std::vector<std::string> ops) {
  auto& [c, n] = r.per_spec[key];
  c += correct ? 1 : 0;
  n += 1;
  r.episode_ops.push_back(std::move(ops));
  r.episode_correct.push_back(correct ? 1 : 0);
}

}  // namespace detail

// The three methods are evaluated on an identical pre-generated episode
// stream so comparisons are paired.
inline std::vector<EpisodeSpec> generate_eval_episodes(
    const Dataset& dataset, const TestBedConfig& config) {
  Rng rng = make_rng(config.seed, "eval-episodes");
  std::uniform_int_distribution<std::size_t> pick(0, dataset.items.size() - 1);
  std::vector<EpisodeSpec> out;
  for (int i = 0; i < config.episode_count; ++i) {
    const LabeledImage& sample = dataset.items[pick(rng)];
    const DistortionSpec spec = sample_distortion(rng, config.curriculum);
    out.push_back(make_episode(sample, spec, rng));
  }
  return out;
}

inline MethodResult run_autotransrl(const PolicyMap& policies,
                                    const SaiModel& exposure_sai,
                                    const SaiModel& noise_sai,
                                    const OperatorRegistry& registry,
                                    const Dataset& dataset,
                                    const std::vector<EpisodeSpec>& episodes,
                                    TestBed bed) {
  RolloutEnv env;
  env.dataset = &dataset;
  env.registry = &registry;
  env.exposure_sai = &exposure_sai;
  env.noise_sai = &noise_sai;
  env.pool_filter = bed_pool_filter(bed);
  for (TaskKind task : {TaskKind::exposure_correction, TaskKind::denoising})
    if (candidates_for_stage(registry, task, env.pool_filter).empty())
      throw std::runtime_error("run_autotransrl: empty pool for " +
                               task_kind_name(task));
  MethodResult result;
  Rng rng = make_rng(0, "eval-greedy");  // greedy mode draws nothing
  for (const auto& ep : episodes) {
    EpisodeResult er = run_episode(policies, env, ep, rng, SelectMode::greedy);
    detail::tally(result, ep.spec.key(),
                  er.trajectory.terminal_reward > 0.5, er.chosen_ids);
  }
  return result;
}

// Fixed mapping consulting the ground-truth distortion spec, never the SAI:
// under -> brighten 0.45, over -> darken 2.2, any noise -> blur 1.0, then
// the clean-trained classifier.
inline MethodResult run_template(const OperatorDescriptor& clean_classifier,
                                 const std::vector<EpisodeSpec>& episodes,
                                 int class_count) {
  MethodResult result;
  for (const auto& ep : episodes) {
    Image current = ep.distorted;
    std::vector<std::string> ops;
    for (TaskKind task : ep.stage_plan) {
      if (task == TaskKind::exposure_correction) {
        if (ep.spec.exposure_level == ExposureLevel::under) {
          current = apply_gamma(current, 0.45);
          ops.push_back("template:brighten_0.45");
        } else if (ep.spec.exposure_level == ExposureLevel::over) {
          current = apply_gamma(current, 2.2);
          ops.push_back("template:darken_2.2");
        } else {
          ops.push_back("template:identity");
        }
      } else if (task == TaskKind::denoising) {
        if (ep.spec.noise_level != NoiseLevel::none) {
          current = gaussian_blur(current, 1.0);
          ops.push_back("template:blur_1.0");
        } else {
          ops.push_back("template:identity");
        }
      }
    }
    const std::vector<double> probs = classify(clean_classifier, current);
    const int predicted = argmax_index(
        std::vector<double>(probs.begin(), probs.begin() + class_count));
    ops.push_back(clean_classifier.id);
    detail::tally(result, ep.spec.key(), predicted == ep.label, std::move(ops));
  }
  return result;
}

inline MethodResult run_vanilla(const OperatorDescriptor& clean_classifier,
                                const std::vector<EpisodeSpec>& episodes,
                                int class_count) {
  MethodResult result;
  for (const auto& ep : episodes) {
    const std::vector<double> probs = classify(clean_classifier, ep.distorted);
    const int predicted = argmax_index(
        std::vector<double>(probs.begin(), probs.begin() + class_count));
    detail::tally(result, ep.spec.key(), predicted == ep.label,
                  {clean_classifier.id});
  }
  return result;
}

inline double method_accuracy(const MethodResult& r) {
  if (r.episode_correct.empty()) return 0.0;
  double sum = 0.0;
  for (int c : r.episode_correct) sum += c;
  return sum / static_cast<double>(r.episode_correct.size());
}

// Accuracy over episodes whose spec actually distorts the image.
inline double method_accuracy_distorted(
    const MethodResult& r, const std::vector<EpisodeSpec>& episodes) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (episodes[i].spec.sequence_kind == SequenceKind::none) continue;
    sum += r.episode_correct[i];
    ++n;
  }
  return n ? sum / n : 0.0;
}

inline std::vector<EvalRow> make_rows(const std::string& method, TestBed bed,
                                      const MethodResult& r) {
  std::vector<EvalRow> rows;
  for (const auto& [key, cn] : r.per_spec) {
    EvalRow row;
    row.method = method;
    row.bed = bed_name(bed);
    row.spec_key = key;
    row.episodes = cn.second;
    row.accuracy = static_cast<double>(cn.first) / cn.second;
    const double p = row.accuracy;
    row.half_width = 1.96 * std::sqrt(p * (1.0 - p) / cn.second);
    rows.push_back(row);
  }
  return rows;
}

inline void write_report(const std::vector<EvalRow>& rows,
                         const std::filesystem::path& report_path,
                         const std::filesystem::path& plot_path) {
  {
    std::ofstream os(report_path);
    if (!os) throw std::runtime_error("cannot write " + report_path.string());
    os << "method\tbed\tspec\taccuracy\thalf_width\tn\n";
    for (const auto& r : rows) {
      char buf[512];
      std::snprintf(buf, sizeof(buf), "%s\t%s\t%s\t%.4f\t%.4f\t%d",
                    r.method.c_str(), r.bed.c_str(), r.spec_key.c_str(),
                    r.accuracy, r.half_width, r.episodes);
      os << buf << "\n";
    }
  }
  // plot data: one line per (bed, spec), accuracies grouped by method
  std::map<std::pair<std::string, std::string>,
           std::map<std::string, double>> grouped;
  for (const auto& r : rows) grouped[{r.bed, r.spec_key}][r.method] = r.accuracy;
  std::ofstream os(plot_path);
  if (!os) throw std::runtime_error("cannot write " + plot_path.string());
  os << "bed\tspec\tauto_transrl\ttemplate\tvanilla\n";
  for (const auto& [key, methods] : grouped) {
    auto get = [&](const char* m) {
      auto it = methods.find(m);
      return it == methods.end() ? -1.0 : it->second;
    };
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%s\t%s\t%.4f\t%.4f\t%.4f",
                  key.first.c_str(), key.second.c_str(), get("auto_transrl"),
                  get("template"), get("vanilla"));
    os << buf << "\n";
  }
}

inline std::vector<EvalRow> read_report(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::vector<EvalRow> rows;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    EvalRow r;
    std::istringstream ls(line);
    std::string acc, hw, n;
    std::getline(ls, r.method, '\t');
    std::getline(ls, r.bed, '\t');
    std::getline(ls, r.spec_key, '\t');
    std::getline(ls, acc, '\t');
    std::getline(ls, hw, '\t');
    std::getline(ls, n, '\t');
    r.accuracy = std::stod(acc);
    r.half_width = std::stod(hw);
    r.episodes = std::stoi(n);
    rows.push_back(r);
  }
  return rows;
}

// Audit for the unknown bed: no training-pool operator id other than the
// identities may appear in any trajectory.
inline bool audit_unknown_bed(const MethodResult& r,
                              const OperatorRegistry& registry) {
  for (const auto& ops : r.episode_ops)
    for (const auto& id : ops) {
      if (!registry.contains(id)) continue;  // template:* pseudo-ids
      const OperatorDescriptor& op = registry.by_id(id);
      if (op.task_kind == TaskKind::classification || op.is_identity) continue;
      if (op.provenance == Provenance::training_pool) return false;
    }
  return true;
}

}  // namespace pipeforge
