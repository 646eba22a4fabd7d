#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pipeforge/ppo.hpp"

namespace pipeforge {

struct DatasetConfig {
  std::string kind = "synthetic";  // synthetic | cifar
  int size = 16;
  int class_count = 4;
  int count = 2400;
  std::string cifar_path;
};

struct SaiConfigSection {
  int samples_per_class = 1500;
  int epochs = 60;
  double exposure_target = 0.90;
  double noise_target = 0.85;
};

struct PretrainConfig {
  int classifier_epochs = 40;
  double clean_target = 0.95;
};

struct EvalConfig {
  std::vector<std::string> beds = {"known", "partially_known", "unknown"};
  int episode_count = 2000;
};

struct RunConfig {
  DatasetConfig dataset;
  double curriculum_none_weight = 0.10;
  std::string pool_manifest;  // optional; empty = standard pool
  SaiConfigSection sai;
  PretrainConfig pretrain;
  PpoConfig ppo;
  EvalConfig eval;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
};

namespace detail {

inline void require_keys(const nlohmann::json& j, const std::string& section,
                         const std::set<std::string>& allowed) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key \"" + it.key() +
                                  "\" in section " + section);
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  detail::require_keys(j, "(top level)",
                       {"dataset", "curriculum", "pools", "sai", "pretrain",
                        "ppo", "eval", "master_seed", "output_dir"});
  RunConfig cfg;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::require_keys(d, "dataset",
                         {"kind", "size", "class_count", "count", "cifar_path"});
    cfg.dataset.kind = d.value("kind", cfg.dataset.kind);
    cfg.dataset.size = d.value("size", cfg.dataset.size);
    cfg.dataset.class_count = d.value("class_count", cfg.dataset.class_count);
    cfg.dataset.count = d.value("count", cfg.dataset.count);
    cfg.dataset.cifar_path = d.value("cifar_path", cfg.dataset.cifar_path);
    if (cfg.dataset.kind != "synthetic" && cfg.dataset.kind != "cifar")
      throw std::invalid_argument("config: dataset.kind must be synthetic|cifar");
    if (cfg.dataset.kind == "synthetic") {
      if (cfg.dataset.size < 8)
        throw std::invalid_argument("config: dataset.size must be >= 8");
      if (cfg.dataset.class_count < 2 || cfg.dataset.class_count > 6)
        throw std::invalid_argument("config: dataset.class_count must be 2..6");
      if (cfg.dataset.count <= 0)
        throw std::invalid_argument("config: dataset.count must be > 0");
    }
  }
  if (j.contains("curriculum")) {
    const auto& c = j.at("curriculum");
    detail::require_keys(c, "curriculum", {"none_weight"});
    cfg.curriculum_none_weight = c.value("none_weight", cfg.curriculum_none_weight);
    if (cfg.curriculum_none_weight < 0.0 || cfg.curriculum_none_weight >= 1.0)
      throw std::invalid_argument("config: curriculum.none_weight out of [0,1)");
  }
  if (j.contains("pools")) {
    const auto& p = j.at("pools");
    detail::require_keys(p, "pools", {"manifest"});
    cfg.pool_manifest = p.value("manifest", cfg.pool_manifest);
  }
  if (j.contains("sai")) {
    const auto& s = j.at("sai");
    detail::require_keys(s, "sai",
                         {"samples_per_class", "epochs", "exposure_target",
                          "noise_target"});
    cfg.sai.samples_per_class = s.value("samples_per_class", cfg.sai.samples_per_class);
    cfg.sai.epochs = s.value("epochs", cfg.sai.epochs);
    cfg.sai.exposure_target = s.value("exposure_target", cfg.sai.exposure_target);
    cfg.sai.noise_target = s.value("noise_target", cfg.sai.noise_target);
    if (cfg.sai.samples_per_class <= 0 || cfg.sai.epochs <= 0)
      throw std::invalid_argument("config: sai parameters must be positive");
  }
  if (j.contains("pretrain")) {
    const auto& p = j.at("pretrain");
    detail::require_keys(p, "pretrain", {"classifier_epochs", "clean_target"});
    cfg.pretrain.classifier_epochs =
        p.value("classifier_epochs", cfg.pretrain.classifier_epochs);
    cfg.pretrain.clean_target = p.value("clean_target", cfg.pretrain.clean_target);
  }
  if (j.contains("ppo")) {
    const auto& p = j.at("ppo");
    detail::require_keys(p, "ppo",
                         {"clip_epsilon", "epochs_per_update",
                          "episodes_per_update", "gamma", "entropy_coefficient",
                          "learning_rate", "minibatch_size", "update_count"});
    cfg.ppo.clip_epsilon = p.value("clip_epsilon", cfg.ppo.clip_epsilon);
    cfg.ppo.epochs_per_update =
        p.value("epochs_per_update", cfg.ppo.epochs_per_update);
    cfg.ppo.episodes_per_update =
        p.value("episodes_per_update", cfg.ppo.episodes_per_update);
    cfg.ppo.gamma = p.value("gamma", cfg.ppo.gamma);
    cfg.ppo.entropy_coefficient =
        p.value("entropy_coefficient", cfg.ppo.entropy_coefficient);
    cfg.ppo.learning_rate = p.value("learning_rate", cfg.ppo.learning_rate);
    cfg.ppo.minibatch_size = p.value("minibatch_size", cfg.ppo.minibatch_size);
    cfg.ppo.update_count = p.value("update_count", cfg.ppo.update_count);
    cfg.ppo.validate();
  }
  if (j.contains("eval")) {
    const auto& e = j.at("eval");
    detail::require_keys(e, "eval", {"beds", "episode_count"});
    if (e.contains("beds"))
      cfg.eval.beds = e.at("beds").get<std::vector<std::string>>();
    cfg.eval.episode_count = e.value("episode_count", cfg.eval.episode_count);
    for (const auto& b : cfg.eval.beds)
      if (b != "known" && b != "partially_known" && b != "unknown")
        throw std::invalid_argument("config: unknown eval bed " + b);
    if (cfg.eval.episode_count <= 0)
      throw std::invalid_argument("config: eval.episode_count must be > 0");
  }
  cfg.master_seed = j.value("master_seed", cfg.master_seed);
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  cfg.ppo.master_seed = cfg.master_seed;
  return cfg;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read config " + path.string());
  nlohmann::json j;
  is >> j;
  return parse_run_config(j);
}

}  // namespace pipeforge
