#include <catch2/catch_amalgamated.hpp>

#include "pipeforge/config.hpp"

using namespace pipeforge;
using nlohmann::json;

TEST_CASE("config: empty object yields the documented defaults") {
  const RunConfig cfg = parse_run_config(json::object());
  REQUIRE(cfg.dataset.kind == "synthetic");
  REQUIRE(cfg.dataset.size == 16);
  REQUIRE(cfg.dataset.class_count == 4);
  REQUIRE(cfg.dataset.count == 2400);
  REQUIRE(cfg.curriculum_none_weight == 0.10);
  REQUIRE(cfg.sai.samples_per_class == 1500);
  REQUIRE(cfg.sai.exposure_target == 0.90);
  REQUIRE(cfg.sai.noise_target == 0.85);
  REQUIRE(cfg.pretrain.clean_target == 0.95);
  REQUIRE(cfg.ppo.clip_epsilon == 0.2);
  REQUIRE(cfg.ppo.update_count == 60);
  REQUIRE(cfg.eval.episode_count == 2000);
  REQUIRE(cfg.eval.beds ==
          std::vector<std::string>{"known", "partially_known", "unknown"});
  REQUIRE(cfg.master_seed == 1);
  REQUIRE(cfg.ppo.master_seed == 1);  // mirrored into the ppo section
  REQUIRE(cfg.output_dir == "out");
}

TEST_CASE("config: values are picked up and master_seed propagates") {
  const json j = {
      {"dataset", {{"kind", "synthetic"}, {"count", 600}, {"class_count", 3}}},
      {"curriculum", {{"none_weight", 0.2}}},
      {"ppo", {{"update_count", 5}, {"episodes_per_update", 32}}},
      {"eval", {{"beds", {"known"}}, {"episode_count", 250}}},
      {"master_seed", 99},
      {"output_dir", "scratch"},
  };
  const RunConfig cfg = parse_run_config(j);
  REQUIRE(cfg.dataset.count == 600);
  REQUIRE(cfg.dataset.class_count == 3);
  REQUIRE(cfg.curriculum_none_weight == 0.2);
  REQUIRE(cfg.ppo.update_count == 5);
  REQUIRE(cfg.ppo.episodes_per_update == 32);
  REQUIRE(cfg.ppo.master_seed == 99);
  REQUIRE(cfg.eval.beds == std::vector<std::string>{"known"});
  REQUIRE(cfg.eval.episode_count == 250);
  REQUIRE(cfg.output_dir == "scratch");
}

TEST_CASE("config: unknown keys rejected in every section") {
  REQUIRE_THROWS_AS(parse_run_config({{"datasets", json::object()}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"dataset", {{"szie", 16}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"curriculum", {{"weight", 0.1}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"sai", {{"lr", 0.1}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"pretrain", {{"epochs", 3}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"ppo", {{"clip", 0.2}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"eval", {{"bed", "known"}}}}),
                    std::invalid_argument);
}

TEST_CASE("config: invalid values rejected") {
  REQUIRE_THROWS_AS(parse_run_config({{"dataset", {{"kind", "imagenet"}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"dataset", {{"size", 4}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"dataset", {{"class_count", 7}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"curriculum", {{"none_weight", 1.0}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"ppo", {{"clip_epsilon", 1.5}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"ppo", {{"gamma", 0.0}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"eval", {{"beds", {"medium"}}}}}),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(parse_run_config({{"eval", {{"episode_count", 0}}}}),
                    std::invalid_argument);
}

TEST_CASE("config: load from file") {
  const auto path = std::filesystem::temp_directory_path() / "pf_cfg.json";
  {
    std::ofstream os(path);
    os << R"({"master_seed": 7, "ppo": {"update_count": 2}})";
  }
  const RunConfig cfg = load_run_config(path);
  REQUIRE(cfg.master_seed == 7);
  REQUIRE(cfg.ppo.update_count == 2);
  std::filesystem::remove(path);
  REQUIRE_THROWS_AS(load_run_config(path), std::runtime_error);
}
