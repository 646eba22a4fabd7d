// pipeforge CLI: dataset | pretrain | train | eval, driven by one JSON config.
// Exit codes: 0 success, 2 input/config error, 3 quality-gate failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pipeforge/config.hpp"
#include "pipeforge/eval.hpp"
#include "pipeforge/serialize.hpp"
#include "pipeforge/training.hpp"

namespace fs = std::filesystem;
using namespace pipeforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitQualityGate = 3;

fs::path out_path(const RunConfig& cfg, const std::string& name) {
  return fs::path(cfg.output_dir) / name;
}

void require_file(const fs::path& p) {
  if (!fs::exists(p))
    throw std::runtime_error("missing required file: " + p.string() +
                             " (run the earlier pipeline step first)");
}

void write_text_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    os << content;
  }
  fs::rename(tmp, path);
}

int cmd_dataset(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  Dataset ds;
  if (cfg.dataset.kind == "synthetic") {
    Rng rng = make_rng(cfg.master_seed, "dataset");
    ds = gen_synthetic(cfg.dataset.count, cfg.dataset.size,
                       cfg.dataset.class_count, rng);
  } else {
    ds = load_cifar10_batch(cfg.dataset.cifar_path);
  }
  save_dataset(ds, out_path(cfg, "dataset.bin"));
  std::printf("dataset: %zu images, %dx%d, %d classes -> %s\n",
              ds.items.size(), ds.size, ds.size, ds.class_count,
              out_path(cfg, "dataset.bin").string().c_str());
  return kExitOk;
}

int cmd_pretrain(const RunConfig& cfg) {
  require_file(out_path(cfg, "dataset.bin"));
  const Dataset ds = load_dataset(out_path(cfg, "dataset.bin"));
  std::string summary;
  bool gate_failed = false;

  struct Spec {
    const char* id;
    AugmentKind kind;
  };
  for (const Spec& spec : {Spec{"cls_clean", AugmentKind::clean},
                           Spec{"cls_noise_aug", AugmentKind::noise},
                           Spec{"cls_exposure_aug", AugmentKind::exposure}}) {
    ClassifierTrainConfig ccfg;
    ccfg.epochs = cfg.pretrain.classifier_epochs;
    ccfg.seed = derive_seed(cfg.master_seed, spec.id);
    ClassifierTrainResult r = train_classifier(ds, spec.kind, ccfg);
    save_checkpoint(classifier_to_checkpoint(r.net, spec.id),
                    out_path(cfg, std::string(spec.id) + ".ckpt"));
    char line[160];
    std::snprintf(line, sizeof(line),
                  "%s: val_accuracy=%.4f clean_accuracy=%.4f\n", spec.id,
                  r.validation_accuracy, r.clean_accuracy);
    summary += line;
    if (spec.kind == AugmentKind::clean &&
        r.clean_accuracy < cfg.pretrain.clean_target) {
      summary += "GATE FAILED: clean classifier below target\n";
      gate_failed = true;
    }
  }

  for (Attribute attr : {Attribute::exposure, Attribute::noise}) {
    const bool is_exposure = attr == Attribute::exposure;
    const int class_count = is_exposure ? 3 : 4;
    const double target =
        is_exposure ? cfg.sai.exposure_target : cfg.sai.noise_target;
    std::vector<SaiSample> data = make_attribute_dataset(
        ds, attr, cfg.sai.samples_per_class, cfg.master_seed);
    SaiTrainConfig scfg;
    scfg.epochs = cfg.sai.epochs;
    scfg.seed = derive_seed(cfg.master_seed, is_exposure ? "sai-e" : "sai-n");
    SaiTrainResult r = train_sai(data, attr, class_count, scfg);
    save_checkpoint(sai_to_checkpoint(r.model),
                    out_path(cfg, is_exposure ? "sai_exposure.ckpt"
                                              : "sai_noise.ckpt"));
    char line[160];
    std::snprintf(line, sizeof(line), "sai_%s: val_accuracy=%.4f target=%.2f\n",
                  is_exposure ? "exposure" : "noise", r.validation_accuracy,
                  target);
    summary += line;
    if (r.validation_accuracy < target) {
      summary += std::string("GATE FAILED: sai_") +
                 (is_exposure ? "exposure" : "noise") + " below target\n";
      gate_failed = true;
    }
  }

  // pool manifest referencing the classifier checkpoints just written
  {
    std::vector<OperatorDescriptor> classifiers;
    for (const char* id : {"cls_clean", "cls_noise_aug", "cls_exposure_aug"}) {
      Checkpoint cp = load_checkpoint(out_path(cfg, std::string(id) + ".ckpt"));
      OperatorDescriptor d = make_classifier_op(id, cp.nets.at("net"),
                                                std::string(id) + ".ckpt");
      classifiers.push_back(std::move(d));
    }
    save_manifest(build_standard_registry(std::move(classifiers)),
                  out_path(cfg, "pool.manifest"));
  }

  write_text_atomic(out_path(cfg, "pretrain_summary.txt"), summary);
  std::fputs(summary.c_str(), stdout);
  if (gate_failed) return kExitQualityGate;
  return kExitOk;
}

OperatorRegistry load_registry(const RunConfig& cfg) {
  const fs::path manifest = cfg.pool_manifest.empty()
                                ? out_path(cfg, "pool.manifest")
                                : fs::path(cfg.pool_manifest);
  require_file(manifest);
  return load_manifest(manifest);
}

int cmd_train(const RunConfig& cfg) {
  require_file(out_path(cfg, "dataset.bin"));
  require_file(out_path(cfg, "sai_exposure.ckpt"));
  require_file(out_path(cfg, "sai_noise.ckpt"));
  const Dataset ds = load_dataset(out_path(cfg, "dataset.bin"));
  const SaiModel sai_exposure =
      sai_from_checkpoint(load_checkpoint(out_path(cfg, "sai_exposure.ckpt")));
  const SaiModel sai_noise =
      sai_from_checkpoint(load_checkpoint(out_path(cfg, "sai_noise.ckpt")));
  const OperatorRegistry registry = load_registry(cfg);

  RolloutEnv env;
  env.dataset = &ds;
  env.curriculum = default_curriculum(cfg.curriculum_none_weight);
  env.registry = &registry;
  env.exposure_sai = &sai_exposure;
  env.noise_sai = &sai_noise;
  env.pool_filter = PoolFilter::training_only;

  TrainState st = make_train_state(cfg.ppo);
  std::string metrics = metrics_header() + "\n";
  auto save_policies = [&]() {
    for (const auto& [task, policy] : st.policies)
      save_checkpoint(policy_to_checkpoint(policy),
                      out_path(cfg, "policy_" + task_kind_name(task) + ".ckpt"));
  };
  train_loop(st, env, cfg.ppo, [&](const MetricsRecord& rec) {
    metrics += metrics_line(rec) + "\n";
    std::printf("%s\n", metrics_line(rec).c_str());
    if ((rec.update + 1) % 10 == 0) {
      save_policies();
      write_text_atomic(out_path(cfg, "metrics.tsv"), metrics);
    }
  });
  save_policies();
  write_text_atomic(out_path(cfg, "metrics.tsv"), metrics);
  return kExitOk;
}

TestBed parse_bed(const std::string& s) {
  if (s == "known") return TestBed::known;
  if (s == "partially_known") return TestBed::partially_known;
  return TestBed::unknown;
}

int cmd_eval(const RunConfig& cfg) {
  require_file(out_path(cfg, "dataset.bin"));
  for (const char* f : {"sai_exposure.ckpt", "sai_noise.ckpt",
                        "policy_exposure_correction.ckpt",
                        "policy_denoising.ckpt", "policy_classification.ckpt"})
    require_file(out_path(cfg, f));
  const Dataset ds = load_dataset(out_path(cfg, "dataset.bin"));
  const SaiModel sai_exposure =
      sai_from_checkpoint(load_checkpoint(out_path(cfg, "sai_exposure.ckpt")));
  const SaiModel sai_noise =
      sai_from_checkpoint(load_checkpoint(out_path(cfg, "sai_noise.ckpt")));
  const OperatorRegistry registry = load_registry(cfg);
  PolicyMap policies;
  for (TaskKind task : {TaskKind::exposure_correction, TaskKind::denoising,
                        TaskKind::classification})
    policies[task] = policy_from_checkpoint(
        load_checkpoint(out_path(cfg, "policy_" + task_kind_name(task) + ".ckpt")));

  const OperatorDescriptor& clean_classifier = registry.by_id("cls_clean");
  std::vector<EvalRow> rows;
  for (const std::string& bed_str : cfg.eval.beds) {
    const TestBed bed = parse_bed(bed_str);
    TestBedConfig bcfg;
    bcfg.bed = bed;
    bcfg.episode_count = cfg.eval.episode_count;
    bcfg.curriculum = default_curriculum(cfg.curriculum_none_weight);
    bcfg.seed = derive_seed(cfg.master_seed, "eval-" + bed_str);
    const std::vector<EpisodeSpec> episodes = generate_eval_episodes(ds, bcfg);
    MethodResult ours = run_autotransrl(policies, sai_exposure, sai_noise,
                                        registry, ds, episodes, bed);
    if (bed == TestBed::unknown && !audit_unknown_bed(ours, registry))
      throw std::runtime_error("unknown-bed audit failed: training-pool "
                               "operator appeared in a trajectory");
    MethodResult tmpl = run_template(clean_classifier, episodes, ds.class_count);
    MethodResult vanilla =
        run_vanilla(clean_classifier, episodes, ds.class_count);
    for (auto& r : make_rows("auto_transrl", bed, ours)) rows.push_back(r);
    for (auto& r : make_rows("template", bed, tmpl)) rows.push_back(r);
    for (auto& r : make_rows("vanilla", bed, vanilla)) rows.push_back(r);
    std::printf("bed=%s auto=%.4f template=%.4f vanilla=%.4f\n",
                bed_str.c_str(), method_accuracy(ours), method_accuracy(tmpl),
                method_accuracy(vanilla));
  }
  write_report(rows, out_path(cfg, "report.tsv"), out_path(cfg, "plot_data.tsv"));

  // run manifest: config, seeds, pool composition, checkpoint checksums
  std::string manifest;
  manifest += "master_seed\t" + std::to_string(cfg.master_seed) + "\n";
  manifest += "episode_count\t" + std::to_string(cfg.eval.episode_count) + "\n";
  for (const auto& op : registry.all())
    manifest += "operator\t" + op.id + "\t" +
                (op.provenance == Provenance::training_pool ? "training_pool"
                                                            : "unseen_pool") +
                "\n";
  for (const char* f : {"sai_exposure.ckpt", "sai_noise.ckpt",
                        "policy_exposure_correction.ckpt",
                        "policy_denoising.ckpt", "policy_classification.ckpt"}) {
    char line[160];
    std::snprintf(line, sizeof(line), "checksum\t%s\t%016llx\n", f,
                  static_cast<unsigned long long>(
                      checkpoint_checksum(load_checkpoint(out_path(cfg, f)))));
    manifest += line;
  }
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  manifest += "timestamp_unix\t" +
              std::to_string(
                  std::chrono::duration_cast<std::chrono::seconds>(now).count()) +
              "\n";
  write_text_atomic(out_path(cfg, "run_manifest.txt"), manifest);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pipeforge: attention-guided vision pipeline composition"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed_override = 0;
  bool has_seed = false;
  for (const char* name : {"dataset", "pretrain", "train", "eval"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "run configuration (JSON)")
        ->required();
    sub->add_option("--seed", seed_override, "master seed override")
        ->each([&](const std::string&) { has_seed = true; });
  }
  CLI11_PARSE(app, argc, argv);
  try {
    RunConfig cfg = load_run_config(config_path);
    if (has_seed) {
      cfg.master_seed = seed_override;
      cfg.ppo.master_seed = seed_override;
    }
    const std::string sub = app.get_subcommands().front()->get_name();
    if (sub == "dataset") return cmd_dataset(cfg);
    if (sub == "pretrain") return cmd_pretrain(cfg);
    if (sub == "train") return cmd_train(cfg);
    return cmd_eval(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
}
