#pragma once

#include <sstream>
#include <string>

#include "pipeforge/checkpoint.hpp"
#include "pipeforge/policy.hpp"
#include "pipeforge/sai.hpp"

namespace pipeforge {

namespace detail {

inline std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (double d : v) {
    if (!out.empty()) out += " ";
    out += fmt_double(d);
  }
  return out;
}

inline std::vector<double> split_doubles(const std::string& s) {
  std::istringstream is(s);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  return out;
}

}  // namespace detail

inline Checkpoint sai_to_checkpoint(const SaiModel& model) {
  Checkpoint cp;
  cp.meta["kind"] = "sai";
  cp.meta["attribute"] =
      model.attribute == Attribute::exposure ? "exposure" : "noise";
  cp.meta["class_count"] = std::to_string(model.class_count);
  cp.meta["feature_mean"] = detail::join_doubles(model.feature_mean);
  cp.meta["feature_std"] = detail::join_doubles(model.feature_std);
  cp.nets["net"] = model.feature_net;
  return cp;
}

inline SaiModel sai_from_checkpoint(const Checkpoint& cp) {
  SaiModel m;
  m.feature_net = cp.nets.at("net");
  m.attribute = cp.meta.at("attribute") == "exposure" ? Attribute::exposure
                                                      : Attribute::noise;
  m.class_count = std::stoi(cp.meta.at("class_count"));
  m.feature_mean = detail::split_doubles(cp.meta.at("feature_mean"));
  m.feature_std = detail::split_doubles(cp.meta.at("feature_std"));
  return m;
}

inline Checkpoint policy_to_checkpoint(const PolicyParams& p) {
  Checkpoint cp;
  cp.meta["kind"] = "policy";
  cp.meta["stage_task"] = task_kind_name(p.stage_task);
  cp.meta["embed_dim"] = std::to_string(kEmbedDim);
  cp.meta["key_dim"] = std::to_string(kKeyDim);
  cp.meta["summary_dim"] = std::to_string(kSummaryDim);
  cp.nets["embed"] = p.embed_net;
  cp.nets["key"] = p.key_net;
  cp.nets["query"] = p.query_net;
  return cp;
}

inline PolicyParams policy_from_checkpoint(const Checkpoint& cp) {
  PolicyParams p;
  p.stage_task = parse_task_kind(cp.meta.at("stage_task"));
  p.embed_net = cp.nets.at("embed");
  p.key_net = cp.nets.at("key");
  p.query_net = cp.nets.at("query");
  return p;
}

inline Checkpoint classifier_to_checkpoint(const DenseNet& net,
                                           const std::string& id) {
  Checkpoint cp;
  cp.meta["kind"] = "classifier";
  cp.meta["id"] = id;
  cp.nets["net"] = net;
  return cp;
}

}  // namespace pipeforge
