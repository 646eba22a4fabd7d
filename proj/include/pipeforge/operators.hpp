#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeforge/checkpoint.hpp"
#include "pipeforge/image.hpp"
#include "pipeforge/nn.hpp"
#include "pipeforge/rng.hpp"

namespace pipeforge {

enum class TaskKind { exposure_correction, denoising, classification, identity };
enum class Provenance { training_pool, unseen_pool };
enum class Tag {
  under_exposed,
  well_exposed,
  over_exposed,
  no_noise,
  low_noise,
  mid_noise,
  high_noise
};

inline std::string task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::exposure_correction: return "exposure_correction";
    case TaskKind::denoising: return "denoising";
    case TaskKind::classification: return "classification";
    case TaskKind::identity: return "identity";
  }
  return "?";
}

inline TaskKind parse_task_kind(const std::string& s) {
  if (s == "exposure_correction") return TaskKind::exposure_correction;
  if (s == "denoising") return TaskKind::denoising;
  if (s == "classification") return TaskKind::classification;
  if (s == "identity") return TaskKind::identity;
  throw std::invalid_argument("unknown task kind: " + s);
}

inline std::string tag_name(Tag t) {
  switch (t) {
    case Tag::under_exposed: return "under_exposed";
    case Tag::well_exposed: return "well_exposed";
    case Tag::over_exposed: return "over_exposed";
    case Tag::no_noise: return "no_noise";
    case Tag::low_noise: return "low_noise";
    case Tag::mid_noise: return "mid_noise";
    case Tag::high_noise: return "high_noise";
  }
  return "?";
}

inline Tag parse_tag(const std::string& s) {
  for (Tag t : {Tag::under_exposed, Tag::well_exposed, Tag::over_exposed,
                Tag::no_noise, Tag::low_noise, Tag::mid_noise, Tag::high_noise})
    if (tag_name(t) == s) return t;
  throw std::invalid_argument("unknown tag: " + s);
}

// ---------------------------------------------------------------------------
// Image operators
// ---------------------------------------------------------------------------

inline Image apply_gamma(const Image& img, double g) {
  if (!(g >= 0.1 && g <= 10.0))
    throw std::invalid_argument("apply_gamma: exponent out of [0.1, 10]");
  Image out = img;
  for (double& p : out.pixels) p = clamp01(std::pow(p, g));
  return out;
}

inline Image add_gaussian_noise(const Image& img, double sigma, Rng& rng) {
  if (!(sigma >= 0.0 && sigma <= 0.5))
    throw std::invalid_argument("add_gaussian_noise: sigma out of [0, 0.5]");
  if (sigma == 0.0) return img;  // no rng consumption
  Image out = img;
  std::normal_distribution<double> normal(0.0, sigma);
  for (double& p : out.pixels) p = clamp01(p + normal(rng));
  return out;
}

namespace detail {

inline std::vector<double> gaussian_kernel_1d(double sigma) {
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[static_cast<std::size_t>(i + radius)] =
        std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[static_cast<std::size_t>(i + radius)];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace detail

// Separable convolution with a normalized 1-D Gaussian per axis, reflect
// padding.  Valid inputs stay in [0,1] (convex combination), so no clamp
// is needed and linearity holds exactly.
inline Image gaussian_blur(const Image& img, double kernel_sigma) {
  if (!(kernel_sigma > 0.0 && kernel_sigma <= 3.0))
    throw std::invalid_argument("gaussian_blur: sigma out of (0, 3]");
  const std::vector<double> k = detail::gaussian_kernel_1d(kernel_sigma);
  const int radius = static_cast<int>(k.size() / 2);
  Image tmp = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<std::size_t>(i + radius)] *
                 img.at(y, reflect_index(x + i, img.width), c);
        tmp.at(y, x, c) = acc;
      }
  Image out = tmp;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[static_cast<std::size_t>(i + radius)] *
                 tmp.at(reflect_index(y + i, img.height), x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

inline Image median_filter(const Image& img, int window) {
  if (window != 3 && window != 5)
    throw std::invalid_argument("median_filter: window must be 3 or 5");
  const int radius = window / 2;
  Image out = img;
  std::vector<double> neighborhood;
  neighborhood.reserve(static_cast<std::size_t>(window) * window);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        neighborhood.clear();
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx)
            neighborhood.push_back(img.at(reflect_index(y + dy, img.height),
                                          reflect_index(x + dx, img.width), c));
        auto mid = neighborhood.begin() +
                   static_cast<std::ptrdiff_t>(neighborhood.size() / 2);
        std::nth_element(neighborhood.begin(), mid, neighborhood.end());
        out.at(y, x, c) = *mid;
      }
  return out;
}

inline Image mean_filter3(const Image& img) {
  Image out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx)
            acc += img.at(reflect_index(y + dy, img.height),
                          reflect_index(x + dx, img.width), c);
        out.at(y, x, c) = acc / 9.0;
      }
  return out;
}

inline Image histogram_stretch(const Image& img) {
  Image out = img;
  for (int c = 0; c < img.channels; ++c) {
    double lo = 1.0, hi = 0.0;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x) {
        lo = std::min(lo, img.at(y, x, c));
        hi = std::max(hi, img.at(y, x, c));
      }
    if (hi - lo < 1e-6) continue;
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        out.at(y, x, c) = (img.at(y, x, c) - lo) / (hi - lo);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Operator registry
// ---------------------------------------------------------------------------

struct OperatorDescriptor {
  std::string id;
  TaskKind task_kind = TaskKind::identity;
  std::set<Tag> eligibility_tags;
  Provenance provenance = Provenance::training_pool;
  bool is_identity = false;
  // Exactly one kernel is set: image->image or image->class probabilities.
  std::function<Image(const Image&)> image_fn;
  std::function<std::vector<double>(const Image&)> classify_fn;
  // Manifest round-trip fields.
  std::string op_name;  // gamma | blur | median | mean3 | stretch | identity | classifier
  double param = 0.0;
  std::string checkpoint_file;   // classifiers only
  std::shared_ptr<const DenseNet> classifier_net;  // audit access, classifiers only
};

inline std::vector<double> classify(const OperatorDescriptor& op,
                                    const Image& img) {
  if (op.task_kind != TaskKind::classification || !op.classify_fn)
    throw std::invalid_argument("classify: not a classifier operator");
  return op.classify_fn(img);
}

class OperatorRegistry {
 public:
  void register_operator(OperatorDescriptor desc) {
    if (index_.count(desc.id))
      throw std::invalid_argument("duplicate operator id: " + desc.id);
    index_[desc.id] = ops_.size();
    ops_.push_back(std::move(desc));
  }

  const OperatorDescriptor& by_id(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end())
      throw std::out_of_range("unknown operator id: " + id);
    return ops_[it->second];
  }

  bool contains(const std::string& id) const { return index_.count(id) > 0; }

  std::vector<OperatorDescriptor> filter(
      TaskKind task,
      std::optional<Provenance> provenance = std::nullopt) const {
    std::vector<OperatorDescriptor> out;
    for (const auto& op : ops_) {
      if (op.task_kind != task) continue;
      if (provenance && op.provenance != *provenance) continue;
      out.push_back(op);
    }
    return out;
  }

  std::vector<OperatorDescriptor> query_eligible(TaskKind task, Tag tag) const {
    std::vector<OperatorDescriptor> out;
    for (const auto& op : ops_)
      if (op.task_kind == task && op.eligibility_tags.count(tag))
        out.push_back(op);
    return out;
  }

  const std::vector<OperatorDescriptor>& all() const { return ops_; }

 private:
  std::vector<OperatorDescriptor> ops_;
  std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Standard pool
// ---------------------------------------------------------------------------

namespace detail {

inline OperatorDescriptor gamma_op(const std::string& id, double g,
                                   Tag exposure_tag, Provenance prov) {
  OperatorDescriptor d;
  d.id = id;
  d.task_kind = TaskKind::exposure_correction;
  d.eligibility_tags = {exposure_tag};
  d.provenance = prov;
  d.op_name = "gamma";
  d.param = g;
  d.image_fn = [g](const Image& img) { return apply_gamma(img, g); };
  return d;
}

inline OperatorDescriptor blur_op(const std::string& id, double sigma,
                                  std::set<Tag> tags, Provenance prov) {
  OperatorDescriptor d;
  d.id = id;
  d.task_kind = TaskKind::denoising;
  d.eligibility_tags = std::move(tags);
  d.provenance = prov;
  d.op_name = "blur";
  d.param = sigma;
  d.image_fn = [sigma](const Image& img) { return gaussian_blur(img, sigma); };
  return d;
}

inline OperatorDescriptor median_op(const std::string& id, int window,
                                    std::set<Tag> tags, Provenance prov) {
  OperatorDescriptor d;
  d.id = id;
  d.task_kind = TaskKind::denoising;
  d.eligibility_tags = std::move(tags);
  d.provenance = prov;
  d.op_name = "median";
  d.param = window;
  d.image_fn = [window](const Image& img) { return median_filter(img, window); };
  return d;
}

inline std::set<Tag> all_tags() {
  return {Tag::under_exposed, Tag::well_exposed, Tag::over_exposed,
          Tag::no_noise, Tag::low_noise, Tag::mid_noise, Tag::high_noise};
}

inline OperatorDescriptor identity_op(const std::string& id, TaskKind task) {
  OperatorDescriptor d;
  d.id = id;
  d.task_kind = task;
  d.eligibility_tags = all_tags();
  d.is_identity = true;
  d.op_name = "identity";
  d.image_fn = [](const Image& img) { return img; };
  return d;
}

}  // namespace detail

inline OperatorDescriptor make_classifier_op(const std::string& id,
                                             DenseNet net,
                                             const std::string& checkpoint_file =
                                                 "") {
  OperatorDescriptor d;
  d.id = id;
  d.task_kind = TaskKind::classification;
  d.eligibility_tags = detail::all_tags();
  d.op_name = "classifier";
  d.checkpoint_file = checkpoint_file;
  auto shared = std::make_shared<const DenseNet>(std::move(net));
  d.classifier_net = shared;
  d.classify_fn = [shared](const Image& img) {
    if (static_cast<int>(img.size()) != shared->input_size())
      throw std::invalid_argument("classify: image size mismatch");
    return forward(*shared, img.pixels);
  };
  return d;
}

// The standard algorithm pool.  Train/unseen split: brighteners
// {0.45, 0.55}, darkener {2.0} and blur {1.5} form the unseen pool.
inline OperatorRegistry build_standard_registry(
    std::vector<OperatorDescriptor> classifiers = {}) {
  using detail::blur_op;
  using detail::gamma_op;
  using detail::median_op;
  OperatorRegistry reg;
  // Brighteners (for under-exposed inputs).
  reg.register_operator(gamma_op("brighten_0.40", 0.40, Tag::under_exposed,
                                 Provenance::training_pool));
  reg.register_operator(gamma_op("brighten_0.45", 0.45, Tag::under_exposed,
                                 Provenance::unseen_pool));
  reg.register_operator(gamma_op("brighten_0.50", 0.50, Tag::under_exposed,
                                 Provenance::training_pool));
  reg.register_operator(gamma_op("brighten_0.55", 0.55, Tag::under_exposed,
                                 Provenance::unseen_pool));
  // Darkeners (for over-exposed inputs).
  reg.register_operator(gamma_op("darken_1.8", 1.8, Tag::over_exposed,
                                 Provenance::training_pool));
  reg.register_operator(gamma_op("darken_2.0", 2.0, Tag::over_exposed,
                                 Provenance::unseen_pool));
  reg.register_operator(gamma_op("darken_2.2", 2.2, Tag::over_exposed,
                                 Provenance::training_pool));
  reg.register_operator(gamma_op("darken_2.5", 2.5, Tag::over_exposed,
                                 Provenance::training_pool));
  {
    OperatorDescriptor d;
    d.id = "stretch";
    d.task_kind = TaskKind::exposure_correction;
    d.eligibility_tags = {Tag::well_exposed};
    d.op_name = "stretch";
    d.image_fn = [](const Image& img) { return histogram_stretch(img); };
    reg.register_operator(std::move(d));
  }
  reg.register_operator(
      detail::identity_op("identity_exposure", TaskKind::exposure_correction));
  // Denoisers.
  // Denoisers share one broad eligibility set: any declared noise level.
  // Matching the filter strength to the noise level is the policy's job,
  // not the knowledge base's.
  const std::set<Tag> noisy = {Tag::low_noise, Tag::mid_noise, Tag::high_noise};
  reg.register_operator(blur_op("blur_0.5", 0.5, noisy,
                                Provenance::training_pool));
  reg.register_operator(blur_op("blur_1.0", 1.0, noisy,
                                Provenance::training_pool));
  reg.register_operator(blur_op("blur_1.5", 1.5, noisy,
                                Provenance::unseen_pool));
  reg.register_operator(median_op("median_3", 3, noisy,
                                  Provenance::training_pool));
  reg.register_operator(median_op("median_5", 5, noisy,
                                  Provenance::training_pool));
  {
    OperatorDescriptor d;
    d.id = "mean_3";
    d.task_kind = TaskKind::denoising;
    d.eligibility_tags = noisy;
    d.op_name = "mean3";
    d.image_fn = [](const Image& img) { return mean_filter3(img); };
    reg.register_operator(std::move(d));
  }
  reg.register_operator(
      detail::identity_op("identity_denoise", TaskKind::denoising));
  for (auto& c : classifiers) reg.register_operator(std::move(c));
  return reg;
}

// ---------------------------------------------------------------------------
// Registry manifest (text, one record per line)
// ---------------------------------------------------------------------------

inline std::string manifest_record(const OperatorDescriptor& op) {
  std::string tags;
  for (Tag t : op.eligibility_tags) {
    if (!tags.empty()) tags += ",";
    tags += tag_name(t);
  }
  char param[32];
  std::snprintf(param, sizeof(param), "%.17g", op.param);
  std::string rec = "id=" + op.id + "\ttask=" + task_kind_name(op.task_kind) +
                    "\top=" + op.op_name + "\tparam=" + param +
                    "\ttags=" + tags + "\tprovenance=" +
                    (op.provenance == Provenance::training_pool ? "training_pool"
                                                                : "unseen_pool");
  if (!op.checkpoint_file.empty()) rec += "\tcheckpoint=" + op.checkpoint_file;
  return rec;
}

inline void save_manifest(const OperatorRegistry& reg,
                          const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  for (const auto& op : reg.all()) os << manifest_record(op) << "\n";
}

// Rebuilds a registry from a manifest.  Classifier records name a checkpoint
// file resolved relative to the manifest's directory.
inline OperatorRegistry load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  OperatorRegistry reg;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::map<std::string, std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, '\t')) {
      auto eq = field.find('=');
      if (eq == std::string::npos)
        throw std::runtime_error("manifest: bad field " + field);
      fields[field.substr(0, eq)] = field.substr(eq + 1);
    }
    OperatorDescriptor d;
    d.id = fields.at("id");
    d.task_kind = parse_task_kind(fields.at("task"));
    d.op_name = fields.at("op");
    d.param = std::stod(fields.at("param"));
    std::istringstream ts(fields.at("tags"));
    std::string tag;
    while (std::getline(ts, tag, ',')) d.eligibility_tags.insert(parse_tag(tag));
    d.provenance = fields.at("provenance") == "unseen_pool"
                       ? Provenance::unseen_pool
                       : Provenance::training_pool;
    const double p = d.param;
    if (d.op_name == "gamma") {
      d.image_fn = [p](const Image& img) { return apply_gamma(img, p); };
    } else if (d.op_name == "blur") {
      d.image_fn = [p](const Image& img) { return gaussian_blur(img, p); };
    } else if (d.op_name == "median") {
      const int w = static_cast<int>(p);
      d.image_fn = [w](const Image& img) { return median_filter(img, w); };
    } else if (d.op_name == "mean3") {
      d.image_fn = [](const Image& img) { return mean_filter3(img); };
    } else if (d.op_name == "stretch") {
      d.image_fn = [](const Image& img) { return histogram_stretch(img); };
    } else if (d.op_name == "identity") {
      d.is_identity = true;
      d.image_fn = [](const Image& img) { return img; };
    } else if (d.op_name == "classifier") {
      d.checkpoint_file = fields.at("checkpoint");
      Checkpoint cp = load_checkpoint(path.parent_path() / d.checkpoint_file);
      auto shared = std::make_shared<const DenseNet>(cp.nets.at("net"));
      d.classifier_net = shared;
      d.classify_fn = [shared](const Image& img) {
        if (static_cast<int>(img.size()) != shared->input_size())
          throw std::invalid_argument("classify: image size mismatch");
        return forward(*shared, img.pixels);
      };
    } else {
      throw std::runtime_error("manifest: unknown op " + d.op_name);
    }
    reg.register_operator(std::move(d));
  }
  return reg;
}

}  // namespace pipeforge
