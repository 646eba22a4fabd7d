#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pipeforge/nn.hpp"

namespace pipeforge {

// Checkpoint container: a versioned text file holding metadata key-value
// pairs and any number of named DenseNets.  Doubles are written with 17
// significant digits so re-reading reproduces them bit-exactly.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, DenseNet> nets;
};

inline constexpr const char* kNetMagic = "PIPEFORGE-NET-v1";

namespace detail {

inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const char* activation_name(HiddenActivation a) {
  return a == HiddenActivation::tanh ? "tanh" : "relu";
}
inline const char* activation_name(OutputActivation a) {
  return a == OutputActivation::linear ? "linear" : "softmax";
}
inline HiddenActivation parse_hidden(const std::string& s) {
  if (s == "tanh") return HiddenActivation::tanh;
  if (s == "relu") return HiddenActivation::relu;
  throw std::runtime_error("checkpoint: unknown hidden activation " + s);
}
inline OutputActivation parse_output(const std::string& s) {
  if (s == "linear") return OutputActivation::linear;
  if (s == "softmax") return OutputActivation::softmax;
  throw std::runtime_error("checkpoint: unknown output activation " + s);
}

}  // namespace detail

inline void write_checkpoint(const Checkpoint& cp, std::ostream& os) {
  os << kNetMagic << "\n";
  for (const auto& [k, v] : cp.meta) os << "meta " << k << " " << v << "\n";
  for (const auto& [name, net] : cp.nets) {
    os << "net " << name << "\n";
    os << "sizes";
    for (int s : net.layer_sizes) os << " " << s;
    os << "\n";
    os << "hidden " << detail::activation_name(net.hidden_activation) << "\n";
    os << "output " << detail::activation_name(net.output_activation) << "\n";
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
      os << "w " << k;
      for (double v : net.weights[k]) os << " " << detail::fmt_double(v);
      os << "\n";
      os << "b " << k;
      for (double v : net.biases[k]) os << " " << detail::fmt_double(v);
      os << "\n";
    }
  }
}

inline Checkpoint read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kNetMagic)
    throw std::runtime_error("checkpoint: bad magic header");
  Checkpoint cp;
  DenseNet* cur = nullptr;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      cp.meta[key] = value;
    } else if (tag == "net") {
      std::string name;
      ls >> name;
      cur = &cp.nets[name];
    } else if (tag == "sizes") {
      if (!cur) throw std::runtime_error("checkpoint: sizes before net");
      int s;
      while (ls >> s) cur->layer_sizes.push_back(s);
      for (std::size_t k = 0; k + 1 < cur->layer_sizes.size(); ++k) {
        cur->weights.emplace_back(
            static_cast<std::size_t>(cur->layer_sizes[k + 1]) *
                static_cast<std::size_t>(cur->layer_sizes[k]),
            0.0);
        cur->biases.emplace_back(
            static_cast<std::size_t>(cur->layer_sizes[k + 1]), 0.0);
      }
    } else if (tag == "hidden") {
      std::string s;
      ls >> s;
      cur->hidden_activation = detail::parse_hidden(s);
    } else if (tag == "output") {
      std::string s;
      ls >> s;
      cur->output_activation = detail::parse_output(s);
    } else if (tag == "w" || tag == "b") {
      if (!cur) throw std::runtime_error("checkpoint: params before net");
      std::size_t k;
      ls >> k;
      auto& dst = (tag == "w") ? cur->weights.at(k) : cur->biases.at(k);
      for (double& v : dst)
        if (!(ls >> v))
          throw std::runtime_error("checkpoint: truncated parameter row");
    } else {
      throw std::runtime_error("checkpoint: unknown record " + tag);
    }
  }
  return cp;
}

// Atomic write: temp file in the same directory, then rename.
inline void save_checkpoint(const Checkpoint& cp,
                            const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw std::runtime_error("cannot write " + tmp.string());
    write_checkpoint(cp, os);
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  return read_checkpoint(is);
}

// FNV-1a over the serialized text; used by run manifests and the
// frozen-parameter audits.
inline std::uint64_t checkpoint_checksum(const Checkpoint& cp) {
  std::ostringstream os;
  write_checkpoint(cp, os);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : os.str()) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace pipeforge
