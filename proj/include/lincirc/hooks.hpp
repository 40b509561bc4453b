#pragma once

#include <string>
#include <tuple>

#include "lincirc/util.hpp"

namespace lincirc {

// Residual-stream hook sites. WordEmbed, AttnOut and Mlp are the writer
// sites that dictionaries decompose into graph nodes; the two Resid sites are
// read-out probes with their own SAEs.
enum class Site : int {
  WordEmbed = 0,
  AttnOut = 1,
  ResidPreAttn = 2,
  ResidPreMlp = 3,
  Mlp = 4,
};

inline const char* site_name(Site s) {
  switch (s) {
    case Site::WordEmbed: return "embed";
    case Site::AttnOut: return "attn";
    case Site::ResidPreAttn: return "resid_pre_attn";
    case Site::ResidPreMlp: return "resid_pre_mlp";
    case Site::Mlp: return "mlp";
  }
  return "?";
}

inline Site site_from_name(const std::string& s) {
  if (s == "embed") return Site::WordEmbed;
  if (s == "attn") return Site::AttnOut;
  if (s == "resid_pre_attn") return Site::ResidPreAttn;
  if (s == "resid_pre_mlp") return Site::ResidPreMlp;
  if (s == "mlp") return Site::Mlp;
  fail("config-error", "unknown site: " + s);
}

struct HookPoint {
  Site site = Site::WordEmbed;
  int layer = 0;  // ignored for WordEmbed

  std::string key() const {
    if (site == Site::WordEmbed) return "embed";
    return std::string(site_name(site)) + "." + std::to_string(layer);
  }
  bool operator==(const HookPoint& o) const {
    return site == o.site && (site == Site::WordEmbed || layer == o.layer);
  }
  bool operator<(const HookPoint& o) const {
    return std::tuple(static_cast<int>(site), site == Site::WordEmbed ? 0 : layer) <
           std::tuple(static_cast<int>(o.site), o.site == Site::WordEmbed ? 0 : o.layer);
  }
};

inline HookPoint hook_from_key(const std::string& key) {
  if (key == "embed") return {Site::WordEmbed, 0};
  auto dotpos = key.rfind('.');
  if (dotpos == std::string::npos) fail("config-error", "bad hook key: " + key);
  return {site_from_name(key.substr(0, dotpos)), std::stoi(key.substr(dotpos + 1))};
}

}  // namespace lincirc
