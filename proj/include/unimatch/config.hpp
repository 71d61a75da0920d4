#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "unimatch/model.hpp"

namespace unimatch {

/// Flat `key = value` text; `#` starts a comment. Lookups are recorded so
/// unused (misspelled) keys can be reported.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& origin = "<text>");
  static KeyValues load(const std::string& path);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  long get_int(const std::string& key, long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  std::string str() const;

  /// Keys that were never looked up.
  std::vector<std::string> unused() const;
  /// ConfigError naming every unused key.
  void reject_unused() const;

 private:
  const std::string* find(const std::string& key) const;
  std::map<std::string, std::string> values_;
  std::string origin_;
  mutable std::set<std::string> used_;
};

/// Reads model keys (stem_channels, stem_kernel, backbone_blocks, feature_dim,
/// num_blocks, splits, ffn_ratio, num_scales, refine_window, refine_splits,
/// upsample_hidden, seed) on top of `base`.
ModelConfig read_model_config(const KeyValues& kv, ModelConfig base);
void write_model_config(const ModelConfig& cfg, KeyValues& kv);

}  // namespace unimatch
