#include "unimatch/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "unimatch/errors.hpp"

namespace unimatch {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string blocks_to_string(const std::vector<ResidualStage>& blocks) {
  std::string out;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    out += (i ? "," : "") + std::to_string(blocks[i].channels) + ":" +
           std::to_string(blocks[i].stride);
  }
  return out;
}

std::vector<ResidualStage> blocks_from_string(const std::string& text) {
  std::vector<ResidualStage> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    const auto colon = item.find(':');
    try {
      if (colon == std::string::npos) {
        out.push_back({std::stoi(item), 1});
      } else {
        out.push_back({std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1))});
      }
    } catch (const std::logic_error&) {
      throw ConfigError("backbone_blocks: cannot parse '" + item + "' (expected width:stride)");
    }
  }
  return out;
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& origin) {
  KeyValues kv;
  kv.origin_ = origin;
  std::stringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(number) + ": empty key");
    if (kv.values_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    }
    kv.values_[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues KeyValues::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

const std::string* KeyValues::find(const std::string& key) const {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

bool KeyValues::has(const std::string& key) const { return values_.count(key) > 0; }

std::string KeyValues::get(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? *v : fallback;
}

long KeyValues::get_int(const std::string& key, long fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  long out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError(origin_ + ": key '" + key + "' expects an integer, got '" + *v + "'");
  }
  return out;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double out = std::stod(*v, &used);
    if (used == v->size()) return out;
  } catch (const std::logic_error&) {
  }
  throw ConfigError(origin_ + ": key '" + key + "' expects a number, got '" + *v + "'");
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  if (*v == "1" || *v == "true" || *v == "yes") return true;
  if (*v == "0" || *v == "false" || *v == "no") return false;
  throw ConfigError(origin_ + ": key '" + key + "' expects a boolean, got '" + *v + "'");
}

std::string KeyValues::str() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::vector<std::string> KeyValues::unused() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

void KeyValues::reject_unused() const {
  const auto keys = unused();
  if (keys.empty()) return;
  std::string msg = origin_ + ": unknown key(s):";
  for (const auto& k : keys) msg += " " + k;
  throw ConfigError(msg);
}

ModelConfig read_model_config(const KeyValues& kv, ModelConfig base) {
  ModelConfig c = std::move(base);
  c.backbone.stem_channels = static_cast<int>(kv.get_int("stem_channels", c.backbone.stem_channels));
  c.backbone.stem_kernel = static_cast<int>(kv.get_int("stem_kernel", c.backbone.stem_kernel));
  if (kv.has("backbone_blocks")) c.backbone.blocks = blocks_from_string(kv.get("backbone_blocks", ""));
  c.backbone.feature_dim = static_cast<int>(kv.get_int("feature_dim", c.backbone.feature_dim));
  c.num_blocks = static_cast<int>(kv.get_int("num_blocks", c.num_blocks));
  c.splits = static_cast<int>(kv.get_int("splits", c.splits));
  c.ffn_ratio = static_cast<int>(kv.get_int("ffn_ratio", c.ffn_ratio));
  c.num_scales = static_cast<int>(kv.get_int("num_scales", c.num_scales));
  c.refine.window = static_cast<int>(kv.get_int("refine_window", c.refine.window));
  c.refine.splits = static_cast<int>(kv.get_int("refine_splits", c.refine.splits));
  c.upsample_hidden = static_cast<int>(kv.get_int("upsample_hidden", c.upsample_hidden));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long>(c.seed)));
  c.validate();
  return c;
}

void write_model_config(const ModelConfig& c, KeyValues& kv) {
  kv.set("stem_channels", std::to_string(c.backbone.stem_channels));
  kv.set("stem_kernel", std::to_string(c.backbone.stem_kernel));
  kv.set("backbone_blocks", blocks_to_string(c.backbone.blocks));
  kv.set("feature_dim", std::to_string(c.backbone.feature_dim));
  kv.set("num_blocks", std::to_string(c.num_blocks));
  kv.set("splits", std::to_string(c.splits));
  kv.set("ffn_ratio", std::to_string(c.ffn_ratio));
  kv.set("num_scales", std::to_string(c.num_scales));
  kv.set("refine_window", std::to_string(c.refine.window));
  kv.set("refine_splits", std::to_string(c.refine.splits));
  kv.set("upsample_hidden", std::to_string(c.upsample_hidden));
  kv.set("seed", std::to_string(c.seed));
}

}  // namespace unimatch
