#include "mtnetkit/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <sstream>

#include "mtnetkit/error.hpp"
#include "mtnetkit/rng.hpp"

namespace mtnet {

using nlohmann::json;

void RunConfig::reseed() {
  backbone.seed = derive_seed(seed, 1);
  modality.seed = derive_seed(seed, 2);
  fusion.seed = derive_seed(seed, 3);
}

std::uint64_t RunConfig::head_seed() const noexcept { return derive_seed(seed, 4); }

void RunConfig::validate() const {
  backbone.validate();
  fusion.validate();
  loss.validate();
  update.validate();
  if (modality.reduction == 0) throw ConfigError("modality.reduction must be positive");
  if (backbone.channels % fusion.heads != 0) {
    throw ConfigError("backbone.channels must be divisible by fusion.heads");
  }
  if (!(tracker.window_weight >= 0.0 && tracker.window_weight <= 1.0)) {
    throw ConfigError("tracker.window_weight must lie in [0,1]");
  }
  if (!(tracker.min_box_side > 0.0)) throw ConfigError("tracker.min_box_side must be positive");
}

namespace {

// Reads known keys from one JSON object and rejects anything else.
class Section {
 public:
  Section(const json& node, std::string path, std::initializer_list<const char*> keys)
      : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(label() + " must be a JSON object");
    for (const auto& item : node_.items()) {
      if (std::none_of(keys.begin(), keys.end(),
                       [&](const char* k) { return item.key() == k; })) {
        throw ConfigError("unknown configuration key '" + qualified(item.key()) + "'");
      }
    }
  }

  template <typename T>
  void read(const char* key, T& out) const {
    if (!node_.contains(key)) return;
    try {
      const json& v = node_.at(key);
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("expected boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("expected integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
            throw ConfigError("expected non-negative integer");
          }
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("expected number");
      }
      out = v.get<T>();
    } catch (const ConfigError& e) {
      throw ConfigError(qualified(key) + ": " + e.what());
    } catch (const json::exception& e) {
      throw ConfigError(qualified(key) + ": " + e.what());
    }
  }

  bool has(const char* key) const { return node_.contains(key); }
  const json& child(const char* key) const { return node_.at(key); }
  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  std::string label() const { return path_.empty() ? "configuration" : "'" + path_ + "'"; }

  const json& node_;
  std::string path_;
};

}  // namespace

RunConfig parse_run_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  const Section top(root, "",
                    {"seed", "backbone", "modality", "fusion", "loss", "update", "tracker"});
  top.read("seed", cfg.seed);
  cfg.reseed();

  if (top.has("backbone")) {
    const Section s(top.child("backbone"), "backbone",
                    {"channels", "template_size", "search_size", "template_scale",
                     "search_scale", "stage_channels"});
    s.read("channels", cfg.backbone.channels);
    s.read("template_size", cfg.backbone.template_size);
    s.read("search_size", cfg.backbone.search_size);
    s.read("template_scale", cfg.backbone.template_scale);
    s.read("search_scale", cfg.backbone.search_scale);
    if (s.has("stage_channels")) {
      const json& v = s.child("stage_channels");
      if (!v.is_array() || v.size() != 3 ||
          !std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_number_unsigned(); })) {
        throw ConfigError("backbone.stage_channels must be three positive integers");
      }
      for (std::size_t i = 0; i < 3; ++i) cfg.backbone.stage_channels[i] = v[i].get<std::size_t>();
    }
  }
  if (top.has("modality")) {
    const Section s(top.child("modality"), "modality", {"reduction", "min_dims"});
    s.read("reduction", cfg.modality.reduction);
    s.read("min_dims", cfg.modality.min_dims);
  }
  if (top.has("fusion")) {
    const Section s(top.child("fusion"), "fusion",
                    {"dim", "heads", "layers", "ffn_mult", "use_pos"});
    s.read("dim", cfg.fusion.dim);
    s.read("heads", cfg.fusion.heads);
    s.read("layers", cfg.fusion.layers);
    s.read("ffn_mult", cfg.fusion.ffn_mult);
    s.read("use_pos", cfg.fusion.use_pos);
  }
  if (top.has("loss")) {
    const Section s(top.child("loss"), "loss",
                    {"lambda_l1", "lambda_ciou", "n_cls", "n_reg", "n_loc"});
    s.read("lambda_l1", cfg.loss.lambda_l1);
    s.read("lambda_ciou", cfg.loss.lambda_ciou);
    s.read("n_cls", cfg.loss.n_cls);
    s.read("n_reg", cfg.loss.n_reg);
    s.read("n_loc", cfg.loss.n_loc);
  }
  if (top.has("update")) {
    const Section s(top.child("update"), "update", {"M", "N", "hi", "lo"});
    s.read("M", cfg.update.steady_frames);
    s.read("N", cfg.update.unstable_frames);
    s.read("hi", cfg.update.hi);
    s.read("lo", cfg.update.lo);
  }
  if (top.has("tracker")) {
    const Section s(top.child("tracker"), "tracker", {"window_weight", "min_box_side"});
    s.read("window_weight", cfg.tracker.window_weight);
    s.read("min_box_side", cfg.tracker.min_box_side);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string to_json(const RunConfig& c) {
  const nlohmann::ordered_json doc = {
      {"seed", c.seed},
      {"backbone",
       {{"channels", c.backbone.channels},
        {"template_size", c.backbone.template_size},
        {"search_size", c.backbone.search_size},
        {"template_scale", c.backbone.template_scale},
        {"search_scale", c.backbone.search_scale},
        {"stage_channels", c.backbone.stage_channels}}},
      {"modality", {{"reduction", c.modality.reduction}, {"min_dims", c.modality.min_dims}}},
      {"fusion",
       {{"dim", c.fusion.dim},
        {"heads", c.fusion.heads},
        {"layers", c.fusion.layers},
        {"ffn_mult", c.fusion.ffn_mult},
        {"use_pos", c.fusion.use_pos}}},
      {"loss",
       {{"lambda_l1", c.loss.lambda_l1},
        {"lambda_ciou", c.loss.lambda_ciou},
        {"n_cls", c.loss.n_cls},
        {"n_reg", c.loss.n_reg},
        {"n_loc", c.loss.n_loc}}},
      {"update",
       {{"M", c.update.steady_frames},
        {"N", c.update.unstable_frames},
        {"hi", c.update.hi},
        {"lo", c.update.lo}}},
      {"tracker",
       {{"window_weight", c.tracker.window_weight}, {"min_box_side", c.tracker.min_box_side}}},
  };
  return doc.dump(2);
}

}  // namespace mtnet
