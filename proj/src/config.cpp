// Copyright 2026 The GM-DF Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gmdf/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "gmdf/core.hpp"
#include "gmdf/params.hpp"

namespace gmdf {

namespace {

/// Reads keys from one JSON object and rejects any key it was not asked for.
class Reader {
 public:
  Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const Json::exception& e) {
      throw ConfigError(where() + "." + key + ": " + e.what());
    }
  }

  void get_path(const char* key, std::filesystem::path& out) {
    std::string s = out.string();
    get(key, s);
    out = s;
  }

  template <typename T, typename Parse>
  void get_enum(const char* key, T& out, Parse parse) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    if (!it->is_string()) throw ConfigError(where() + "." + key + ": expected a string");
    out = parse(it->template get<std::string>());
  }

  bool has(const char* key) const { return j_.contains(key); }

  Reader sub(const char* key) {
    used_.insert(key);
    return Reader(j_.at(key), path_ + "." + key);
  }

  const Json& raw(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ConfigError(where() + ": unknown key '" + it.key() + "'");
    }
  }

  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

syndata::DomainSpec parse_domain(const Json& j, const std::string& path) {
  Reader r(j, path);
  syndata::DomainSpec d;
  r.get("domain_name", d.domain_name);
  r.get_enum("background_style", d.background_style, syndata::parse_background);
  std::vector<double> tint(d.tint_rgb.begin(), d.tint_rgb.end());
  r.get("tint_rgb", tint);
  if (tint.size() != 3) throw ConfigError(path + ".tint_rgb: expected 3 values");
  for (int c = 0; c < 3; ++c) d.tint_rgb[static_cast<std::size_t>(c)] = tint[static_cast<std::size_t>(c)];
  r.get("blur_sigma", d.blur_sigma);
  r.get("face_proxy_scale", d.face_proxy_scale);
  r.get_enum("forgery_method", d.forgery_method, syndata::parse_forgery);
  r.get("n_real", d.n_real);
  r.get("n_fake", d.n_fake);
  r.get("seed", d.seed);
  r.get("image_size", d.image_size);
  r.finish();
  d.validate();
  return d;
}

}  // namespace

DataSpec parse_data_spec(const Json& j) {
  Reader r(j, "spec");
  DataSpec s;
  r.get("seed", s.seed);
  if (!r.has("domains")) throw ConfigError("spec: missing 'domains'");
  const Json& arr = r.raw("domains");
  if (!arr.is_array() || arr.empty()) throw ConfigError("spec.domains: expected a non-empty array");
  std::set<std::string> names;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    syndata::DomainSpec d = parse_domain(arr[i], "spec.domains[" + std::to_string(i) + "]");
    if (!arr[i].contains("seed")) d.seed = mix64(s.seed + i);
    if (!names.insert(d.domain_name).second) throw ConfigError("spec: duplicate domain " + d.domain_name);
    s.domains.push_back(d);
  }
  r.finish();
  return s;
}

Json to_json(const DataSpec& s) {
  Json arr = Json::array();
  for (const auto& d : s.domains) {
    arr.push_back({{"domain_name", d.domain_name},
                   {"background_style", syndata::to_string(d.background_style)},
                   {"tint_rgb", {d.tint_rgb[0], d.tint_rgb[1], d.tint_rgb[2]}},
                   {"blur_sigma", d.blur_sigma},
                   {"face_proxy_scale", d.face_proxy_scale},
                   {"forgery_method", syndata::to_string(d.forgery_method)},
                   {"n_real", d.n_real},
                   {"n_fake", d.n_fake},
                   {"seed", d.seed},
                   {"image_size", d.image_size}});
  }
  return {{"seed", s.seed}, {"domains", arr}};
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kGmdf: return "gmdf";
    case Method::kMerged: return "merged_baseline";
    case Method::kSingleDomain: return "single_domain_baseline";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  if (s == "gmdf") return Method::kGmdf;
  if (s == "merged_baseline" || s == "merged") return Method::kMerged;
  if (s == "single_domain_baseline" || s == "single") return Method::kSingleDomain;
  throw ConfigError("unknown method: " + s);
}

void MetaConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("meta.beta must be > 0");
  if (!(delta > 0.0)) throw ConfigError("meta.delta must be > 0");
  if (epochs < 1) throw ConfigError("meta.epochs must be >= 1");
  if (batch_size < 2) throw ConfigError("meta.batch_size must be >= 2");
  if (batches_per_epoch < 0) throw ConfigError("meta.batches_per_epoch must be >= 0");
}

void ExperimentConfig::validate() const {
  backbone.validate();
  dseg.validate();
  meta.validate();
  if (protocol.domains.size() < 2) throw ConfigError("protocol.domains must list at least 2 domains");
  if (method == Method::kSingleDomain && single_domain.empty()) {
    throw ConfigError("single_domain must name the training domain for the single-domain baseline");
  }
  if (!(mim.mask_ratio >= 0.0 && mim.mask_ratio <= 1.0)) throw ConfigError("mim.mask_ratio must be in [0, 1]");
  if (mim.tokenizer.codebook_size < 2) throw ConfigError("mim.codebook_size must be >= 2");
}

namespace {

Threshold parse_threshold(const std::string& s) {
  if (s == "per_domain") return Threshold::kPerDomain;
  if (s == "global") return Threshold::kGlobal;
  throw ConfigError("unknown threshold mode: " + s);
}

std::string threshold_name(Threshold t) { return t == Threshold::kGlobal ? "global" : "per_domain"; }

}  // namespace

ExperimentConfig parse_experiment(const Json& j) {
  ExperimentConfig c;
  Reader r(j, "");
  r.get("seed", c.seed);
  r.get_path("data_root", c.data_root);
  r.get_enum("method", c.method, parse_method);
  r.get("single_domain", c.single_domain);
  r.get("prompt_template", c.prompt_template);
  r.get_path("prompt_file", c.prompt_file);
  r.get_enum("threshold", c.threshold, parse_threshold);
  if (r.has("protocol")) {
    Reader p = r.sub("protocol");
    p.get("domains", c.protocol.domains);
    p.get("heldout", c.protocol.heldout);
    p.get("eval", c.protocol.eval);
    p.finish();
  }
  if (r.has("components")) {
    Reader p = r.sub("components");
    p.get("meta_moe", c.components.meta_moe);
    p.get("da", c.components.da);
    p.get("mim", c.components.mim);
    p.finish();
  }
  if (r.has("backbone")) {
    Reader p = r.sub("backbone");
    p.get("image_size", c.backbone.image_size);
    p.get("patch_size", c.backbone.patch_size);
    p.get("embed_dim", c.backbone.embed_dim);
    p.get("n_layers", c.backbone.n_layers);
    p.get("n_heads", c.backbone.n_heads);
    p.get("mlp_ratio", c.backbone.mlp_ratio);
    p.get("ln_eps", c.backbone.ln_eps);
    p.finish();
  }
  if (r.has("dseg")) {
    Reader p = r.sub("dseg");
    p.get_enum("strategy", c.dseg.strategy, dseg::parse_strategy);
    p.get("prompt_dim", c.dseg.prompt_dim);
    p.get("expert_hidden", c.dseg.expert_hidden);
    p.get("cross_segments", c.dseg.cross_segments);
    p.get("aggregate_mean", c.dseg.aggregate_mean);
    p.get("moe_last_k", c.dseg.moe_last_k);
    p.finish();
  }
  if (r.has("text")) {
    Reader p = r.sub("text");
    p.get("buckets", c.text.buckets);
    p.get("ngram", c.text.ngram);
    p.get("table_dim", c.text.table_dim);
    p.get("hidden", c.text.hidden);
    p.finish();
  }
  if (r.has("mim")) {
    Reader p = r.sub("mim");
    p.get("codebook_size", c.mim.tokenizer.codebook_size);
    p.get("code_dim", c.mim.tokenizer.code_dim);
    p.get("tokenizer_epochs", c.mim.tokenizer.epochs);
    p.get("tokenizer_batch_size", c.mim.tokenizer.batch_size);
    p.get("tokenizer_lr", c.mim.tokenizer.lr);
    p.get("tau_start", c.mim.tokenizer.tau_start);
    p.get("tau_end", c.mim.tokenizer.tau_end);
    p.get("tokenizer_patches", c.mim.tokenizer_patches);
    p.get("mask_ratio", c.mim.mask_ratio);
    p.get_enum("mask_strategy", c.mim.mask_strategy, mim::parse_mask_strategy);
    p.finish();
  }
  if (r.has("meta")) {
    Reader p = r.sub("meta");
    p.get("beta", c.meta.beta);
    p.get("delta", c.meta.delta);
    p.get_enum("outer_optimizer", c.meta.outer_optimizer, parse_optimizer);
    p.get("epochs", c.meta.epochs);
    p.get("batches_per_epoch", c.meta.batches_per_epoch);
    p.get("batch_size", c.meta.batch_size);
    p.get("second_order", c.meta.second_order);
    p.get("outer_cls", c.meta.outer_cls);
    p.get("random_rotation", c.meta.random_rotation);
    if (p.has("weights")) {
      Reader w = p.sub("weights");
      w.get("sis", c.meta.weights.sis);
      w.get("cls", c.meta.weights.cls);
      w.get("mim", c.meta.weights.mim);
      w.finish();
    }
    p.finish();
  }
  r.finish();
  c.validate();
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["data_root"] = c.data_root.string();
  j["method"] = to_string(c.method);
  j["single_domain"] = c.single_domain;
  j["prompt_template"] = c.prompt_template;
  j["prompt_file"] = c.prompt_file.string();
  j["threshold"] = threshold_name(c.threshold);
  j["protocol"] = {{"domains", c.protocol.domains}, {"heldout", c.protocol.heldout}, {"eval", c.protocol.eval}};
  j["components"] = {{"meta_moe", c.components.meta_moe}, {"da", c.components.da}, {"mim", c.components.mim}};
  const auto& b = c.backbone;
  j["backbone"] = {{"image_size", b.image_size}, {"patch_size", b.patch_size}, {"embed_dim", b.embed_dim},
                   {"n_layers", b.n_layers},     {"n_heads", b.n_heads},       {"mlp_ratio", b.mlp_ratio},
                   {"ln_eps", b.ln_eps}};
  const auto& d = c.dseg;
  j["dseg"] = {{"strategy", dseg::to_string(d.strategy)}, {"prompt_dim", d.prompt_dim},
               {"expert_hidden", d.expert_hidden},         {"cross_segments", d.cross_segments},
               {"aggregate_mean", d.aggregate_mean},       {"moe_last_k", d.moe_last_k}};
  j["text"] = {{"buckets", c.text.buckets},
               {"ngram", c.text.ngram},
               {"table_dim", c.text.table_dim},
               {"hidden", c.text.hidden}};
  const auto& t = c.mim.tokenizer;
  j["mim"] = {{"codebook_size", t.codebook_size},
              {"code_dim", t.code_dim},
              {"tokenizer_epochs", t.epochs},
              {"tokenizer_batch_size", t.batch_size},
              {"tokenizer_lr", t.lr},
              {"tau_start", t.tau_start},
              {"tau_end", t.tau_end},
              {"tokenizer_patches", c.mim.tokenizer_patches},
              {"mask_ratio", c.mim.mask_ratio},
              {"mask_strategy", mim::to_string(c.mim.mask_strategy)}};
  const auto& m = c.meta;
  j["meta"] = {{"beta", m.beta},
               {"delta", m.delta},
               {"outer_optimizer", to_string(m.outer_optimizer)},
               {"epochs", m.epochs},
               {"batches_per_epoch", m.batches_per_epoch},
               {"batch_size", m.batch_size},
               {"second_order", m.second_order},
               {"outer_cls", m.outer_cls},
               {"random_rotation", m.random_rotation},
               {"weights", {{"sis", m.weights.sis}, {"cls", m.weights.cls}, {"mim", m.weights.mim}}}};
  return j;
}

std::string config_digest(const Json& j) { return sha256_hex(j.dump()); }

std::string config_digest(const ExperimentConfig& c) { return config_digest(to_json(c)); }

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read " + path.string());
  try {
    return Json::parse(is);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

}  // namespace gmdf
