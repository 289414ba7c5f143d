// Copyright 2026 The cgsorec Authors
// SPDX-License-Identifier: Apache-2.0

#include "cgsorec/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cgsorec/error.hpp"
#include "cgsorec/serialize.hpp"

namespace cgsorec {
namespace {

using nlohmann::json;

/// Reads typed fields out of one JSON object and rejects unknown keys.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), ErrorKind::kConfig, name() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(ErrorKind::kConfig, field(key) + " has the wrong type");
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string field(const std::string& key) const {
    return where_.empty() ? key : where_ + "." + key;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      require(seen_.count(it.key()) > 0, ErrorKind::kConfig,
              "unknown config field '" + field(it.key()) + "'");
  }

 private:
  std::string name() const { return where_.empty() ? "config" : where_; }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& field, const std::string& rule) {
  require(ok, ErrorKind::kConfig, field + " " + rule);
}

json model_to_json(const ModelConfig& m) {
  json train = to_json(m.train);
  train.erase("seed");  // derived from the root seed
  return {{"schedule",
           {{"T", m.schedule.steps},
            {"beta_start", m.schedule.beta_start},
            {"beta_end", m.schedule.beta_end}}},
          {"hidden", m.hidden},
          {"time_embed_dim", m.time_embed_dim},
          {"train", train}};
}

ModelConfig model_from_json(const json& j, const std::string& where) {
  ModelConfig m;
  Reader r(j, where);
  if (const json* s = r.child("schedule")) {
    Reader rs(*s, where + ".schedule");
    rs.get("T", m.schedule.steps);
    rs.get("beta_start", m.schedule.beta_start);
    rs.get("beta_end", m.schedule.beta_end);
    rs.finish();
  }
  r.get("hidden", m.hidden);
  r.get("time_embed_dim", m.time_embed_dim);
  if (const json* t = r.child("train")) m.train = train_config_from_json(*t);
  r.finish();
  return m;
}

void validate_model(const ModelConfig& m, const std::string& where) {
  check(m.schedule.steps >= 1, where + ".schedule.T", "must be >= 1");
  check(m.schedule.beta_start > 0 && m.schedule.beta_start <= m.schedule.beta_end &&
            m.schedule.beta_end < 1,
        where + ".schedule", "needs 0 < beta_start <= beta_end < 1");
  check(!m.hidden.empty(), where + ".hidden", "needs at least one layer");
  for (int h : m.hidden) check(h >= 1, where + ".hidden", "widths must be >= 1");
  check(m.time_embed_dim >= 2 && m.time_embed_dim % 2 == 0, where + ".time_embed_dim",
        "must be even and >= 2");
  check(m.train.learning_rate > 0, where + ".train.learning_rate", "must be > 0");
  try {
    m.train.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, where + ".train: " + e.what());
  }
}

}  // namespace

json to_json(const NoiseSchedule& sched) {
  return {{"T", sched.steps()}, {"beta_start", sched.beta_start()}, {"beta_end", sched.beta_end()}};
}

NoiseSchedule schedule_from_json(const json& j) {
  return NoiseSchedule(j.at("T").get<int>(), j.at("beta_start").get<double>(),
                       j.at("beta_end").get<double>());
}

json to_json(const TrainConfig& cfg) {
  return {{"batch_size", cfg.batch_size}, {"learning_rate", cfg.learning_rate},
          {"epochs", cfg.epochs},         {"seed", cfg.seed},
          {"beta1", cfg.beta1},           {"beta2", cfg.beta2},
          {"epsilon", cfg.epsilon},       {"patience", cfg.patience},
          {"valid_k", cfg.valid_k}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig cfg;
  Reader r(j, "train");
  r.get("batch_size", cfg.batch_size);
  r.get("learning_rate", cfg.learning_rate);
  r.get("epochs", cfg.epochs);
  r.get("seed", cfg.seed);
  r.get("beta1", cfg.beta1);
  r.get("beta2", cfg.beta2);
  r.get("epsilon", cfg.epsilon);
  r.get("patience", cfg.patience);
  r.get("valid_k", cfg.valid_k);
  r.finish();
  return cfg;
}

json to_json(const GuidanceConfig& cfg) {
  return {{"eta", cfg.eta},       {"gamma", cfg.gamma},           {"w_s", cfg.w_s},
          {"w_r", cfg.w_r},       {"delta", cfg.delta},           {"lambda", cfg.lambda},
          {"t_inf", cfg.t_inf},   {"stochastic", cfg.stochastic}, {"neighbor_keep", cfg.neighbor_keep}};
}

GuidanceConfig guidance_config_from_json(const json& j) {
  GuidanceConfig cfg;
  Reader r(j, "guidance");
  r.get("eta", cfg.eta);
  r.get("gamma", cfg.gamma);
  r.get("w_s", cfg.w_s);
  r.get("w_r", cfg.w_r);
  r.get("delta", cfg.delta);
  r.get("lambda", cfg.lambda);
  r.get("t_inf", cfg.t_inf);
  r.get("stochastic", cfg.stochastic);
  r.get("neighbor_keep", cfg.neighbor_keep);
  r.finish();
  return cfg;
}

int ExperimentConfig::max_k() const { return *std::max_element(ks.begin(), ks.end()); }

void ExperimentConfig::validate(bool check_files) const {
  check(!interactions.empty(), "data.interactions", "is required");
  check(!social.empty(), "data.social", "is required");
  if (check_files) {
    check(std::filesystem::exists(interactions), "data.interactions",
          "file not found: " + interactions);
    check(std::filesystem::exists(social), "data.social", "file not found: " + social);
  }
  check(!n_users || *n_users >= 1, "data.n_users", "must be >= 1");
  check(!n_items || *n_items >= 1, "data.n_items", "must be >= 1");
  check(ratios.train > 0 && ratios.valid >= 0 && ratios.test >= 0 &&
            std::abs(ratios.train + ratios.valid + ratios.test - 1.0) < 1e-9,
        "split.ratios", "must be non-negative and sum to 1");
  check(!debias_cap || *debias_cap >= 1, "split.debias_cap", "must be >= 1 or \"auto\"");
  check(hot_fraction > 0 && hot_fraction < 1, "hot_fraction", "must lie in (0, 1)");
  validate_model(cgd, "cgd");
  validate_model(csd, "csd");
  try {
    guidance.validate(std::min(cgd.schedule.steps, csd.schedule.steps));
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, std::string("guidance: ") + e.what());
  }
  check(!ks.empty(), "eval.ks", "needs at least one K");
  for (int k : ks) check(k >= 1, "eval.ks", "entries must be >= 1");
  check(eval_split == "debiased" || eval_split == "test", "eval.split",
        "must be \"debiased\" or \"test\"");
  check(!output_dir.empty(), "output_dir", "must not be empty");
}

json to_json(const ExperimentConfig& cfg) {
  json data = {{"interactions", cfg.interactions},
               {"social", cfg.social},
               {"symmetrize", cfg.symmetrize}};
  data["n_users"] = cfg.n_users ? json(*cfg.n_users) : json(nullptr);
  data["n_items"] = cfg.n_items ? json(*cfg.n_items) : json(nullptr);
  json split = {{"ratios", {cfg.ratios.train, cfg.ratios.valid, cfg.ratios.test}}};
  split["debias_cap"] = cfg.debias_cap ? json(*cfg.debias_cap) : json("auto");
  return {{"data", data},
          {"split", split},
          {"hot_fraction", cfg.hot_fraction},
          {"seed", cfg.seed},
          {"cgd", model_to_json(cfg.cgd)},
          {"csd", model_to_json(cfg.csd)},
          {"guidance", to_json(cfg.guidance)},
          {"eval",
           {{"ks", cfg.ks}, {"split", cfg.eval_split}, {"per_user_recall", cfg.per_user_recall}}},
          {"output_dir", cfg.output_dir}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
  ExperimentConfig cfg;
  Reader r(j, "");
  if (const json* d = r.child("data")) {
    Reader rd(*d, "data");
    rd.get("interactions", cfg.interactions);
    rd.get("social", cfg.social);
    rd.get_optional("n_users", cfg.n_users);
    rd.get_optional("n_items", cfg.n_items);
    rd.get("symmetrize", cfg.symmetrize);
    rd.finish();
  }
  if (const json* s = r.child("split")) {
    Reader rs(*s, "split");
    std::vector<double> ratios{cfg.ratios.train, cfg.ratios.valid, cfg.ratios.test};
    rs.get("ratios", ratios);
    check(ratios.size() == 3, "split.ratios", "needs exactly three values");
    cfg.ratios = {ratios[0], ratios[1], ratios[2]};
    if (const json* cap = rs.child("debias_cap"); cap && !cap->is_null()) {
      if (cap->is_string()) {
        check(cap->get<std::string>() == "auto", "split.debias_cap", "must be an integer or \"auto\"");
      } else {
        check(cap->is_number_integer(), "split.debias_cap", "must be an integer or \"auto\"");
        cfg.debias_cap = cap->get<int>();
      }
    }
    rs.finish();
  }
  r.get("hot_fraction", cfg.hot_fraction);
  r.get("seed", cfg.seed);
  if (const json* m = r.child("cgd")) cfg.cgd = model_from_json(*m, "cgd");
  if (const json* m = r.child("csd")) cfg.csd = model_from_json(*m, "csd");
  if (const json* g = r.child("guidance")) cfg.guidance = guidance_config_from_json(*g);
  if (const json* e = r.child("eval")) {
    Reader re(*e, "eval");
    re.get("ks", cfg.ks);
    re.get("split", cfg.eval_split);
    re.get("per_user_recall", cfg.per_user_recall);
    re.finish();
  }
  r.get("output_dir", cfg.output_dir);
  r.finish();
  cfg.validate(/*check_files=*/false);
  return cfg;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  require(eq != std::string::npos && eq > 0, ErrorKind::kConfig,
          "override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    require(!parts[i].empty(), ErrorKind::kConfig, "override key '" + key + "' is malformed");
    if (!node->is_object()) *node = json::object();
    node = &(*node)[parts[i]];
  }
  *node = std::move(value);
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kConfig, "cannot open config " + path.string());
  json doc = json::parse(in, nullptr, /*allow_exceptions=*/false, /*ignore_comments=*/true);
  require(!doc.is_discarded(), ErrorKind::kConfig, path.string() + " is not valid JSON");
  for (const auto& o : overrides) apply_override(doc, o);
  return experiment_config_from_json(doc);
}

}  // namespace cgsorec
