#pragma once

// Versioned JSON model document. Numbers are written in shortest round-trip
// form, so load(save(m)) reproduces every double exactly.

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "tsgbm/error.hpp"
#include "tsgbm/gbdt.hpp"
#include "tsgbm/transforms.hpp"

namespace tsgbm::gbdt {

inline constexpr const char* kModelFormat = "tsgbm-model";
inline constexpr int kModelVersion = 1;

inline nlohmann::ordered_json params_to_json(const BoostParams& p) {
  return {{"num_iterations", p.num_iterations}, {"learning_rate", p.learning_rate},
          {"num_leaves", p.num_leaves},         {"max_depth", p.max_depth},
          {"lambda_l1", p.lambda_l1},           {"lambda_l2", p.lambda_l2},
          {"max_bin", p.max_bin},               {"min_data_in_leaf", p.min_data_in_leaf},
          {"goss_top_rate", p.goss_top_rate},   {"goss_other_rate", p.goss_other_rate},
          {"loss_power", p.loss_power},         {"early_stopping_rounds", p.early_stopping_rounds},
          {"seed", p.seed}};
}

/// Fields absent from `j` keep the values already in `p`.
inline BoostParams params_from_json(const nlohmann::json& j, BoostParams p = {}) {
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("num_iterations", p.num_iterations);
  get("learning_rate", p.learning_rate);
  get("num_leaves", p.num_leaves);
  get("max_depth", p.max_depth);
  get("lambda_l1", p.lambda_l1);
  get("lambda_l2", p.lambda_l2);
  get("max_bin", p.max_bin);
  get("min_data_in_leaf", p.min_data_in_leaf);
  get("goss_top_rate", p.goss_top_rate);
  get("goss_other_rate", p.goss_other_rate);
  get("loss_power", p.loss_power);
  get("early_stopping_rounds", p.early_stopping_rounds);
  get("seed", p.seed);
  return p;
}

inline nlohmann::ordered_json spec_to_json(const transforms::TransformSpec& s) {
  return {{"kind", std::string(transforms::kind_name(s.kind))},
          {"standardized", s.standardized},
          {"mean", s.stats.mean},
          {"std", s.stats.std},
          {"ema_period", s.ema_period},
          {"fitted_on", {s.fitted_on.begin, s.fitted_on.end}}};
}

inline transforms::TransformSpec spec_from_json(const nlohmann::json& j) {
  transforms::TransformSpec s;
  s.kind = transforms::parse_kind(j.at("kind").get<std::string>());
  s.standardized = j.at("standardized").get<bool>();
  s.stats.mean = j.at("mean").get<double>();
  s.stats.std = j.at("std").get<double>();
  s.ema_period = j.at("ema_period").get<int>();
  s.fitted_on.begin = j.at("fitted_on").at(0).get<std::size_t>();
  s.fitted_on.end = j.at("fitted_on").at(1).get<std::size_t>();
  return s;
}

/// `pipeline` carries how the feature matrix was assembled so evaluation can
/// rebuild it; the engine treats it as opaque.
inline nlohmann::ordered_json model_to_json(const BoostedModel& m,
                                            const nlohmann::ordered_json& pipeline = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["base_score"] = m.base_score;
  j["best_iteration"] = m.best_iteration;
  j["params"] = params_to_json(m.params);
  j["target_transform"] = spec_to_json(m.target_spec);
  j["feature_names"] = m.feature_names;
  auto& bins = j["bins"] = nlohmann::ordered_json::array();
  for (const auto& fb : m.bins.features) bins.push_back(fb.cuts);
  auto& trees = j["trees"] = nlohmann::ordered_json::array();
  for (const auto& t : m.trees) {
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& nd : t.nodes) {
      if (nd.is_leaf()) {
        nodes.push_back({{"leaf", nd.value}, {"count", nd.count}, {"depth", nd.depth}});
      } else {
        nodes.push_back({{"feature", nd.feature},
                         {"threshold_bin", nd.threshold},
                         {"missing_left", nd.missing_left},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"gain", nd.gain},
                         {"count", nd.count},
                         {"depth", nd.depth}});
      }
    }
    trees.push_back({{"nodes", std::move(nodes)}, {"split_order", t.split_order}});
  }
  auto& imp = j["importance"] = nlohmann::ordered_json::array();
  for (const auto& fi : feature_importance(m))
    imp.push_back({{"feature", fi.feature}, {"split_count", fi.split_count}, {"gain", fi.gain}});
  j["pipeline"] = pipeline;
  return j;
}

inline BoostedModel model_from_json(const nlohmann::json& j, nlohmann::json* pipeline = nullptr) {
  if (!j.contains("format") || j.at("format") != kModelFormat)
    throw Error(Errc::version_mismatch, "not a tsgbm model document");
  if (j.at("version").get<int>() != kModelVersion)
    throw Error(Errc::version_mismatch, "model version " + j.at("version").dump() + " unsupported (expected " +
                                            std::to_string(kModelVersion) + ")");
  BoostedModel m;
  m.base_score = j.at("base_score").get<double>();
  m.best_iteration = j.at("best_iteration").get<int>();
  m.params = params_from_json(j.at("params"));
  m.target_spec = spec_from_json(j.at("target_transform"));
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  for (const auto& cuts : j.at("bins")) m.bins.features.push_back(FeatureBins{cuts.get<std::vector<double>>()});
  if (m.bins.features.size() != m.feature_names.size())
    throw Error(Errc::invalid_argument, "model bins do not match feature names");
  for (const auto& tj : j.at("trees")) {
    Tree t;
    for (const auto& nj : tj.at("nodes")) {
      Node nd;
      nd.count = nj.at("count").get<std::uint32_t>();
      nd.depth = nj.at("depth").get<int>();
      if (nj.contains("leaf")) {
        nd.value = nj.at("leaf").get<double>();
      } else {
        nd.feature = nj.at("feature").get<int>();
        nd.threshold = nj.at("threshold_bin").get<std::uint16_t>();
        nd.missing_left = nj.at("missing_left").get<bool>();
        nd.left = nj.at("left").get<int>();
        nd.right = nj.at("right").get<int>();
        nd.gain = nj.at("gain").get<double>();
      }
      t.nodes.push_back(nd);
    }
    t.split_order = tj.at("split_order").get<std::vector<int>>();
    m.trees.push_back(std::move(t));
  }
  if (pipeline && j.contains("pipeline")) *pipeline = j.at("pipeline");
  return m;
}

inline std::string dump_model(const BoostedModel& m,
                              const nlohmann::ordered_json& pipeline = nlohmann::ordered_json::object()) {
  return model_to_json(m, pipeline).dump(1) + "\n";
}

inline void save(const BoostedModel& m, const std::string& path,
                 const nlohmann::ordered_json& pipeline = nlohmann::ordered_json::object()) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path);
  out << dump_model(m, pipeline);
}

inline BoostedModel load(const std::string& path, nlohmann::json* pipeline = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::invalid_argument, path + ": " + e.what());
  }
  return model_from_json(j, pipeline);
}

}  // namespace tsgbm::gbdt
