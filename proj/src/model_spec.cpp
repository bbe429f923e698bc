#include "covidsem/model_spec.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "covidsem/errors.hpp"

namespace covidsem {

using nlohmann::json;

std::string transform_name(Transform t) {
  switch (t) {
    case Transform::identity: return "identity";
    case Transform::movavg7: return "movavg7";
    case Transform::weekly_growth: return "weekly_growth";
    case Transform::log_weekly: return "log_weekly";
    case Transform::weekly_log_diff: return "weekly_log_diff";
  }
  return "identity";
}

Transform transform_from_name(const std::string& s) {
  if (s == "identity") return Transform::identity;
  if (s == "movavg7") return Transform::movavg7;
  if (s == "weekly_growth") return Transform::weekly_growth;
  if (s == "log_weekly") return Transform::log_weekly;
  if (s == "weekly_log_diff") return Transform::weekly_log_diff;
  throw DataError("unknown transform '" + s + "'");
}

std::string block_name(Block b) {
  switch (b) {
    case Block::policy: return "policy";
    case Block::behavior: return "behavior";
    case Block::information: return "information";
    case Block::confounder: return "confounder";
  }
  return "confounder";
}

Block block_from_name(const std::string& s) {
  if (s == "policy") return Block::policy;
  if (s == "behavior") return Block::behavior;
  if (s == "information") return Block::information;
  if (s == "confounder") return Block::confounder;
  throw DataError("unknown block '" + s + "'");
}

static std::string dummies_name(Dummies d) {
  switch (d) {
    case Dummies::month: return "month";
    case Dummies::week: return "week";
    case Dummies::none: return "none";
  }
  return "none";
}

static Dummies dummies_from_name(const std::string& s) {
  if (s == "month") return Dummies::month;
  if (s == "week") return Dummies::week;
  if (s == "none") return Dummies::none;
  throw DataError("unknown dummies kind '" + s + "'");
}

static std::string interaction_name(CovInteraction c) {
  switch (c) {
    case CovInteraction::logdays: return "logdays";
    case CovInteraction::month_dummies: return "month_dummies";
    case CovInteraction::none: return "none";
  }
  return "none";
}

static CovInteraction interaction_from_name(const std::string& s) {
  if (s == "logdays") return CovInteraction::logdays;
  if (s == "month_dummies") return CovInteraction::month_dummies;
  if (s == "none") return CovInteraction::none;
  throw DataError("unknown interactions kind '" + s + "'");
}

void ModelSpec::validate() const {
  std::set<std::string> names;
  if (outcome.name.empty()) throw DataError("spec '" + name + "': outcome needs a name");
  names.insert(outcome.name);
  for (const auto& t : terms) {
    if (t.name.empty()) throw DataError("spec '" + name + "': term with empty name");
    if (!names.insert(t.name).second)
      throw DataError("spec '" + name + "': duplicate term name '" + t.name + "'");
    if (t.lag < 0) throw DataError("spec '" + name + "': negative lag on '" + t.name + "'");
  }
  for (const auto& z : zero_restrictions)
    if (!find_term(z))
      throw DataError("spec '" + name + "': zero restriction on unknown term '" + z + "'");
  if (cluster != "state") throw DataError("spec '" + name + "': only state clustering supported");
}

std::vector<std::string> ModelSpec::term_names(Block b) const {
  std::vector<std::string> out;
  for (const auto& t : terms)
    if (t.block == b) out.push_back(t.name);
  return out;
}

const TermSpec* ModelSpec::find_term(const std::string& term_name) const {
  for (const auto& t : terms)
    if (t.name == term_name) return &t;
  return nullptr;
}

static json term_to_json(const TermSpec& t) {
  return json{{"name", t.name},
              {"source", t.source},
              {"transform", transform_name(t.transform)},
              {"lag", t.lag},
              {"block", block_name(t.block)}};
}

static TermSpec term_from_json(const json& j) {
  TermSpec t;
  t.name = j.at("name").get<std::string>();
  t.source = j.at("source").get<std::string>();
  t.transform = transform_from_name(j.at("transform").get<std::string>());
  t.lag = j.value("lag", 0);
  t.block = block_from_name(j.value("block", std::string("confounder")));
  return t;
}

std::string spec_to_json(const ModelSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["outcome"] = term_to_json(spec.outcome);
  j["terms"] = json::array();
  for (const auto& t : spec.terms) j["terms"].push_back(term_to_json(t));
  j["static_covariates"] = spec.static_covariates;
  j["dummies"] = dummies_name(spec.dummies);
  j["interactions"] = interaction_name(spec.interactions);
  j["cluster"] = spec.cluster;
  j["zero_restrictions"] = spec.zero_restrictions;
  j["sample_lag_days"] = spec.sample_lag_days;
  return j.dump(2) + "\n";
}

ModelSpec spec_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("bad model spec json: ") + e.what());
  }
  ModelSpec spec;
  try {
    spec.name = j.value("name", std::string("unnamed"));
    spec.outcome = term_from_json(j.at("outcome"));
    for (const auto& t : j.at("terms")) spec.terms.push_back(term_from_json(t));
    spec.static_covariates =
        j.value("static_covariates", std::vector<std::string>{});
    spec.dummies = dummies_from_name(j.value("dummies", std::string("month")));
    spec.interactions =
        interaction_from_name(j.value("interactions", std::string("logdays")));
    spec.cluster = j.value("cluster", std::string("state"));
    spec.zero_restrictions = j.value("zero_restrictions", std::vector<std::string>{});
    spec.sample_lag_days = j.value("sample_lag_days", 0);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad model spec json: ") + e.what());
  }
  spec.validate();
  return spec;
}

ModelSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return spec_from_json(ss.str());
}

void save_spec(const ModelSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << spec_to_json(spec);
}

}  // namespace covidsem
