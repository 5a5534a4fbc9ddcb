#include "xkgat/config.hpp"

#include <functional>
#include <map>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "xkgat/parallel.hpp"

namespace xkgat {

namespace pt = boost::property_tree;

namespace {

template <typename T>
T as(const std::string& key, const std::string& value) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      const auto v = boost::algorithm::to_lower_copy(value);
      if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
      if (v == "false" || v == "0" || v == "no" || v == "off") return false;
      throw boost::bad_lexical_cast();
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!value.empty() && value.front() == '-') throw boost::bad_lexical_cast();
      return boost::lexical_cast<T>(value);
    } else {
      return boost::lexical_cast<T>(value);
    }
  } catch (const boost::bad_lexical_cast&) {
    throw DataError("bad value '" + value + "' for " + key);
  }
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  if (boost::algorithm::trim_copy(value).empty()) return out;
  boost::algorithm::split(out, value, boost::algorithm::is_any_of(","));
  for (auto& s : out) boost::algorithm::trim(s);
  return out;
}

std::uint32_t relation_index(const std::string& key, const std::string& value) {
  std::string v = value;
  if (boost::algorithm::starts_with(v, "rel")) v = v.substr(3);
  return as<std::uint32_t>(key, v);
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"run.seed", [](RunConfig& c, auto& k, auto& v) { c.seed = as<std::uint64_t>(k, v); }},
      {"run.workers", [](RunConfig& c, auto& k, auto& v) { c.workers = as<unsigned>(k, v); }},

      {"data.test_fraction", [](RunConfig& c, auto& k, auto& v) { c.split.test_fraction = as<double>(k, v); }},
      {"data.valid_fraction", [](RunConfig& c, auto& k, auto& v) { c.split.valid_fraction = as<double>(k, v); }},
      {"data.regime",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "all") c.split.regime = SplitRegime::all;
         else if (v == "part") c.split.regime = SplitRegime::part;
         else throw DataError("bad value '" + v + "' for " + k + " (all|part)");
       }},
      {"data.targets", [](RunConfig& c, auto&, auto& v) { c.targets = split_list(v); }},
      {"data.head_side", [](RunConfig& c, auto& k, auto& v) { c.head_side = as<bool>(k, v); }},

      {"model.kind",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "attention") c.kind = ModelKind::attention;
         else if (v == "transe") c.kind = ModelKind::transe;
         else throw DataError("bad value '" + v + "' for " + k + " (attention|transe)");
       }},
      {"model.dim", [](RunConfig& c, auto& k, auto& v) { c.model.dim = as<int>(k, v); }},
      {"model.layers", [](RunConfig& c, auto& k, auto& v) { c.model.layers = as<int>(k, v); }},
      {"model.omega",
       [](RunConfig& c, auto& k, auto& v) {
         c.model.omega.clear();
         for (const auto& w : split_list(v)) c.model.omega.push_back(as<double>(k, w));
       }},
      {"model.norm",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "l1") c.model.norm = Norm::l1;
         else if (v == "l2") c.model.norm = Norm::l2;
         else throw DataError("bad value '" + v + "' for " + k + " (l1|l2)");
       }},
      {"model.max_depth", [](RunConfig& c, auto& k, auto& v) { c.model.max_depth = as<int>(k, v); }},
      {"model.neighbor_cap",
       [](RunConfig& c, auto& k, auto& v) { c.model.neighbor_cap = as<std::size_t>(k, v); }},

      {"train.batch_size", [](RunConfig& c, auto& k, auto& v) { c.train.batch_size = as<std::size_t>(k, v); }},
      {"train.learning_rate", [](RunConfig& c, auto& k, auto& v) { c.train.learning_rate = as<double>(k, v); }},
      {"train.gamma", [](RunConfig& c, auto& k, auto& v) { c.train.gamma = as<double>(k, v); }},
      {"train.max_epochs", [](RunConfig& c, auto& k, auto& v) { c.train.max_epochs = as<int>(k, v); }},
      {"train.early_stopping", [](RunConfig& c, auto& k, auto& v) { c.train.early_stopping = as<bool>(k, v); }},
      {"train.patience", [](RunConfig& c, auto& k, auto& v) { c.train.patience = as<int>(k, v); }},
      {"train.beta1", [](RunConfig& c, auto& k, auto& v) { c.train.beta1 = as<double>(k, v); }},
      {"train.beta2", [](RunConfig& c, auto& k, auto& v) { c.train.beta2 = as<double>(k, v); }},
      {"train.epsilon", [](RunConfig& c, auto& k, auto& v) { c.train.epsilon = as<double>(k, v); }},
      {"train.filter_negatives",
       [](RunConfig& c, auto& k, auto& v) { c.train.filter_negatives = as<bool>(k, v); }},
      {"train.cache_subgraphs",
       [](RunConfig& c, auto& k, auto& v) { c.train.cache_subgraphs = as<bool>(k, v); }},
      {"train.init_checkpoint",
       [](RunConfig& c, auto&, auto& v) {
         c.train.init_checkpoint = v;
         c.train.init = v.empty() ? InitMode::uniform : InitMode::checkpoint;
       }},
      {"train.pretrain_epochs", [](RunConfig& c, auto& k, auto& v) { c.pretrain_epochs = as<int>(k, v); }},

      {"explain.k", [](RunConfig& c, auto& k, auto& v) { c.k = as<std::size_t>(k, v); }},
      {"explain.source",
       [](RunConfig& c, auto& k, auto& v) {
         if (v == "test") c.explain_source = ExplainSource::test;
         else if (v == "train") c.explain_source = ExplainSource::train;
         else throw DataError("bad value '" + v + "' for " + k + " (test|train)");
       }},

      {"rules.theta", [](RunConfig& c, auto& k, auto& v) { c.thresholds.theta = as<std::size_t>(k, v); }},
      {"rules.hc_min", [](RunConfig& c, auto& k, auto& v) { c.thresholds.hc_min = as<double>(k, v); }},
      {"rules.support_min",
       [](RunConfig& c, auto& k, auto& v) { c.thresholds.support_min = as<std::size_t>(k, v); }},
      {"rules.open_endpoint", [](RunConfig& c, auto& k, auto& v) { c.open_endpoint = as<bool>(k, v); }},

      {"infer.top_n", [](RunConfig& c, auto& k, auto& v) { c.top_n = as<std::size_t>(k, v); }},

      {"synth.n_entities", [](RunConfig& c, auto& k, auto& v) { c.synth.n_entities = as<std::size_t>(k, v); }},
      {"synth.n_relations", [](RunConfig& c, auto& k, auto& v) { c.synth.n_relations = as<std::size_t>(k, v); }},
      {"synth.n_values", [](RunConfig& c, auto& k, auto& v) { c.synth.n_values = as<std::size_t>(k, v); }},
      {"synth.noise_triples",
       [](RunConfig& c, auto& k, auto& v) { c.synth.noise_triples = as<std::size_t>(k, v); }},
  };
  return table;
}

void set_rule_key(PlantSpec& spec, const std::string& key, const std::string& field,
                  const std::string& value) {
  if (field == "kind") {
    if (value == "association") spec.kind = RuleKind::association;
    else if (value == "path") spec.kind = RuleKind::path;
    else throw DataError("bad value '" + value + "' for " + key + " (association|path)");
  } else if (field == "head") {
    spec.head_relation = relation_index(key, value);
  } else if (field == "body") {
    spec.body_relation = relation_index(key, value);
  } else if (field == "subjects") {
    spec.subjects = as<std::size_t>(key, value);
  } else if (field == "confidence") {
    spec.confidence = as<double>(key, value);
  } else {
    throw DataError("unknown config key " + key);
  }
}

void apply_override(pt::ptree& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw DataError("override must look like section.key=value: " + assignment);
  const auto key = boost::algorithm::trim_copy(assignment.substr(0, eq));
  const auto value = boost::algorithm::trim_copy(assignment.substr(eq + 1));
  if (key.find('.') == std::string::npos) throw DataError("override key needs a section: " + key);
  tree.put(key, value);
}

RunConfig from_tree(const pt::ptree& tree) {
  RunConfig config;
  std::map<std::size_t, PlantSpec> rules;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty() && body.empty()) {
      throw DataError("config key '" + section + "' must be inside a section");
    }
    const bool is_rule = boost::algorithm::starts_with(section, "rule") && section.size() > 4 &&
                         section != "rules";
    std::size_t rule_index = 0;
    if (is_rule) rule_index = as<std::size_t>("section " + section, section.substr(4));
    for (const auto& [name, leaf] : body) {
      const std::string key = section + "." + name;
      const std::string value = boost::algorithm::trim_copy(leaf.data());
      if (is_rule) {
        set_rule_key(rules[rule_index], key, name, value);
        continue;
      }
      auto it = setters().find(key);
      if (it == setters().end()) throw DataError("unknown config key " + key);
      it->second(config, key, value);
    }
  }
  for (auto& [index, spec] : rules) config.synth.rules.push_back(spec);
  config.propagate_seed();
  config.validate();
  return config;
}

pt::ptree base_tree() {
  pt::ptree tree;
  tree.put("run.workers", default_workers());
  return tree;
}

}  // namespace

void RunConfig::propagate_seed() {
  split.seed = seed;
  train.seed = seed;
  model.subgraph_seed = seed;
  synth.seed = seed;
}

void RunConfig::validate() const {
  if (workers < 1) throw DataError("run.workers must be >= 1");
  if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0)) {
    throw DataError("data.test_fraction must be in (0, 1)");
  }
  if (!(split.valid_fraction >= 0.0 && split.valid_fraction < 1.0)) {
    throw DataError("data.valid_fraction must be in [0, 1)");
  }
  if (kind == ModelKind::attention) model.validate();
  if (model.dim < 1) throw DataError("model.dim must be >= 1");
  train.validate();
  if (pretrain_epochs < 0) throw DataError("train.pretrain_epochs must be >= 0");
  if (k < 1) throw DataError("explain.k must be >= 1");
  if (!(thresholds.hc_min >= 0.0 && thresholds.hc_min <= 1.0)) {
    throw DataError("rules.hc_min must be in [0, 1]");
  }
  if (top_n < 1) throw DataError("infer.top_n must be >= 1");
}

RunConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  pt::ptree tree = base_tree();
  std::istringstream in(text);
  try {
    pt::ptree file;
    pt::read_ini(in, file);
    for (const auto& [section, body] : file) {
      if (body.empty()) {
        tree.put_child(section, body);
        continue;
      }
      for (const auto& [name, leaf] : body) tree.put(section + "." + name, leaf.data());
    }
  } catch (const pt::ini_parser_error& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  for (const auto& o : overrides) apply_override(tree, o);
  return from_tree(tree);
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  const auto lines = read_lines(path);
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  return parse_config(text, overrides);
}

RunConfig default_config(const std::vector<std::string>& overrides) {
  return parse_config("", overrides);
}

namespace {

std::string number(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

std::string render_config(const RunConfig& c) {
  std::ostringstream out;
  out << "[run]\nseed = " << c.seed << "\nworkers = " << c.workers << "\n\n";
  out << "[data]\ntest_fraction = " << number(c.split.test_fraction)
      << "\nvalid_fraction = " << number(c.split.valid_fraction)
      << "\nregime = " << (c.split.regime == SplitRegime::all ? "all" : "part")
      << "\ntargets = " << boost::algorithm::join(c.targets, ",")
      << "\nhead_side = " << (c.head_side ? "true" : "false") << "\n\n";
  std::vector<std::string> omega;
  for (double w : c.model.omega) omega.push_back(number(w));
  out << "[model]\nkind = " << to_string(c.kind) << "\ndim = " << c.model.dim
      << "\nlayers = " << c.model.layers << "\nomega = " << boost::algorithm::join(omega, ",")
      << "\nnorm = " << (c.model.norm == Norm::l1 ? "l1" : "l2")
      << "\nmax_depth = " << c.model.max_depth << "\nneighbor_cap = " << c.model.neighbor_cap << "\n\n";
  out << "[train]\nbatch_size = " << c.train.batch_size
      << "\nlearning_rate = " << number(c.train.learning_rate) << "\ngamma = " << number(c.train.gamma)
      << "\nmax_epochs = " << c.train.max_epochs
      << "\nearly_stopping = " << (c.train.early_stopping ? "true" : "false")
      << "\npatience = " << c.train.patience << "\nbeta1 = " << number(c.train.beta1)
      << "\nbeta2 = " << number(c.train.beta2) << "\nepsilon = " << number(c.train.epsilon)
      << "\nfilter_negatives = " << (c.train.filter_negatives ? "true" : "false")
      << "\ncache_subgraphs = " << (c.train.cache_subgraphs ? "true" : "false")
      << "\ninit_checkpoint = "
      << (c.train.init == InitMode::checkpoint ? c.train.init_checkpoint.string() : "")
      << "\npretrain_epochs = " << c.pretrain_epochs << "\n\n";
  out << "[explain]\nk = " << c.k
      << "\nsource = " << (c.explain_source == ExplainSource::test ? "test" : "train") << "\n\n";
  out << "[rules]\ntheta = " << c.thresholds.theta << "\nhc_min = " << number(c.thresholds.hc_min)
      << "\nsupport_min = " << c.thresholds.support_min
      << "\nopen_endpoint = " << (c.open_endpoint ? "true" : "false") << "\n\n";
  out << "[infer]\ntop_n = " << c.top_n << "\n\n";
  out << "[synth]\nn_entities = " << c.synth.n_entities << "\nn_relations = " << c.synth.n_relations
      << "\nn_values = " << c.synth.n_values << "\nnoise_triples = " << c.synth.noise_triples << "\n";
  for (std::size_t i = 0; i < c.synth.rules.size(); ++i) {
    const auto& r = c.synth.rules[i];
    out << "\n[rule" << i << "]\nkind = " << (r.kind == RuleKind::path ? "path" : "association")
        << "\nhead = rel" << r.head_relation << "\nbody = rel" << r.body_relation
        << "\nsubjects = " << r.subjects << "\nconfidence = " << number(r.confidence) << "\n";
  }
  return out.str();
}

}  // namespace xkgat
