#include "nsrlab/config.hpp"

#include <fstream>
#include <set>

#include "nsrlab/errors.hpp"

namespace nsrlab {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed so that
// leftovers (typos) can be reported with their full path.
class Section {
 public:
  Section(const json& doc, std::string path) : path_(std::move(path)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) throw ConfigError(path_, "expected an object");
    doc_ = &doc;
  }

  bool has(const std::string& key) const { return doc_ && doc_->contains(key); }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    seen_.insert(key);
    try {
      out = doc_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key), "has the wrong type");
    }
  }

  template <class T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    if (doc_->at(key).is_null()) {
      seen_.insert(key);
      out.reset();
      return;
    }
    T value{};
    read(key, value);
    out = value;
  }

  const json& sub(const std::string& key) {
    static const json null_doc;
    if (!has(key)) return null_doc;
    seen_.insert(key);
    return doc_->at(key);
  }

  void finish() const {
    if (!doc_) return;
    for (const auto& [key, value] : doc_->items()) {
      if (!seen_.count(key)) throw ConfigError(field(key), "unknown key");
    }
  }

 private:
  const json* doc_ = nullptr;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Fn>
auto wrap(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(path, e.what());
  }
}

EnvSpec read_env(const json& doc, const std::filesystem::path& base_dir) {
  EnvSpec env;
  Section s(doc, "env");
  s.read("vocab_size", env.vocab_size);
  s.read("seq_len", env.seq_len);
  s.read("num_prompts", env.num_prompts);
  std::string rule(to_string(env.rule));
  s.read("rule", rule);
  env.rule = wrap("env.rule", [&] { return parse_verifier_rule(rule); });
  s.read("targets", env.targets);
  s.read("correct_lists", env.correct_lists);
  std::string membership_file;
  s.read("membership_file", membership_file);
  s.finish();
  if (!membership_file.empty()) {
    if (!env.correct_lists.empty()) {
      throw ConfigError("env.membership_file", "cannot be combined with env.correct_lists");
    }
    std::filesystem::path p(membership_file);
    if (p.is_relative()) p = base_dir / p;
    env.correct_lists = wrap("env.membership_file", [&] { return load_membership_file(p); });
  }
  return env;
}

ScheduleSpec read_schedule(const json& doc) {
  ScheduleSpec spec;
  Section s(doc, "schedule");
  std::string kind(to_string(spec.kind));
  s.read("kind", kind);
  spec.kind = wrap("schedule.kind", [&] { return parse_schedule_kind(kind); });
  s.read("beta_max", spec.beta_max);
  s.read("beta_min", spec.beta_min);
  s.read("kappa", spec.kappa);
  s.read("lambda_min", spec.lambda_min);
  s.read("lambda_max", spec.lambda_max);
  s.read("total_steps", spec.total_steps);
  s.read("constant_lambda", spec.constant_lambda);
  s.read("constant_beta", spec.constant_beta);
  s.read("fixed_lambda", spec.fixed_lambda);
  s.finish();
  return spec;
}

ConfidenceParams read_confidence(const json& doc) {
  ConfidenceParams params;
  Section s(doc, "confidence");
  s.read("alpha", params.alpha);
  s.read("epsilon_floor", params.epsilon_floor);
  s.finish();
  return params;
}

}  // namespace

void ExperimentConfig::validate() const {
  training.validate();
  if (eval.samples < 1) throw ConfigError("eval.samples", "must be at least 1");
  if (eval.k_grid.empty()) throw ConfigError("eval.k_grid", "must be nonempty");
  for (std::int64_t k : eval.k_grid) {
    if (k < 1 || k > eval.samples) throw ConfigError("eval.k_grid", "entries must lie in [1, eval.samples]");
  }
  if (!(eval.temperature > 0.0)) throw ConfigError("eval.temperature", "must be positive");
}

ExperimentConfig config_from_json(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("", "config must be a JSON object");
  ExperimentConfig cfg;
  Section root(doc, "");
  root.read("run_name", cfg.run_name);
  root.read("description", cfg.description);
  root.read("output_dir", cfg.output_dir);

  TrainConfig& tc = cfg.training;
  tc.env = read_env(root.sub("env"), base_dir);

  {
    Section s(root.sub("objective"), "objective");
    std::string family(to_string(tc.objective.family));
    s.read("family", family);
    tc.objective.family = parse_family(family);
    s.read("lambda", tc.objective.lambda);
    s.read_optional("clip_epsilon", tc.objective.clip_epsilon);
    s.finish();
  }
  if (root.has("schedule")) tc.objective.schedule = read_schedule(root.sub("schedule"));
  if (root.has("confidence")) tc.objective.confidence = read_confidence(root.sub("confidence"));

  {
    Section s(root.sub("training"), "training");
    s.read("total_steps", tc.total_steps);
    s.read("prompts_per_batch", tc.prompts_per_batch);
    s.read("rollouts_per_prompt", tc.rollouts_per_prompt);
    s.read("learning_rate", tc.learning_rate);
    s.read("seed", tc.seed);
    s.read("use_clipping", tc.use_clipping);
    s.read("inner_epochs", tc.inner_epochs);
    s.read("minibatch_size", tc.minibatch_size);
    s.read("eval_every", tc.eval_every);
    s.read("track_exact", tc.track_exact);
    s.read("p_correct_smoothing", tc.p_correct_smoothing);
    s.read("init_logit_scale", tc.init_logit_scale);
    s.read("threads", tc.threads);
    s.finish();
  }
  {
    Section s(root.sub("eval"), "eval");
    s.read("samples", cfg.eval.samples);
    s.read("k_grid", cfg.eval.k_grid);
    s.read("temperature", cfg.eval.temperature);
    s.read("seed", cfg.eval.seed);
    s.read("exact", cfg.eval.exact);
    s.finish();
  }
  root.finish();
  cfg.eval.threads = tc.threads;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "malformed JSON in " + path.string() + ": " + e.what());
  }
  return config_from_json(doc, path.parent_path());
}

json config_to_json(const ExperimentConfig& cfg) {
  const TrainConfig& tc = cfg.training;
  json doc;
  doc["run_name"] = cfg.run_name;
  doc["description"] = cfg.description;
  doc["output_dir"] = cfg.output_dir;

  json env = {{"vocab_size", tc.env.vocab_size},
              {"seq_len", tc.env.seq_len},
              {"num_prompts", tc.env.num_prompts},
              {"rule", std::string(to_string(tc.env.rule))}};
  if (tc.env.rule == VerifierRule::ModSum) {
    env["targets"] = tc.env.targets;
  } else {
    env["correct_lists"] = tc.env.correct_lists;
  }
  doc["env"] = env;

  doc["objective"] = {{"family", std::string(to_string(tc.objective.family))},
                      {"lambda", tc.objective.lambda},
                      {"clip_epsilon", tc.objective.clip_epsilon ? json(*tc.objective.clip_epsilon) : json()}};
  if (const auto& s = tc.objective.schedule) {
    doc["schedule"] = {{"kind", std::string(to_string(s->kind))},
                       {"beta_max", s->beta_max},
                       {"beta_min", s->beta_min},
                       {"kappa", s->kappa},
                       {"lambda_min", s->lambda_min},
                       {"lambda_max", s->lambda_max},
                       {"total_steps", s->total_steps},
                       {"constant_lambda", s->constant_lambda},
                       {"constant_beta", s->constant_beta},
                       {"fixed_lambda", s->fixed_lambda}};
  }
  if (const auto& c = tc.objective.confidence) {
    doc["confidence"] = {{"alpha", c->alpha}, {"epsilon_floor", c->epsilon_floor}};
  }
  doc["training"] = {{"total_steps", tc.total_steps},
                     {"prompts_per_batch", tc.prompts_per_batch},
                     {"rollouts_per_prompt", tc.rollouts_per_prompt},
                     {"learning_rate", tc.learning_rate},
                     {"seed", tc.seed},
                     {"use_clipping", tc.use_clipping},
                     {"inner_epochs", tc.inner_epochs},
                     {"minibatch_size", tc.minibatch_size},
                     {"eval_every", tc.eval_every},
                     {"track_exact", tc.track_exact},
                     {"p_correct_smoothing", tc.p_correct_smoothing},
                     {"init_logit_scale", tc.init_logit_scale},
                     {"threads", tc.threads}};
  doc["eval"] = {{"samples", cfg.eval.samples},
                 {"k_grid", cfg.eval.k_grid},
                 {"temperature", cfg.eval.temperature},
                 {"seed", cfg.eval.seed},
                 {"exact", cfg.eval.exact}};
  return doc;
}

bool equivalent(const ExperimentConfig& a, const ExperimentConfig& b) {
  return config_to_json(a) == config_to_json(b);
}

}  // namespace nsrlab
