#include "nsrlab/policy.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <string>

namespace nsrlab {

void PolicyShape::validate() const {
  if (vocab_size < 2) throw InvalidArgument("vocabulary size must be at least 2");
  if (seq_len < 1) throw InvalidArgument("sequence length must be at least 1");
  if (num_prompts < 1) throw InvalidArgument("number of prompts must be at least 1");
  std::size_t count = 1;
  for (std::size_t t = 0; t < seq_len; ++t) {
    count *= vocab_size;
    if (count > kMaxSequencesPerPrompt) {
      throw InvalidArgument("V^T = " + std::to_string(vocab_size) + "^" + std::to_string(seq_len) +
                            " exceeds the enumeration cap of " +
                            std::to_string(kMaxSequencesPerPrompt));
    }
  }
}

std::size_t PolicyShape::sequences_per_prompt() const {
  std::size_t count = 1;
  for (std::size_t t = 0; t < seq_len; ++t) count *= vocab_size;
  return count;
}

std::size_t PolicyShape::nodes_per_prompt() const {
  return (sequences_per_prompt() - 1) / (vocab_size - 1);
}

NodeTable::NodeTable(const PolicyShape& shape, double fill) : shape_(shape) {
  shape_.validate();
  nodes_per_prompt_ = shape_.nodes_per_prompt();
  values_.assign(shape_.num_prompts * nodes_per_prompt_ * shape_.vocab_size, fill);
}

std::size_t NodeTable::depth(std::size_t node) const {
  std::size_t d = 0;
  while (node > 0) {
    node = (node - 1) / shape_.vocab_size;
    ++d;
  }
  return d;
}

std::size_t NodeTable::node_id(std::span<const TokenId> prefix) const {
  if (prefix.size() >= shape_.seq_len) {
    throw InconsistentPolicy("no node for a prefix of length " + std::to_string(prefix.size()) +
                             " (sequence length " + std::to_string(shape_.seq_len) + ")");
  }
  std::size_t node = 0;
  for (TokenId tok : prefix) {
    if (tok >= shape_.vocab_size) {
      throw InconsistentPolicy("token " + std::to_string(tok) + " outside vocabulary of size " +
                               std::to_string(shape_.vocab_size));
    }
    node = child(node, tok);
  }
  return node;
}

Sequence NodeTable::prefix_of(std::size_t node) const {
  Sequence prefix;
  while (node > 0) {
    prefix.push_back(static_cast<TokenId>((node - 1) % shape_.vocab_size));
    node = (node - 1) / shape_.vocab_size;
  }
  std::reverse(prefix.begin(), prefix.end());
  return prefix;
}

void NodeTable::check_prompt(PromptId prompt) const {
  if (prompt >= shape_.num_prompts) {
    throw InconsistentPolicy("prompt " + std::to_string(prompt) + " not in table with " +
                             std::to_string(shape_.num_prompts) + " prompts");
  }
}

std::span<double> NodeTable::row(PromptId prompt, std::size_t node) {
  const std::size_t offset = (prompt * nodes_per_prompt_ + node) * shape_.vocab_size;
  return {values_.data() + offset, shape_.vocab_size};
}

std::span<const double> NodeTable::row(PromptId prompt, std::size_t node) const {
  const std::size_t offset = (prompt * nodes_per_prompt_ + node) * shape_.vocab_size;
  return {values_.data() + offset, shape_.vocab_size};
}

PolicyTable PolicyTable::uniform(const PolicyShape& shape) { return PolicyTable(shape); }

PolicyTable PolicyTable::random(const PolicyShape& shape, Rng& rng, double scale) {
  PolicyTable policy(shape);
  for (double& z : policy.values_) z = scale * rng.normal();
  return policy;
}

void PolicyTable::check_finite() const {
  for (double z : values_) {
    if (!std::isfinite(z)) throw InvalidArgument("policy contains a non-finite logit");
  }
}

double GradTable::squared_norm() const {
  double s = 0.0;
  for (double g : values_) s += g * g;
  return s;
}

double GradTable::max_abs() const {
  double m = 0.0;
  for (double g : values_) m = std::max(m, std::abs(g));
  return m;
}

Distribution::Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidArgument("empty distribution");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("distribution entry outside [0, 1]");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InvalidArgument("distribution does not sum to 1");
}

Distribution softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("softmax of an empty vector");
  for (double z : logits) {
    if (!std::isfinite(z)) throw InvalidArgument("softmax input contains a non-finite logit");
  }
  std::vector<double> out(logits.size());
  softmax_into<double>(logits, out);
  return Distribution::trusted(std::move(out));
}

Distribution node_distribution(const PolicyTable& policy, PromptId prompt, std::size_t node) {
  policy.check_prompt(prompt);
  return softmax(policy.row(prompt, node));
}

SequenceProb sequence_prob(const PolicyTable& policy, PromptId prompt, std::span<const TokenId> seq) {
  policy.check_prompt(prompt);
  if (seq.size() != policy.seq_len()) {
    throw InconsistentPolicy("sequence of length " + std::to_string(seq.size()) +
                             " does not match policy depth " + std::to_string(policy.seq_len()));
  }
  SequenceProb out;
  out.per_token.reserve(seq.size());
  std::vector<double> probs(policy.vocab_size());
  double log_total = 0.0;
  std::size_t node = 0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t] >= policy.vocab_size()) {
      throw InconsistentPolicy("token " + std::to_string(seq[t]) + " outside vocabulary");
    }
    softmax_into<double>(policy.row(prompt, node), probs);
    const double p = probs[seq[t]];
    out.per_token.push_back(p);
    log_total += std::log(p);
    if (t + 1 < seq.size()) node = policy.child(node, seq[t]);
  }
  out.total = std::exp(log_total);
  return out;
}

SampledSequence sample_sequence(const PolicyTable& policy, PromptId prompt, Rng& rng,
                                double temperature) {
  policy.check_prompt(prompt);
  if (!(temperature > 0.0)) throw InvalidArgument("sampling temperature must be positive");
  SampledSequence out;
  out.tokens.reserve(policy.seq_len());
  out.per_token.reserve(policy.seq_len());
  std::vector<double> probs(policy.vocab_size());
  std::size_t node = 0;
  for (std::size_t t = 0; t < policy.seq_len(); ++t) {
    softmax_into<double>(policy.row(prompt, node), probs, temperature);
    const auto tok = static_cast<TokenId>(rng.categorical(probs));
    out.tokens.push_back(tok);
    out.per_token.push_back(probs[tok]);
    if (t + 1 < policy.seq_len()) node = policy.child(node, tok);
  }
  return out;
}

double step_entropy(std::span<const double> probs) {
  double h = 0.0;
  for (double p : probs) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double step_entropy(const Distribution& dist) { return step_entropy(dist.probs()); }

NodeTable node_probabilities(const PolicyTable& policy) {
  NodeTable probs(policy.shape());
  for (PromptId x = 0; x < policy.num_prompts(); ++x) {
    for (std::size_t n = 0; n < policy.nodes_per_prompt(); ++n) {
      softmax_into<double>(policy.row(x, n), probs.row(x, n));
    }
  }
  return probs;
}

double mean_policy_entropy(const PolicyTable& policy) {
  const NodeTable probs = node_probabilities(policy);
  const std::size_t V = policy.vocab_size();
  const std::size_t N = policy.nodes_per_prompt();
  std::vector<double> reach(N);
  double total = 0.0;
  for (PromptId x = 0; x < policy.num_prompts(); ++x) {
    std::fill(reach.begin(), reach.end(), 0.0);
    reach[0] = 1.0;
    double acc = 0.0;
    // Level order guarantees a parent is finished before its children.
    for (std::size_t n = 0; n < N; ++n) {
      const auto p = probs.row(x, n);
      acc += reach[n] * step_entropy(p);
      const std::size_t first_child = n * V + 1;
      if (first_child < N) {
        for (std::size_t v = 0; v < V; ++v) reach[first_child + v] = reach[n] * p[v];
      }
    }
    total += acc / static_cast<double>(policy.seq_len());
  }
  return total / static_cast<double>(policy.num_prompts());
}

std::string node_key(PromptId prompt, std::span<const TokenId> prefix) {
  std::string key = std::to_string(prompt) + "/";
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (i > 0) key += '-';
    key += std::to_string(prefix[i]);
  }
  return key;
}

nlohmann::json policy_to_json(const PolicyTable& policy) {
  nlohmann::json logits = nlohmann::json::object();
  for (PromptId x = 0; x < policy.num_prompts(); ++x) {
    for (std::size_t n = 0; n < policy.nodes_per_prompt(); ++n) {
      const auto row = policy.row(x, n);
      logits[node_key(x, policy.prefix_of(n))] = std::vector<double>(row.begin(), row.end());
    }
  }
  return {{"format", "nsrlab-policy"},
          {"version", 1},
          {"vocab_size", policy.vocab_size()},
          {"seq_len", policy.seq_len()},
          {"num_prompts", policy.num_prompts()},
          {"logits", std::move(logits)}};
}

PolicyTable policy_from_json(const nlohmann::json& doc) {
  PolicyShape shape;
  try {
    shape.vocab_size = doc.at("vocab_size").get<std::size_t>();
    shape.seq_len = doc.at("seq_len").get<std::size_t>();
    shape.num_prompts = doc.at("num_prompts").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw InconsistentPolicy(std::string("policy snapshot header: ") + e.what());
  }
  PolicyTable policy(shape);
  const auto& logits = doc.at("logits");
  if (logits.size() != shape.num_prompts * policy.nodes_per_prompt()) {
    throw InconsistentPolicy("policy snapshot has " + std::to_string(logits.size()) +
                             " nodes, expected " +
                             std::to_string(shape.num_prompts * policy.nodes_per_prompt()));
  }
  for (PromptId x = 0; x < shape.num_prompts; ++x) {
    for (std::size_t n = 0; n < policy.nodes_per_prompt(); ++n) {
      const std::string key = node_key(x, policy.prefix_of(n));
      const auto it = logits.find(key);
      if (it == logits.end()) throw InconsistentPolicy("policy snapshot is missing node \"" + key + "\"");
      if (!it->is_array() || it->size() != shape.vocab_size) {
        throw InconsistentPolicy("node \"" + key + "\" does not hold " +
                                 std::to_string(shape.vocab_size) + " logits");
      }
      auto row = policy.row(x, n);
      for (std::size_t v = 0; v < shape.vocab_size; ++v) {
        const auto& z = (*it)[v];
        if (!z.is_number()) throw InvalidArgument("node \"" + key + "\" holds a non-numeric logit");
        row[v] = z.get<double>();
      }
    }
  }
  policy.check_finite();
  return policy;
}

void save_policy(const PolicyTable& policy, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write policy snapshot " + path.string());
  out << policy_to_json(policy).dump(1) << '\n';
}

PolicyTable load_policy(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read policy snapshot " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("malformed policy snapshot " + path.string() + ": " + e.what());
  }
  return policy_from_json(doc);
}

}  // namespace nsrlab
