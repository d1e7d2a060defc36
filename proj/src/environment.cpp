#include "nsrlab/environment.hpp"

#include <fstream>
#include <string>

namespace nsrlab {

std::string_view to_string(VerifierRule rule) {
  switch (rule) {
    case VerifierRule::ModSum: return "mod-sum";
    case VerifierRule::MembershipList: return "membership-list";
  }
  return "unknown";
}

VerifierRule parse_verifier_rule(std::string_view name) {
  if (name == "mod-sum") return VerifierRule::ModSum;
  if (name == "membership-list") return VerifierRule::MembershipList;
  throw InvalidArgument("unknown verifier rule \"" + std::string(name) + "\"");
}

void EnvSpec::validate() const {
  shape().validate();
  if (rule == VerifierRule::ModSum) {
    if (!targets.empty() && targets.size() != num_prompts) {
      throw InvalidArgument("mod-sum needs one target residue per prompt");
    }
    for (TokenId r : targets) {
      if (r >= vocab_size) throw InvalidArgument("mod-sum target residue outside [0, V)");
    }
    return;
  }
  if (correct_lists.size() != num_prompts) {
    throw InvalidArgument("membership-list needs one correct list per prompt");
  }
  for (const auto& list : correct_lists) {
    if (list.empty()) throw InvalidArgument("membership-list entries must be nonempty");
    for (const auto& seq : list) {
      if (seq.size() != seq_len) throw InvalidArgument("membership sequence has the wrong length");
      for (TokenId tok : seq) {
        if (tok >= vocab_size) throw InvalidArgument("membership sequence token outside vocabulary");
      }
    }
  }
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  num_sequences_ = spec_.shape().sequences_per_prompt();
  correct_.assign(spec_.num_prompts * num_sequences_, 0);
  for (PromptId x = 0; x < spec_.num_prompts; ++x) {
    unsigned char* row = correct_.data() + x * num_sequences_;
    if (spec_.rule == VerifierRule::ModSum) {
      const TokenId target =
          spec_.targets.empty() ? static_cast<TokenId>(x % spec_.vocab_size) : spec_.targets[x];
      for (std::size_t i = 0; i < num_sequences_; ++i) {
        std::size_t sum = 0;
        for (TokenId tok : sequence_at(i)) sum += tok;
        row[i] = (sum % spec_.vocab_size) == target ? 1 : 0;
      }
    } else {
      for (const auto& seq : spec_.correct_lists[x]) row[sequence_index(seq)] = 1;
    }
  }
}

void Environment::check(PromptId prompt, std::span<const TokenId> seq) const {
  if (prompt >= spec_.num_prompts) {
    throw InvalidArgument("prompt " + std::to_string(prompt) + " out of range");
  }
  if (seq.size() != spec_.seq_len) {
    throw InvalidArgument("sequence length " + std::to_string(seq.size()) + " != " +
                          std::to_string(spec_.seq_len));
  }
  for (TokenId tok : seq) {
    if (tok >= spec_.vocab_size) throw InvalidArgument("token outside vocabulary");
  }
}

Reward Environment::verify(PromptId prompt, std::span<const TokenId> seq) const {
  check(prompt, seq);
  return is_correct(prompt, sequence_index(seq)) ? Reward::Correct : Reward::Incorrect;
}

std::size_t Environment::sequence_index(std::span<const TokenId> seq) const {
  std::size_t index = 0;
  for (TokenId tok : seq) index = index * spec_.vocab_size + tok;
  return index;
}

Sequence Environment::sequence_at(std::size_t index) const {
  Sequence seq(spec_.seq_len);
  for (std::size_t t = spec_.seq_len; t-- > 0;) {
    seq[t] = static_cast<TokenId>(index % spec_.vocab_size);
    index /= spec_.vocab_size;
  }
  return seq;
}

std::size_t Environment::correct_count(PromptId prompt) const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < num_sequences_; ++i) c += is_correct(prompt, i) ? 1 : 0;
  return c;
}

namespace {

double mass_where(const Environment& env, PromptId prompt, const PolicyTable& policy, bool correct) {
  if (policy.shape() != env.shape()) throw InconsistentPolicy("policy shape does not match environment");
  double mass = 0.0;
  enumerate_sequences<double>(policy, prompt, [&](const EnumeratedSequence<double>& s) {
    if (env.is_correct(prompt, s.index) == correct) mass += s.prob;
  });
  return mass;
}

}  // namespace

double correct_mass(const Environment& env, PromptId prompt, const PolicyTable& policy) {
  return mass_where(env, prompt, policy, true);
}

double incorrect_mass(const Environment& env, PromptId prompt, const PolicyTable& policy) {
  return mass_where(env, prompt, policy, false);
}

std::vector<std::vector<Sequence>> load_membership_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read membership file " + path.string());
  try {
    const auto doc = nlohmann::json::parse(in);
    return doc.get<std::vector<std::vector<Sequence>>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed membership file " + path.string() + ": " + e.what());
  }
}

}  // namespace nsrlab
