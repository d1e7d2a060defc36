#include "nsrlab/eval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>

#include "nsrlab/errors.hpp"
#include "nsrlab/parallel.hpp"
#include "nsrlab/text.hpp"

namespace nsrlab {

namespace {

constexpr std::uint64_t kEvalTag = 0x6576616cULL;

void check_triple(std::int64_t n, std::int64_t c, std::int64_t k) {
  if (n < 1 || c < 0 || k < 1) throw InvalidArgument("pass@k needs n >= 1, c >= 0, k >= 1");
  if (c > n) throw InvalidArgument("pass@k: c exceeds n");
  if (k > n) throw InvalidArgument("pass@k: k exceeds n");
}

double exact_sequence_entropy(const PolicyTable& policy, PromptId x) {
  double h = 0.0;
  enumerate_sequences<double>(policy, x, [&](const EnumeratedSequence<double>& s) {
    if (s.prob > 0.0) h -= s.prob * std::log(s.prob);
  });
  return h;
}

}  // namespace

double pass_at_k(std::int64_t n, std::int64_t c, std::int64_t k) {
  check_triple(n, c, k);
  if (k > n - c) return 1.0;
  double miss = 1.0;
  for (std::int64_t i = 0; i < k; ++i) {
    miss *= static_cast<double>(n - c - i) / static_cast<double>(n - i);
  }
  return 1.0 - miss;
}

double pass_at_k_oracle(std::int64_t n, std::int64_t c, std::int64_t k) {
  check_triple(n, c, k);
  if (n > 12) throw OutOfRange("pass@k oracle enumerates subsets only for n <= 12");
  const std::uint32_t correct_mask = (1u << c) - 1u;
  std::uint64_t hits = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != k) continue;
    ++total;
    if (mask & correct_mask) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<std::int64_t> default_k_grid() { return {1, 2, 4, 8, 16, 32, 64, 128, 256}; }

EvalReport evaluate_policy(const PolicyTable& policy, const Environment& env, const EvalOptions& options) {
  if (!(policy.shape() == env.shape())) throw InconsistentPolicy("policy shape does not match the environment");
  if (options.k_grid.empty()) throw InvalidArgument("empty k grid");
  if (options.samples < 1) throw InvalidArgument("eval.samples must be at least 1");
  if (!(options.temperature > 0.0)) throw InvalidArgument("eval.temperature must be positive");
  for (std::int64_t k : options.k_grid) check_triple(options.samples, 0, k);

  EvalReport report;
  report.k_grid = options.k_grid;
  report.temperature = options.temperature;
  report.seed = options.seed;
  report.prompts.resize(env.num_prompts());
  std::vector<double> entropies(env.num_prompts());
  std::vector<std::set<Sequence>> distinct(env.num_prompts());

  parallel_for(env.num_prompts(), effective_threads(options.threads), [&](std::size_t x) {
    Rng rng = Rng::substream(options.seed, {kEvalTag, x});
    PromptEval& pe = report.prompts[x];
    pe.n = options.samples;
    double neg_log = 0.0;
    for (std::int64_t i = 0; i < options.samples; ++i) {
      SampledSequence s = sample_sequence(policy, x, rng, options.temperature);
      if (!options.exact) neg_log -= std::log(sequence_prob(policy, x, s.tokens).total);
      if (env.verify(x, s.tokens) == Reward::Correct) {
        ++pe.c;
        distinct[x].insert(std::move(s.tokens));
      }
    }
    pe.distinct_correct = distinct[x].size();
    for (std::int64_t k : options.k_grid) pe.pass_at_k.push_back(pass_at_k(pe.n, pe.c, k));
    entropies[x] = options.exact ? exact_sequence_entropy(policy, x)
                                 : neg_log / static_cast<double>(options.samples);
  });

  const double prompts = static_cast<double>(env.num_prompts());
  report.pass_at_k.assign(options.k_grid.size(), 0.0);
  for (const auto& pe : report.prompts) {
    for (std::size_t j = 0; j < pe.pass_at_k.size(); ++j) report.pass_at_k[j] += pe.pass_at_k[j] / prompts;
    report.distinct_correct += pe.distinct_correct;
  }
  for (double h : entropies) report.sequence_entropy += h / prompts;
  if (options.exact) {
    double mass = 0.0;
    for (PromptId x = 0; x < env.num_prompts(); ++x) mass += correct_mass(env, x, policy);
    report.exact_correct_mass = mass / prompts;
  }
  return report;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json doc;
  doc["k_grid"] = k_grid;
  doc["pass_at_k"] = pass_at_k;
  doc["sequence_entropy"] = sequence_entropy;
  doc["distinct_correct"] = distinct_correct;
  doc["exact_correct_mass"] = exact_correct_mass ? nlohmann::json(*exact_correct_mass) : nlohmann::json();
  doc["temperature"] = temperature;
  doc["seed"] = seed;
  auto& rows = doc["prompts"] = nlohmann::json::array();
  for (std::size_t x = 0; x < prompts.size(); ++x) {
    const auto& pe = prompts[x];
    rows.push_back({{"prompt", x},
                    {"n", pe.n},
                    {"c", pe.c},
                    {"distinct_correct", pe.distinct_correct},
                    {"pass_at_k", pe.pass_at_k}});
  }
  return doc;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << pad_right("prompt", 8) << pad_left("n", 6) << pad_left("c", 6) << pad_left("distinct", 10);
  for (std::int64_t k : k_grid) out << pad_left("@" + std::to_string(k), 8);
  out << '\n';
  for (std::size_t x = 0; x < prompts.size(); ++x) {
    const auto& pe = prompts[x];
    out << pad_right(std::to_string(x), 8) << pad_left(std::to_string(pe.n), 6)
        << pad_left(std::to_string(pe.c), 6) << pad_left(std::to_string(pe.distinct_correct), 10);
    for (double v : pe.pass_at_k) out << pad_left(format_fixed(v, 4), 8);
    out << '\n';
  }
  out << pad_right("mean", 30);
  for (double v : pass_at_k) out << pad_left(format_fixed(v, 4), 8);
  out << '\n';
  out << "sequence entropy " << format_fixed(sequence_entropy, 4) << " nats, distinct correct "
      << distinct_correct;
  if (exact_correct_mass) out << ", exact correct mass " << format_fixed(*exact_correct_mass, 4);
  out << '\n';
  return out.str();
}

}  // namespace nsrlab
