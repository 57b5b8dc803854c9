// SPDX-License-Identifier: Apache-2.0
#include "vpiqa/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "vpiqa/error.hpp"

namespace vpiqa {

void TokenSets::validate(std::size_t vocab_size) const {
  if (positive.empty() || negative.empty()) throw ConfigError("positive and negative token sets must be non-empty");
  std::set<TokenId> seen;
  for (auto id : positive) {
    if (id >= vocab_size)
      throw ConfigError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                        std::to_string(vocab_size));
    if (!seen.insert(id).second) throw ConfigError("duplicate positive token id " + std::to_string(id));
  }
  for (auto id : negative) {
    if (id >= vocab_size)
      throw ConfigError("token id " + std::to_string(id) + " out of range for vocabulary of " +
                        std::to_string(vocab_size));
    if (!seen.insert(id).second)
      throw ConfigError("token id " + std::to_string(id) + " appears in both sets or twice");
  }
}

TokenSets TokenSets::swapped() const { return {negative, positive, labels}; }

namespace {

struct Partials {
  double pos = 0.0;  // sum over P of exp(l - m)
  double neg = 0.0;
  double shift = 0.0;
};

Partials partial_sums(const LogitVector& logits, const TokenSets& sets) {
  sets.validate(logits.values.size());
  const auto& l = logits.values;
  for (double v : l) {
    if (!std::isfinite(v)) throw InputError("logit vector contains a non-finite value");
  }
  Partials p;
  p.shift = -std::numeric_limits<double>::infinity();
  for (auto id : sets.positive) p.shift = std::max(p.shift, l[id]);
  for (auto id : sets.negative) p.shift = std::max(p.shift, l[id]);
  for (auto id : sets.positive) p.pos += std::exp(l[id] - p.shift);
  for (auto id : sets.negative) p.neg += std::exp(l[id] - p.shift);
  return p;
}

}  // namespace

QualityScore quality_score(const LogitVector& logits, const TokenSets& sets) {
  const auto p = partial_sums(logits, sets);
  return {p.pos / (p.pos + p.neg)};
}

std::vector<double> quality_score_gradient(const LogitVector& logits, const TokenSets& sets) {
  const auto p = partial_sums(logits, sets);
  const double total = p.pos + p.neg;
  // s(1-s) written as pos*neg/total^2 keeps precision when s is close to 0 or 1.
  const double s_one_minus_s = (p.pos / total) * (p.neg / total);
  std::vector<double> grad(logits.values.size(), 0.0);
  for (auto id : sets.positive) grad[id] = s_one_minus_s * std::exp(logits.values[id] - p.shift) / p.pos;
  for (auto id : sets.negative) grad[id] = -s_one_minus_s * std::exp(logits.values[id] - p.shift) / p.neg;
  return grad;
}

std::vector<TokenId> Vocabulary::tokenize(const std::string& word) const {
  auto it = entries_.find(word);
  if (it == entries_.end()) return {};
  return it->second;
}

TokenSets resolve_token_sets(std::span<const std::string> positive, std::span<const std::string> negative,
                             const Vocabulary& vocab, std::vector<std::string>* warnings) {
  TokenSets sets;
  auto resolve = [&](const std::string& word, std::vector<TokenId>& into) {
    const auto ids = vocab.tokenize(word);
    if (ids.empty()) throw ConfigError("token label '" + word + "' is not in the backend vocabulary");
    if (ids.size() > 1 && warnings) {
      warnings->push_back("label '" + word + "' tokenizes to " + std::to_string(ids.size()) +
                          " sub-tokens; using the first (id " + std::to_string(ids.front()) + ")");
    }
    into.push_back(ids.front());
    sets.labels[ids.front()] = word;
  };
  for (const auto& w : positive) resolve(w, sets.positive);
  for (const auto& w : negative) resolve(w, sets.negative);
  sets.validate(vocab.size());
  return sets;
}

}  // namespace vpiqa
