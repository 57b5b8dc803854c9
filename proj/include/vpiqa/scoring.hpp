// SPDX-License-Identifier: Apache-2.0
#pragma once

/// Two-set token readout: the quality score is the probability mass of the
/// positive tokens relative to positive plus negative tokens, taken from the
/// final-position logit vector.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace vpiqa {

using TokenId = std::uint32_t;

struct TokenSets {
  std::vector<TokenId> positive;
  std::vector<TokenId> negative;
  std::map<TokenId, std::string> labels;

  /// Throws ConfigError unless both sets are non-empty, disjoint and < vocab_size.
  void validate(std::size_t vocab_size) const;
  /// The same sets with polarities exchanged.
  TokenSets swapped() const;
};

struct LogitVector {
  std::vector<double> values;
  std::size_t position = 0;  // sequence index the logits were read from
};

struct QualityScore {
  double value = 0.5;
};

/// sum_P exp(l) / (sum_P exp(l) + sum_N exp(l)), evaluated after subtracting
/// the max over P u N.
QualityScore quality_score(const LogitVector& logits, const TokenSets& sets);

/// d score / d logits, length V; zero outside P u N.
std::vector<double> quality_score_gradient(const LogitVector& logits, const TokenSets& sets);

/// Maps words to sub-token IDs as a backend tokenizer would.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::map<std::string, std::vector<TokenId>> entries, std::size_t size)
      : entries_(std::move(entries)), size_(size) {}

  std::size_t size() const { return size_; }
  /// Empty vector when the word is unknown.
  std::vector<TokenId> tokenize(const std::string& word) const;

 private:
  std::map<std::string, std::vector<TokenId>> entries_;
  std::size_t size_ = 0;
};

/// Resolves label lists to token IDs. Multi-token words resolve to their
/// first sub-token; each such case appends a message to `warnings`.
TokenSets resolve_token_sets(std::span<const std::string> positive, std::span<const std::string> negative,
                             const Vocabulary& vocab, std::vector<std::string>* warnings = nullptr);

inline const std::vector<std::string>& default_positive_labels() {
  static const std::vector<std::string> v{"good", "fine"};
  return v;
}
inline const std::vector<std::string>& default_negative_labels() {
  static const std::vector<std::string> v{"poor", "bad"};
  return v;
}

}  // namespace vpiqa
