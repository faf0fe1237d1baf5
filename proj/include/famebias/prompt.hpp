#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "famebias/embedding.hpp"

namespace famebias {

enum class MatchMode { all, first };
enum class OovPolicy { error, zero };

MatchMode parse_match_mode(std::string_view s);
OovPolicy parse_oov_policy(std::string_view s);
std::string_view to_string(MatchMode m) noexcept;
std::string_view to_string(OovPolicy p) noexcept;

/// A trigger phrase as a sequence of lowercase tokens, e.g. {"police", "officer"}.
struct TriggerPattern {
  std::vector<std::string> tokens;
  MatchMode match_mode = MatchMode::all;

  // Tokenizes `phrase` the same way prompts are tokenized.
  static TriggerPattern from_phrase(std::string_view phrase, MatchMode mode = MatchMode::all);
  std::string phrase() const;
};

struct TokenizedPrompt {
  std::vector<std::string> tokens;
  std::string source_text;
};

struct TriggerMatch {
  std::size_t pattern_index = 0;
  SpanRef span;
  friend bool operator==(const TriggerMatch&, const TriggerMatch&) = default;
};

std::string ascii_lower(std::string_view s);

// Lowercases, splits on whitespace and strips leading/trailing ASCII punctuation
// from every token. Throws EmptyPrompt when nothing is left.
TokenizedPrompt tokenize(std::string_view text);

// Left-to-right greedy scan. At each position the longest eligible pattern wins,
// the lower pattern index among equal lengths. Patterns in `first` mode stop
// matching after their first hit. Result spans are disjoint and sorted.
std::vector<TriggerMatch> find_trigger_spans(const std::vector<std::string>& tokens,
                                             const std::vector<TriggerPattern>& patterns);
std::vector<TriggerMatch> find_trigger_spans(const TokenizedPrompt& prompt,
                                             const std::vector<TriggerPattern>& patterns);

EmbeddingSequence encode_prompt(const EmbeddingTable& table, const TokenizedPrompt& prompt,
                                OovPolicy oov = OovPolicy::error);

}  // namespace famebias
