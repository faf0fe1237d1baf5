#include "famebias/prompt.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

#include "famebias/error.hpp"

namespace famebias {

namespace {

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::ispunct(u);
}

bool is_ascii_space(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x80 && std::isspace(u);
}

bool matches_at(const std::vector<std::string>& tokens, std::size_t pos,
                const std::vector<std::string>& pattern) {
  if (pattern.empty() || pattern.size() > tokens.size() - pos) return false;
  return std::equal(pattern.begin(), pattern.end(), tokens.begin() + static_cast<std::ptrdiff_t>(pos));
}

}  // namespace

MatchMode parse_match_mode(std::string_view s) {
  if (s == "all") return MatchMode::all;
  if (s == "first") return MatchMode::first;
  throw Error(Errc::config_error, "match mode must be 'all' or 'first', got '" + std::string(s) + "'");
}

OovPolicy parse_oov_policy(std::string_view s) {
  if (s == "error") return OovPolicy::error;
  if (s == "zero") return OovPolicy::zero;
  throw Error(Errc::config_error, "oov policy must be 'error' or 'zero', got '" + std::string(s) + "'");
}

std::string_view to_string(MatchMode m) noexcept { return m == MatchMode::all ? "all" : "first"; }
std::string_view to_string(OovPolicy p) noexcept { return p == OovPolicy::error ? "error" : "zero"; }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

TriggerPattern TriggerPattern::from_phrase(std::string_view phrase, MatchMode mode) {
  try {
    return TriggerPattern{tokenize(phrase).tokens, mode};
  } catch (const Error&) {
    throw Error(Errc::config_error, "trigger phrase '" + std::string(phrase) + "' has no tokens");
  }
}

std::string TriggerPattern::phrase() const {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

TokenizedPrompt tokenize(std::string_view text) {
  TokenizedPrompt out{{}, std::string(text)};
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_ascii_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_ascii_space(text[j])) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_ascii_punct(text[b])) ++b;
    while (e > b && is_ascii_punct(text[e - 1])) --e;
    if (b < e) out.tokens.push_back(ascii_lower(text.substr(b, e - b)));
    i = j;
  }
  if (out.tokens.empty()) throw Error(Errc::empty_prompt, "prompt has no tokens");
  return out;
}

std::vector<TriggerMatch> find_trigger_spans(const std::vector<std::string>& tokens,
                                             const std::vector<TriggerPattern>& patterns) {
  std::vector<TriggerMatch> out;
  std::vector<bool> exhausted(patterns.size(), false);
  std::size_t pos = 0;
  while (pos < tokens.size()) {
    std::optional<std::size_t> best;
    for (std::size_t p = 0; p < patterns.size(); ++p) {
      if (exhausted[p] || !matches_at(tokens, pos, patterns[p].tokens)) continue;
      if (!best || patterns[p].tokens.size() > patterns[*best].tokens.size()) best = p;
    }
    if (!best) {
      ++pos;
      continue;
    }
    const std::size_t len = patterns[*best].tokens.size();
    out.push_back({*best, {pos, pos + len}});
    if (patterns[*best].match_mode == MatchMode::first) exhausted[*best] = true;
    pos += len;
  }
  return out;
}

std::vector<TriggerMatch> find_trigger_spans(const TokenizedPrompt& prompt,
                                             const std::vector<TriggerPattern>& patterns) {
  return find_trigger_spans(prompt.tokens, patterns);
}

EmbeddingSequence encode_prompt(const EmbeddingTable& table, const TokenizedPrompt& prompt,
                                OovPolicy oov) {
  Matrix vectors(prompt.tokens.size(), table.dim());
  for (std::size_t i = 0; i < prompt.tokens.size(); ++i) {
    auto it = table.entries().find(prompt.tokens[i]);
    if (it == table.entries().end()) {
      if (oov == OovPolicy::zero) continue;
      throw Error(Errc::unknown_token, "unknown token '" + prompt.tokens[i] + "' at position " +
                                           std::to_string(i));
    }
    std::copy(it->second.begin(), it->second.end(), vectors.row(i).begin());
  }
  return EmbeddingSequence(prompt.tokens, std::move(vectors));
}

}  // namespace famebias
