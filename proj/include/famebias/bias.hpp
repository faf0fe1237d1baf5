#pragma once

#include <concepts>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "famebias/embedding.hpp"
#include "famebias/error.hpp"
#include "famebias/prompt.hpp"

namespace famebias {

enum class Pooling { mean, first, positional };

Pooling parse_pooling(std::string_view s);
std::string_view to_string(Pooling p) noexcept;

// Either a token looked up in an embedding table or an inline vector.
using VectorRef = std::variant<std::string, Vector>;

/// Additive semantic shift v + gamma * (plus - minus), e.g. men -> women.
struct DirectionTerm {
  VectorRef minus;
  VectorRef plus;
  double gamma = 1.0;
};

struct ContainerTarget {
  std::filesystem::path path;
  SpanRef span;
};

using TargetSource = std::variant<Matrix, ContainerTarget>;

/// Everything needed to bias one trigger phrase toward one target.
///
/// `alpha` weights the target embedding and `beta` the original trigger
/// embedding; the blend is not renormalized, so alpha + beta need not be 1.
struct AttackConfig {
  TriggerPattern trigger;
  std::string target_name;
  TargetSource target_source;
  double alpha = 1.5;
  double beta = 0.3;
  Pooling pooling = Pooling::mean;
  std::vector<DirectionTerm> directions;
  OovPolicy oov_policy = OovPolicy::error;

  // Throws InvariantViolation on bad weights, empty trigger or empty inline target.
  void validate() const;
  std::string summary() const;
};

struct BiasOutcome {
  EmbeddingSequence sequence;
  std::vector<SpanRef> modified_spans;
  std::string config_echo;
};

void check_weights(double alpha, double beta);

// Returns one row (mean, first) or the unchanged P-row matrix (positional).
Matrix pool_target(const Matrix& target, Pooling mode, std::size_t span_len);

/// alpha * target + beta * trigger, elementwise, accumulated in double.
///
/// A zero weight drops its term entirely, so (0, 1) reproduces `trigger` and
/// (1, 0) reproduces `target` bit for bit.
template <std::floating_point T>
void blend_into(std::span<T> out, std::span<const T> target, std::span<const T> trigger,
                double alpha, double beta) {
  if (target.size() != trigger.size() || out.size() != trigger.size()) {
    throw Error(Errc::dim_mismatch, "blend operands have widths " + std::to_string(target.size()) +
                                        " and " + std::to_string(trigger.size()));
  }
  check_weights(alpha, beta);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc;
    if (alpha == 0.0) {
      acc = beta * static_cast<double>(trigger[i]);
    } else if (beta == 0.0) {
      acc = alpha * static_cast<double>(target[i]);
    } else {
      acc = alpha * static_cast<double>(target[i]) + beta * static_cast<double>(trigger[i]);
    }
    out[i] = static_cast<T>(acc);
  }
}

template <std::floating_point T>
std::vector<T> blend(std::span<const T> target, std::span<const T> trigger, double alpha,
                     double beta) {
  std::vector<T> out(trigger.size());
  blend_into<T>(out, target, trigger, alpha, beta);
  return out;
}

inline Vector blend(const Vector& target, const Vector& trigger, double alpha, double beta) {
  return blend<float>(std::span<const float>(target), std::span<const float>(trigger), alpha, beta);
}

Vector resolve_vector(const VectorRef& ref, std::size_t dim, const EmbeddingTable* table);

Vector apply_direction(const Vector& v, const DirectionTerm& term, const EmbeddingTable* table);

Matrix resolve_target(const TargetSource& source);

// Matches config.trigger against the (ASCII-lowercased) sequence tokens.
BiasOutcome apply_attack(const EmbeddingSequence& seq, const AttackConfig& config,
                         const EmbeddingTable* table = nullptr);

// Same, with caller-supplied spans instead of trigger matching.
BiasOutcome apply_attack_at(const EmbeddingSequence& seq, const AttackConfig& config,
                            const std::vector<SpanRef>& spans,
                            const EmbeddingTable* table = nullptr);

// Encodes a carrier prompt elsewhere; this takes the rows naming the target.
Matrix harvest_target(const EmbeddingSequence& carrier, const SpanRef& span);

}  // namespace famebias
