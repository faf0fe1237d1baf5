#include "famebias/bias.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace famebias {

Pooling parse_pooling(std::string_view s) {
  if (s == "mean") return Pooling::mean;
  if (s == "first") return Pooling::first;
  if (s == "positional") return Pooling::positional;
  throw Error(Errc::config_error,
              "pooling must be mean, first or positional, got '" + std::string(s) + "'");
}

std::string_view to_string(Pooling p) noexcept {
  switch (p) {
    case Pooling::mean: return "mean";
    case Pooling::first: return "first";
    case Pooling::positional: return "positional";
  }
  return "mean";
}

void check_weights(double alpha, double beta) {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0.0 || beta < 0.0 ||
      alpha + beta <= 0.0) {
    std::ostringstream msg;
    msg << "weights need alpha >= 0, beta >= 0, alpha + beta > 0 (got alpha=" << alpha
        << ", beta=" << beta << ")";
    throw Error(Errc::invariant_violation, msg.str());
  }
}

void AttackConfig::validate() const {
  check_weights(alpha, beta);
  if (trigger.tokens.empty() ||
      std::any_of(trigger.tokens.begin(), trigger.tokens.end(), [](const auto& t) { return t.empty(); })) {
    throw Error(Errc::invariant_violation, "trigger pattern needs at least one non-empty token");
  }
  if (const auto* m = std::get_if<Matrix>(&target_source); m && m->empty()) {
    throw Error(Errc::invariant_violation, "target matrix is empty");
  }
  for (const auto& d : directions) {
    if (!std::isfinite(d.gamma)) throw Error(Errc::invariant_violation, "direction gamma must be finite");
  }
}

std::string AttackConfig::summary() const {
  std::ostringstream out;
  out << "trigger='" << trigger.phrase() << "' target='" << target_name << "' alpha=" << alpha
      << " beta=" << beta << " pooling=" << to_string(pooling)
      << " match=" << to_string(trigger.match_mode) << " directions=" << directions.size();
  return out.str();
}

Matrix pool_target(const Matrix& target, Pooling mode, std::size_t span_len) {
  if (target.empty()) throw Error(Errc::invariant_violation, "target matrix is empty");
  switch (mode) {
    case Pooling::first: {
      Matrix out(1, target.cols());
      const auto r = target.row(0);
      std::copy(r.begin(), r.end(), out.row(0).begin());
      return out;
    }
    case Pooling::positional:
      if (target.rows() != span_len) {
        throw Error(Errc::positional_length_mismatch,
                    "positional pooling pairs " + std::to_string(target.rows()) +
                        " target rows with a span of " + std::to_string(span_len));
      }
      return target;
    case Pooling::mean:
      break;
  }
  std::vector<double> sum(target.cols(), 0.0);
  for (std::size_t r = 0; r < target.rows(); ++r) {
    const auto row = target.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) sum[c] += row[c];
  }
  Matrix out(1, target.cols());
  const double n = static_cast<double>(target.rows());
  for (std::size_t c = 0; c < sum.size(); ++c) out.row(0)[c] = static_cast<float>(sum[c] / n);
  return out;
}

Vector resolve_vector(const VectorRef& ref, std::size_t dim, const EmbeddingTable* table) {
  Vector v;
  if (const auto* token = std::get_if<std::string>(&ref)) {
    if (table == nullptr) {
      throw Error(Errc::unknown_token, "token reference '" + *token + "' needs an embedding table");
    }
    v = lookup(*table, *token);
  } else {
    v = std::get<Vector>(ref);
  }
  if (v.size() != dim) {
    throw Error(Errc::dim_mismatch, "direction vector has width " + std::to_string(v.size()) +
                                        ", expected " + std::to_string(dim));
  }
  return v;
}

Vector apply_direction(const Vector& v, const DirectionTerm& term, const EmbeddingTable* table) {
  const Vector minus = resolve_vector(term.minus, v.size(), table);
  const Vector plus = resolve_vector(term.plus, v.size(), table);
  if (term.gamma == 0.0) return v;
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double shift = term.gamma * (static_cast<double>(plus[i]) - static_cast<double>(minus[i]));
    out[i] = shift == 0.0 ? v[i] : static_cast<float>(static_cast<double>(v[i]) + shift);
  }
  return out;
}

Matrix resolve_target(const TargetSource& source) {
  if (const auto* m = std::get_if<Matrix>(&source)) return *m;
  const auto& ref = std::get<ContainerTarget>(source);
  return harvest_target(read_sequence(ref.path), ref.span);
}

BiasOutcome apply_attack_at(const EmbeddingSequence& seq, const AttackConfig& config,
                            const std::vector<SpanRef>& spans, const EmbeddingTable* table) {
  config.validate();
  const Matrix target = resolve_target(config.target_source);
  if (target.cols() != seq.dim()) {
    throw Error(Errc::dim_mismatch, "target width " + std::to_string(target.cols()) +
                                        " differs from sequence dim " + std::to_string(seq.dim()));
  }

  std::vector<DirectionTerm> resolved;
  resolved.reserve(config.directions.size());
  for (const auto& d : config.directions) {
    resolved.push_back({resolve_vector(d.minus, seq.dim(), table),
                        resolve_vector(d.plus, seq.dim(), table), d.gamma});
  }

  std::vector<SpanRef> sorted = spans;
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.start < b.start; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    check_span(sorted[i], seq.size());
    if (i > 0 && sorted[i].start < sorted[i - 1].end) {
      throw Error(Errc::span_out_of_range, "modified spans overlap");
    }
  }

  Matrix out = seq.vectors();
  Vector row(seq.dim());
  for (const auto& span : sorted) {
    const Matrix pooled = pool_target(target, config.pooling, span.size());
    for (std::size_t pos = span.start; pos < span.end; ++pos) {
      const auto target_row = pooled.rows() == 1 ? pooled.row(0) : pooled.row(pos - span.start);
      blend_into<float>(row, target_row, seq.vectors().row(pos), config.alpha, config.beta);
      for (const auto& d : resolved) row = apply_direction(row, d, nullptr);
      std::copy(row.begin(), row.end(), out.row(pos).begin());
    }
  }
  return BiasOutcome{EmbeddingSequence(seq.tokens(), std::move(out), seq.ids()), std::move(sorted),
                     config.summary()};
}

BiasOutcome apply_attack(const EmbeddingSequence& seq, const AttackConfig& config,
                         const EmbeddingTable* table) {
  std::vector<std::string> lowered;
  lowered.reserve(seq.size());
  for (const auto& t : seq.tokens()) lowered.push_back(ascii_lower(t));
  std::vector<SpanRef> spans;
  for (const auto& m : find_trigger_spans(lowered, {config.trigger})) spans.push_back(m.span);
  return apply_attack_at(seq, config, spans, table);
}

Matrix harvest_target(const EmbeddingSequence& carrier, const SpanRef& span) {
  return extract_span(carrier, span);
}

}  // namespace famebias
