#include "famebias/error.hpp"

namespace famebias {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::bad_magic: return "BadMagic";
    case Errc::unsupported_version: return "UnsupportedVersion";
    case Errc::truncated: return "Truncated";
    case Errc::non_finite_value: return "NonFiniteValue";
    case Errc::duplicate_token: return "DuplicateToken";
    case Errc::invariant_violation: return "InvariantViolation";
    case Errc::io_failure: return "IoFailure";
    case Errc::unknown_token: return "UnknownToken";
    case Errc::span_out_of_range: return "SpanOutOfRange";
    case Errc::empty_prompt: return "EmptyPrompt";
    case Errc::dim_mismatch: return "DimMismatch";
    case Errc::positional_length_mismatch: return "PositionalLengthMismatch";
    case Errc::parse_error: return "ParseError";
    case Errc::duplicate_rating: return "DuplicateRating";
    case Errc::unknown_label_value: return "UnknownLabelValue";
    case Errc::empty_selection: return "EmptySelection";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::degenerate_marginals: return "DegenerateMarginals";
    case Errc::uneven_rater_counts: return "UnevenRaterCounts";
    case Errc::empty_plan: return "EmptyPlan";
    case Errc::empty_input: return "EmptyInput";
    case Errc::missing_result: return "MissingResult";
    case Errc::duplicate_name: return "DuplicateName";
    case Errc::unknown_concept: return "UnknownConcept";
    case Errc::decode_error: return "DecodeError";
    case Errc::unknown_attack: return "UnknownAttack";
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::bind_failure: return "BindFailure";
    case Errc::config_error: return "ConfigError";
  }
  return "Unknown";
}

int exit_code(Errc code) noexcept {
  switch (code) {
    case Errc::io_failure:
    case Errc::bind_failure:
      return 3;
    default:
      return 2;
  }
}

}  // namespace famebias
