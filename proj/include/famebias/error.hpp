#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace famebias {

enum class Errc {
  // container / store
  bad_magic,
  unsupported_version,
  truncated,
  non_finite_value,
  duplicate_token,
  invariant_violation,
  io_failure,
  unknown_token,
  span_out_of_range,
  // prompt / attack
  empty_prompt,
  dim_mismatch,
  positional_length_mismatch,
  // metrics / agreement / sweep
  parse_error,
  duplicate_rating,
  unknown_label_value,
  empty_selection,
  length_mismatch,
  degenerate_marginals,
  uneven_rater_counts,
  empty_plan,
  empty_input,
  missing_result,
  // simulation
  duplicate_name,
  unknown_concept,
  // service
  decode_error,
  unknown_attack,
  shape_mismatch,
  bind_failure,
  config_error,
};

/// Stable CamelCase name used in wire-protocol error codes and CLI messages.
std::string_view errc_name(Errc code) noexcept;

/// Process exit code for a failure of this kind: 3 for I/O, 2 otherwise.
int exit_code(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace famebias
