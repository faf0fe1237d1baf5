#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "famebias/bias.hpp"
#include "famebias/metrics.hpp"

namespace famebias {

enum class SweepMode { alpha_line, beta_line, grid };

SweepMode parse_sweep_mode(std::string_view s);
std::string_view to_string(SweepMode m) noexcept;

/// Alpha/beta tuning plan. Line modes vary one weight and hold the other at
/// `fixed_beta` (alpha_line) or `fixed_alpha` (beta_line).
struct SweepPlan {
  SweepMode mode = SweepMode::alpha_line;
  std::vector<double> alphas;
  std::vector<double> betas;
  double fixed_alpha = 1.8;
  double fixed_beta = 0.5;
  AttackConfig base;

  // Throws EmptyPlan or InvariantViolation.
  void validate() const;
};

struct SweepPoint {
  double alpha = 0.0;
  double beta = 0.0;
  double bsr = 0.0;
  double tfr = 0.0;
  double aii = 0.0;  // bsr * tfr
};

// "<alpha>_<beta>" using the shortest round-trip decimal form, e.g. "1.5_0.3".
std::string config_id(double alpha, double beta);

// Configs in ascending (alpha, beta) order.
std::vector<AttackConfig> enumerate_points(const SweepPlan& plan);

// Arg-max of aii; ties go to the smaller alpha, then the smaller beta.
SweepPoint select_best(const std::vector<SweepPoint>& points);

// One point per config, aii recomputed from bsr and tfr. `results` is keyed by
// config_id. Throws MissingResult naming the first config without a result.
std::vector<SweepPoint> join_results(const std::vector<AttackConfig>& configs,
                                     const std::map<std::string, Rates>& results);

// Pooled rates from per-point label files laid out as
// <root>/<sweep_id>/<config_id>/labels.csv. Configs without a file are left
// out, so join_results reports them as MissingResult.
std::map<std::string, Rates> read_point_labels(const std::filesystem::path& root, const std::string& sweep_id,
                                               const std::vector<AttackConfig>& configs);

// Reads `alpha,beta,bsr,tfr[,aii]` rows; any aii column is ignored.
std::vector<SweepPoint> read_sweep_points(const std::filesystem::path& path);

std::string render_sweep(const std::vector<SweepPoint>& points, const SweepPoint& best,
                         ReportFormat format);

}  // namespace famebias
