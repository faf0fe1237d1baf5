#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "famebias/error.hpp"
#include "famebias/metrics.hpp"

namespace famebias {

/// N items × K categories; counts[i][j] raters put item i in category j.
/// Every row sums to the same rater count n.
struct AgreementMatrix {
  std::size_t n_items = 0;
  std::size_t n_raters_per_item = 0;
  std::vector<std::vector<std::size_t>> counts;

  // Checks K >= 2 and constant row sums; derives n_items / n_raters_per_item.
  static AgreementMatrix from_counts(std::vector<std::vector<std::size_t>> counts);
};

struct KappaResult {
  double kappa = 0.0;
  double observed_agreement = 0.0;  // P-bar (Fleiss) or p_o (Cohen)
  double expected_agreement = 0.0;  // P-bar_e or p_e
};

// Throws InvariantViolation for N < 1 or n < 2, DegenerateMarginals when P_e == 1.
KappaResult fleiss_kappa(const AgreementMatrix& m);

// Cohen's kappa over already-coded categories.
KappaResult cohen_kappa_codes(std::span<const int> a, std::span<const int> b);

/// Cohen's kappa between two raters over the same items.
/// Throws LengthMismatch, EmptyInput or DegenerateMarginals.
template <typename T>
KappaResult cohen_kappa(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::length_mismatch, "rater label lists differ in length");
  }
  std::map<T, int> codes;
  for (const auto& v : a) codes.try_emplace(v, 0);
  for (const auto& v : b) codes.try_emplace(v, 0);
  int next = 0;
  for (auto& [_, code] : codes) code = next++;
  std::vector<int> ca, cb;
  ca.reserve(a.size());
  cb.reserve(b.size());
  for (const auto& v : a) ca.push_back(codes.at(v));
  for (const auto& v : b) cb.push_back(codes.at(v));
  return cohen_kappa_codes(ca, cb);
}

template <typename T>
KappaResult cohen_kappa(const std::vector<T>& a, const std::vector<T>& b) {
  return cohen_kappa<T>(std::span<const T>(a), std::span<const T>(b));
}

enum class Aspect { bias, fidelity };

// One row per image (sorted by image_id), columns (yes, no).
// Throws UnevenRaterCounts when images have different numbers of ratings.
AgreementMatrix matrix_from_labels(const std::vector<LabelRecord>& records, Aspect aspect);

struct AgreementEntry {
  std::string group;  // "all" or a target name
  std::size_t n_images = 0;
  std::optional<KappaResult> human_fleiss;
  std::optional<KappaResult> judge_cohen;
  std::string human_note;  // why human_fleiss is absent, if it is
  std::string judge_note;
};

struct AgreementReport {
  std::string judge_id;
  std::vector<std::string> human_raters;
  std::map<Aspect, std::vector<AgreementEntry>> aspects;  // first entry is "all"
};

/// Fleiss' kappa among the human raters and Cohen's kappa between their
/// majority label and the judge, overall and per target. Statistics that are
/// undefined for a group are reported with a note instead of failing.
AgreementReport agreement_report(const std::vector<LabelRecord>& records, const std::string& judge_id);

std::string render_agreement(const AgreementReport& report, ReportFormat format);

}  // namespace famebias
