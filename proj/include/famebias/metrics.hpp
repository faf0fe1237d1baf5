#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace famebias {

enum class Label { yes, no };

// Case-insensitive "yes"/"no"; throws UnknownLabelValue otherwise.
Label parse_label(std::string_view s);
std::string_view to_string(Label l) noexcept;

struct CellKey {
  std::string trigger;
  std::string target;
  std::string template_name;  // photo | portrait | image | anything else

  auto operator<=>(const CellKey&) const = default;
};

/// One rater's yes/no judgments for one generated image.
struct LabelRecord {
  std::string image_id;
  std::string trigger;
  std::string target;
  std::string template_name;
  std::string rater_id;
  Label bias = Label::no;
  Label fidelity = Label::no;

  CellKey key() const { return {trigger, target, template_name}; }
};

inline constexpr std::string_view kLabelsHeader =
    "image_id,trigger,target,template,rater_id,bias_label,fidelity_label";

// Throws ParseError(line), DuplicateRating or UnknownLabelValue.
std::vector<LabelRecord> parse_labels(std::istream& in);
std::vector<LabelRecord> ingest_labels(const std::filesystem::path& path);
void write_labels(std::ostream& out, const std::vector<LabelRecord>& records);

struct ResolvedLabel {
  std::string image_id;
  CellKey key;
  Label bias = Label::no;
  Label fidelity = Label::no;
};

// Majority vote per image, separately for bias and fidelity. Ties go to "no".
// Output is sorted by image_id. Throws ParseError if raters of one image
// disagree on its trigger/target/template.
std::vector<ResolvedLabel> consensus(const std::vector<LabelRecord>& records);

// Majority over one image's votes; ties resolve to no.
Label majority(std::size_t yes_votes, std::size_t total_votes) noexcept;

struct Rates {
  std::size_t n_images = 0;
  std::size_t bias_yes = 0;
  std::size_t fidelity_yes = 0;
  double bsr = 0.0;
  double tfr = 0.0;
  double aii = 0.0;  // bsr * tfr

  static Rates from_counts(std::size_t n_images, std::size_t bias_yes, std::size_t fidelity_yes);
};

struct RateCell {
  CellKey key;
  Rates rates;
};

using CellMap = std::map<CellKey, RateCell>;

CellMap compute_cells(const std::vector<ResolvedLabel>& resolved);

enum class GroupBy { template_name, trigger, target, overall };
GroupBy parse_group_by(std::string_view s);

// Pooled counts per group; the overall group is keyed "all".
// Throws EmptySelection when `cells` is empty.
std::map<std::string, Rates> aggregate(const CellMap& cells, GroupBy group_by);
Rates aggregate_overall(const CellMap& cells);

enum class Metric { bsr, tfr, aii };
enum class ReportFormat { markdown, csv, json };

Metric parse_metric(std::string_view s);
ReportFormat parse_report_format(std::string_view s);
std::string_view to_string(Metric m) noexcept;

// 100 * rate rounded half-up, computed exactly from integer counts.
int display_percent(const Rates& rates, Metric metric) noexcept;

// Marker rendered for a template with no cell.
inline constexpr std::string_view kMissingEntry = "\xE2\x80\x93";  // en dash

struct ReportOptions {
  // Explicit orders; anything not listed follows alphabetically.
  std::vector<std::string> trigger_order;
  std::vector<std::string> target_order;
  // Empty means photo, portrait, image, then the rest alphabetically.
  std::vector<std::string> template_order;
};

/// Trigger × target table of per-template percentage triplets ("a|b|c"),
/// with an "all" column and row holding the pooled marginals.
std::string render_report(const CellMap& cells, Metric metric, ReportFormat format,
                          const ReportOptions& options = {});

// Per-template and overall pooled rates as a small table.
std::string render_summary(const CellMap& cells, ReportFormat format,
                           const ReportOptions& options = {});

}  // namespace famebias
