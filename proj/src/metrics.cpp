#include "famebias/metrics.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include "json.hpp"

#include "famebias/csv.hpp"
#include "famebias/error.hpp"
#include "famebias/prompt.hpp"

namespace famebias {

namespace {

const std::vector<std::string> kLabelColumns = {"image_id", "trigger",   "target",        "template",
                                                "rater_id", "bias_label", "fidelity_label"};

std::vector<std::string> ordered(const std::set<std::string>& present,
                                 const std::vector<std::string>& preferred) {
  std::vector<std::string> out;
  for (const auto& p : preferred) {
    if (present.contains(p) && std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  for (const auto& p : present) {
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  return out;
}

struct Layout {
  std::vector<std::string> triggers;
  std::vector<std::string> targets;
  std::vector<std::string> templates;
};

Layout layout_of(const CellMap& cells, const ReportOptions& options) {
  std::set<std::string> triggers, targets, templates;
  for (const auto& [key, _] : cells) {
    triggers.insert(key.trigger);
    targets.insert(key.target);
    templates.insert(key.template_name);
  }
  const std::vector<std::string> default_templates = {"photo", "portrait", "image"};
  return {ordered(triggers, options.trigger_order), ordered(targets, options.target_order),
          ordered(templates, options.template_order.empty() ? default_templates
                                                            : options.template_order)};
}

// Pooled rates over cells matching the (optional) trigger/target for a template.
std::optional<Rates> pooled(const CellMap& cells, const std::string* trigger,
                            const std::string* target, const std::string& tmpl) {
  std::size_t n = 0, b = 0, f = 0;
  for (const auto& [key, cell] : cells) {
    if (key.template_name != tmpl) continue;
    if (trigger && key.trigger != *trigger) continue;
    if (target && key.target != *target) continue;
    n += cell.rates.n_images;
    b += cell.rates.bias_yes;
    f += cell.rates.fidelity_yes;
  }
  if (n == 0) return std::nullopt;
  return Rates::from_counts(n, b, f);
}

using Triplet = std::vector<std::optional<int>>;

Triplet triplet(const CellMap& cells, const Layout& layout, const std::string* trigger,
                const std::string* target, Metric metric) {
  Triplet out;
  for (const auto& tmpl : layout.templates) {
    auto r = pooled(cells, trigger, target, tmpl);
    out.push_back(r ? std::optional<int>(display_percent(*r, metric)) : std::nullopt);
  }
  return out;
}

std::string format_triplet(const Triplet& t, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (i > 0) out += sep;
    out += t[i] ? std::to_string(*t[i]) : std::string(kMissingEntry);
  }
  return out;
}

nlohmann::json triplet_json(const Triplet& t) {
  auto arr = nlohmann::json::array();
  for (const auto& v : t) arr.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
  return arr;
}

nlohmann::json rates_json(const Rates& r) {
  return {{"n_images", r.n_images}, {"bias_yes", r.bias_yes}, {"fidelity_yes", r.fidelity_yes},
          {"bsr", r.bsr},           {"tfr", r.tfr},           {"aii", r.aii}};
}

std::string percent1(double rate) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1) << 100.0 * rate;
  return out.str();
}

}  // namespace

Label parse_label(std::string_view s) {
  const auto lower = ascii_lower(s);
  if (lower == "yes") return Label::yes;
  if (lower == "no") return Label::no;
  throw Error(Errc::unknown_label_value, "label must be yes or no, got '" + std::string(s) + "'");
}

std::string_view to_string(Label l) noexcept { return l == Label::yes ? "yes" : "no"; }

std::vector<LabelRecord> parse_labels(std::istream& in) {
  const auto table = csv::read(in);
  if (table.header != kLabelColumns) {
    throw Error(Errc::parse_error, "line 1: labels header must be '" + std::string(kLabelsHeader) + "'");
  }
  std::vector<LabelRecord> out;
  out.reserve(table.rows.size());
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& f = table.rows[i];
    const std::string where = "line " + std::to_string(table.line_numbers[i]) + ": ";
    for (std::size_t c : {0u, 1u, 2u, 3u, 4u}) {
      if (f[c].empty()) throw Error(Errc::parse_error, where + "empty " + kLabelColumns[c]);
    }
    LabelRecord r{f[0], f[1], f[2], f[3], f[4], Label::no, Label::no};
    try {
      r.bias = parse_label(f[5]);
      r.fidelity = parse_label(f[6]);
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
    if (!seen.emplace(r.image_id, r.rater_id).second) {
      throw Error(Errc::duplicate_rating,
                  where + "rater '" + r.rater_id + "' already rated image '" + r.image_id + "'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<LabelRecord> ingest_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  try {
    return parse_labels(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_labels(std::ostream& out, const std::vector<LabelRecord>& records) {
  out << kLabelsHeader << '\n';
  for (const auto& r : records) {
    out << csv::join({r.image_id, r.trigger, r.target, r.template_name, r.rater_id,
                      std::string(to_string(r.bias)), std::string(to_string(r.fidelity))})
        << '\n';
  }
}

Label majority(std::size_t yes_votes, std::size_t total_votes) noexcept {
  return 2 * yes_votes > total_votes ? Label::yes : Label::no;
}

std::vector<ResolvedLabel> consensus(const std::vector<LabelRecord>& records) {
  struct Votes {
    CellKey key;
    std::size_t total = 0, bias_yes = 0, fidelity_yes = 0;
  };
  std::map<std::string, Votes> by_image;
  for (const auto& r : records) {
    auto [it, fresh] = by_image.try_emplace(r.image_id, Votes{r.key()});
    if (!fresh && it->second.key != r.key()) {
      throw Error(Errc::parse_error, "image '" + r.image_id + "' has conflicting trigger/target/template");
    }
    ++it->second.total;
    it->second.bias_yes += r.bias == Label::yes;
    it->second.fidelity_yes += r.fidelity == Label::yes;
  }
  std::vector<ResolvedLabel> out;
  out.reserve(by_image.size());
  for (const auto& [id, v] : by_image) {
    out.push_back({id, v.key, majority(v.bias_yes, v.total), majority(v.fidelity_yes, v.total)});
  }
  return out;
}

Rates Rates::from_counts(std::size_t n_images, std::size_t bias_yes, std::size_t fidelity_yes) {
  Rates r{n_images, bias_yes, fidelity_yes, 0.0, 0.0, 0.0};
  if (n_images > 0) {
    r.bsr = static_cast<double>(bias_yes) / static_cast<double>(n_images);
    r.tfr = static_cast<double>(fidelity_yes) / static_cast<double>(n_images);
    r.aii = r.bsr * r.tfr;
  }
  return r;
}

CellMap compute_cells(const std::vector<ResolvedLabel>& resolved) {
  std::map<CellKey, std::array<std::size_t, 3>> counts;
  for (const auto& r : resolved) {
    auto& c = counts[r.key];
    ++c[0];
    c[1] += r.bias == Label::yes;
    c[2] += r.fidelity == Label::yes;
  }
  CellMap cells;
  for (const auto& [key, c] : counts) {
    cells.emplace(key, RateCell{key, Rates::from_counts(c[0], c[1], c[2])});
  }
  return cells;
}

GroupBy parse_group_by(std::string_view s) {
  if (s == "template") return GroupBy::template_name;
  if (s == "trigger") return GroupBy::trigger;
  if (s == "target") return GroupBy::target;
  if (s == "overall") return GroupBy::overall;
  throw Error(Errc::config_error, "group must be template, trigger, target or overall");
}

std::map<std::string, Rates> aggregate(const CellMap& cells, GroupBy group_by) {
  if (cells.empty()) throw Error(Errc::empty_selection, "no cells to aggregate");
  std::map<std::string, std::array<std::size_t, 3>> counts;
  for (const auto& [key, cell] : cells) {
    std::string group;
    switch (group_by) {
      case GroupBy::template_name: group = key.template_name; break;
      case GroupBy::trigger: group = key.trigger; break;
      case GroupBy::target: group = key.target; break;
      case GroupBy::overall: group = "all"; break;
    }
    auto& c = counts[group];
    c[0] += cell.rates.n_images;
    c[1] += cell.rates.bias_yes;
    c[2] += cell.rates.fidelity_yes;
  }
  std::map<std::string, Rates> out;
  for (const auto& [group, c] : counts) out.emplace(group, Rates::from_counts(c[0], c[1], c[2]));
  return out;
}

Rates aggregate_overall(const CellMap& cells) {
  return aggregate(cells, GroupBy::overall).at("all");
}

Metric parse_metric(std::string_view s) {
  if (s == "bsr") return Metric::bsr;
  if (s == "tfr") return Metric::tfr;
  if (s == "aii") return Metric::aii;
  throw Error(Errc::config_error, "metric must be bsr, tfr or aii");
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  throw Error(Errc::config_error, "format must be markdown, csv or json");
}

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::bsr: return "bsr";
    case Metric::tfr: return "tfr";
    case Metric::aii: return "aii";
  }
  return "bsr";
}

int display_percent(const Rates& r, Metric metric) noexcept {
  if (r.n_images == 0) return 0;
  const std::uint64_t n = r.n_images;
  // floor(100 * num / den + 1/2) == floor((200 * num + den) / (2 * den))
  std::uint64_t num = 0, den = 0;
  switch (metric) {
    case Metric::bsr: num = r.bias_yes; den = n; break;
    case Metric::tfr: num = r.fidelity_yes; den = n; break;
    case Metric::aii: num = static_cast<std::uint64_t>(r.bias_yes) * r.fidelity_yes; den = n * n; break;
  }
  return static_cast<int>((200 * num + den) / (2 * den));
}

std::string render_report(const CellMap& cells, Metric metric, ReportFormat format,
                          const ReportOptions& options) {
  if (cells.empty()) throw Error(Errc::empty_selection, "no cells to report");
  const Layout lay = layout_of(cells, options);

  // rows: triggers + "all"; columns: targets + "all"
  std::vector<std::vector<Triplet>> grid;
  for (std::size_t r = 0; r <= lay.triggers.size(); ++r) {
    const std::string* trig = r < lay.triggers.size() ? &lay.triggers[r] : nullptr;
    auto& row = grid.emplace_back();
    for (std::size_t c = 0; c <= lay.targets.size(); ++c) {
      const std::string* targ = c < lay.targets.size() ? &lay.targets[c] : nullptr;
      row.push_back(triplet(cells, lay, trig, targ, metric));
    }
  }
  auto row_name = [&](std::size_t r) { return r < lay.triggers.size() ? lay.triggers[r] : std::string("all"); };

  std::ostringstream out;
  switch (format) {
    case ReportFormat::csv: {
      std::vector<std::string> header = {"trigger"};
      header.insert(header.end(), lay.targets.begin(), lay.targets.end());
      header.push_back("all");
      out << csv::join(header) << '\n';
      for (std::size_t r = 0; r < grid.size(); ++r) {
        std::vector<std::string> fields = {row_name(r)};
        for (const auto& t : grid[r]) fields.push_back(format_triplet(t, "|"));
        out << csv::join(fields) << '\n';
      }
      break;
    }
    case ReportFormat::markdown: {
      std::string tmpl;
      for (std::size_t i = 0; i < lay.templates.size(); ++i) tmpl += (i ? " / " : "") + lay.templates[i];
      std::string metric_name(to_string(metric));
      std::transform(metric_name.begin(), metric_name.end(), metric_name.begin(), ::toupper);
      out << "**" << metric_name << " (%)** per template: " << tmpl << "\n\n";
      out << "| Trigger |";
      for (const auto& t : lay.targets) out << ' ' << t << " |";
      out << " All |\n|---|";
      for (std::size_t c = 0; c <= lay.targets.size(); ++c) out << "---|";
      out << '\n';
      for (std::size_t r = 0; r < grid.size(); ++r) {
        out << "| " << (r < lay.triggers.size() ? lay.triggers[r] : std::string("**All**")) << " |";
        for (const auto& t : grid[r]) out << ' ' << format_triplet(t, "\\|") << " |";
        out << '\n';
      }
      break;
    }
    case ReportFormat::json: {
      nlohmann::json doc;
      doc["metric"] = to_string(metric);
      doc["templates"] = lay.templates;
      doc["triggers"] = lay.triggers;
      doc["targets"] = lay.targets;
      auto table = nlohmann::json::array();
      for (std::size_t r = 0; r < lay.triggers.size(); ++r) {
        auto row = nlohmann::json::array();
        for (std::size_t c = 0; c < lay.targets.size(); ++c) row.push_back(triplet_json(grid[r][c]));
        table.push_back(row);
      }
      doc["table"] = table;
      auto by_trigger = nlohmann::json::array();
      for (std::size_t r = 0; r < lay.triggers.size(); ++r) by_trigger.push_back(triplet_json(grid[r].back()));
      auto by_target = nlohmann::json::array();
      for (std::size_t c = 0; c < lay.targets.size(); ++c) by_target.push_back(triplet_json(grid.back()[c]));
      doc["marginals"] = {{"by_trigger", by_trigger},
                          {"by_target", by_target},
                          {"overall", triplet_json(grid.back().back())}};
      auto cell_list = nlohmann::json::array();
      for (const auto& [key, cell] : cells) {
        auto j = rates_json(cell.rates);
        j["trigger"] = key.trigger;
        j["target"] = key.target;
        j["template"] = key.template_name;
        j["percent"] = display_percent(cell.rates, metric);
        cell_list.push_back(std::move(j));
      }
      doc["cells"] = std::move(cell_list);
      nlohmann::json agg;
      for (const auto& [name, rates] : aggregate(cells, GroupBy::template_name)) agg["by_template"][name] = rates_json(rates);
      agg["overall"] = rates_json(aggregate_overall(cells));
      doc["aggregates"] = std::move(agg);
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

std::string render_summary(const CellMap& cells, ReportFormat format, const ReportOptions& options) {
  const auto by_template = aggregate(cells, GroupBy::template_name);
  const Layout lay = layout_of(cells, options);
  std::vector<std::pair<std::string, Rates>> rows;
  for (const auto& t : lay.templates) rows.emplace_back(t, by_template.at(t));
  rows.emplace_back("all", aggregate_overall(cells));

  std::ostringstream out;
  switch (format) {
    case ReportFormat::csv:
      out << "template,n_images,bsr_pct,tfr_pct,aii_pct\n";
      for (const auto& [name, r] : rows) {
        out << csv::escape(name) << ',' << r.n_images << ',' << percent1(r.bsr) << ','
            << percent1(r.tfr) << ',' << percent1(r.aii) << '\n';
      }
      break;
    case ReportFormat::markdown:
      out << "| Template | Images | BSR (%) | TFR (%) | AII (%) |\n|---|---|---|---|---|\n";
      for (const auto& [name, r] : rows) {
        out << "| " << name << " | " << r.n_images << " | " << percent1(r.bsr) << " | "
            << percent1(r.tfr) << " | " << percent1(r.aii) << " |\n";
      }
      break;
    case ReportFormat::json: {
      nlohmann::json doc = nlohmann::json::array();
      for (const auto& [name, r] : rows) {
        auto j = rates_json(r);
        j["template"] = name;
        doc.push_back(std::move(j));
      }
      out << doc.dump(2) << '\n';
      break;
    }
  }
  return out.str();
}

}  // namespace famebias
