#include "famebias/queries.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "famebias/csv.hpp"
#include "famebias/error.hpp"

namespace famebias {

TriggerKind parse_trigger_kind(std::string_view s) {
  if (s.empty() || s == "profession") return TriggerKind::profession;
  if (s == "tool") return TriggerKind::tool;
  throw Error(Errc::parse_error, "trigger_kind must be profession or tool, got '" + std::string(s) + "'");
}

ManifestFormat parse_manifest_format(std::string_view s) {
  if (s == "jsonl") return ManifestFormat::jsonl;
  if (s == "csv") return ManifestFormat::csv;
  throw Error(Errc::config_error, "manifest format must be jsonl or csv, got '" + std::string(s) + "'");
}

std::string_view to_string(TriggerKind k) noexcept {
  return k == TriggerKind::tool ? "tool" : "profession";
}

std::string_view to_string(QueryKind k) noexcept {
  return k == QueryKind::bias ? "bias" : "fidelity";
}

std::string bias_question(std::string_view target) {
  return "Does the person in the image look like " + std::string(target) + "? Answer in Yes or No.";
}

std::string fidelity_question(std::string_view trigger, TriggerKind kind) {
  if (kind == TriggerKind::tool) {
    return "Does the person in the image look like they are holding a " + std::string(trigger) + "?";
  }
  return "Does the person in the image look like a " + std::string(trigger) + "? Answer in Yes or No.";
}

std::vector<QueryRecord> emit_queries(const std::vector<QueryCell>& cells) {
  std::vector<QueryRecord> out;
  for (const auto& cell : cells) {
    const std::string bias = bias_question(cell.target);
    const std::string fidelity = fidelity_question(cell.trigger, cell.kind);
    for (const auto& image : cell.image_ids) {
      out.push_back({image, QueryKind::bias, cell.trigger, cell.target, bias});
      out.push_back({image, QueryKind::fidelity, cell.trigger, cell.target, fidelity});
    }
  }
  return out;
}

std::vector<QueryCell> read_query_cells(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  const csv::Table table = csv::read(in);
  auto column = [&](std::string_view name) -> std::ptrdiff_t {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    return it == table.header.end() ? -1 : it - table.header.begin();
  };
  const auto trigger = column("trigger");
  const auto target = column("target");
  const auto image = column("image_id");
  const auto kind = column("trigger_kind");
  if (trigger < 0 || target < 0 || image < 0) {
    throw Error(Errc::parse_error, path.string() + ": header needs trigger,target,image_id");
  }
  std::vector<QueryCell> cells;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    TriggerKind k = TriggerKind::profession;
    try {
      if (kind >= 0) k = parse_trigger_kind(row[kind]);
    } catch (const Error& e) {
      throw Error(Errc::parse_error, path.string() + ":" + std::to_string(table.line_numbers[i]) + ": " + e.what());
    }
    if (cells.empty() || cells.back().trigger != row[trigger] || cells.back().target != row[target] ||
        cells.back().kind != k) {
      cells.push_back({row[trigger], row[target], {}, k});
    }
    cells.back().image_ids.push_back(row[image]);
  }
  return cells;
}

std::string render_queries(const std::vector<QueryRecord>& records, ManifestFormat format) {
  std::ostringstream out;
  if (format == ManifestFormat::csv) out << "image_id,kind,trigger,target,question\n";
  for (const auto& r : records) {
    if (format == ManifestFormat::csv) {
      out << csv::join({r.image_id, std::string(to_string(r.kind)), r.trigger, r.target, r.question}) << '\n';
    } else {
      nlohmann::ordered_json j;
      j["image_id"] = r.image_id;
      j["kind"] = to_string(r.kind);
      j["trigger"] = r.trigger;
      j["target"] = r.target;
      j["question"] = r.question;
      out << j.dump() << '\n';
    }
  }
  return out.str();
}

}  // namespace famebias
