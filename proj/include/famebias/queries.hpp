#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace famebias {

enum class TriggerKind { profession, tool };
enum class QueryKind { bias, fidelity };
enum class ManifestFormat { jsonl, csv };

TriggerKind parse_trigger_kind(std::string_view s);
ManifestFormat parse_manifest_format(std::string_view s);
std::string_view to_string(TriggerKind k) noexcept;
std::string_view to_string(QueryKind k) noexcept;

// "Does the person in the image look like {target}? Answer in Yes or No."
std::string bias_question(std::string_view target);
// Profession: "Does the person in the image look like a {trigger}? Answer in Yes or No."
// Tool:       "Does the person in the image look like they are holding a {trigger}?"
std::string fidelity_question(std::string_view trigger, TriggerKind kind);

struct QueryCell {
  std::string trigger;
  std::string target;
  std::vector<std::string> image_ids;
  TriggerKind kind = TriggerKind::profession;
};

struct QueryRecord {
  std::string image_id;
  QueryKind kind = QueryKind::bias;
  std::string trigger;
  std::string target;
  std::string question;
};

// Per cell, per image: the bias query then the fidelity query, in input order.
std::vector<QueryRecord> emit_queries(const std::vector<QueryCell>& cells);

// CSV with header trigger,target,image_id[,trigger_kind]. Consecutive rows
// with the same (trigger, target, kind) form one cell.
std::vector<QueryCell> read_query_cells(const std::filesystem::path& path);

std::string render_queries(const std::vector<QueryRecord>& records, ManifestFormat format);

}  // namespace famebias
