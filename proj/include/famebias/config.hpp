#pragma once

#include <filesystem>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "famebias/bias.hpp"
#include "famebias/sim.hpp"
#include "famebias/sweep.hpp"

namespace famebias {

struct RegisteredAttack {
  AttackConfig config;  // target_source always holds a resolved Matrix
  std::shared_ptr<const EmbeddingTable> table;  // for direction token references
};

// Immutable after load; shared by every proxy connection.
using AttackRegistry = std::map<std::string, RegisteredAttack>;

struct SimulateSection {
  std::uint64_t seed = 7;
  std::uint32_t dim = 16;
  std::string target = "target";
  std::string trigger = "trigger";
  std::vector<std::string> extra_concepts;
  SimSettings settings;
};

struct ProjectConfig {
  AttackRegistry attacks;
  std::optional<SweepPlan> sweep;
  std::string sweep_id = "sweep";
  std::optional<SimulateSection> simulate;
};

// INI-style file with [attack.<name>], [attack.<name>.direction.<k>], [sweep]
// and [simulate] sections. Relative paths resolve against `base_dir`.
// Throws ConfigError for unknown sections/keys or malformed values.
ProjectConfig parse_config(std::istream& in, const std::filesystem::path& base_dir);
ProjectConfig load_config(const std::filesystem::path& path);

// Whitespace-separated floats.
std::vector<double> parse_number_list(const std::string& text);
// Rows separated by ',', values by whitespace.
Matrix parse_inline_matrix(const std::string& text);

}  // namespace famebias
