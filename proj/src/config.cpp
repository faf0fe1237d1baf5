#include "famebias/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "famebias/error.hpp"

namespace famebias {

namespace {

using boost::property_tree::ptree;

[[noreturn]] void fail(const std::string& section, const std::string& msg) {
  throw Error(Errc::config_error, "[" + section + "] " + msg);
}

double to_double(const std::string& section, const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* b = text.data();
  const char* e = b + text.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e || !std::isfinite(v)) {
    fail(section, key + ": expected a number, got '" + text + "'");
  }
  return v;
}

std::uint64_t to_uint(const std::string& section, const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const char* b = text.data();
  const char* e = b + text.size();
  auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    fail(section, key + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::vector<std::string> words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

void check_keys(const std::string& section, const ptree& node, const std::set<std::string>& allowed) {
  for (const auto& [key, _] : node) {
    if (!allowed.contains(key)) fail(section, "unknown key '" + key + "'");
  }
}

// Keeps error codes from value parsers, but tags them with the section.
template <typename F>
auto in_section(const std::string& section, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == Errc::config_error) throw;
    throw Error(e.code(), "[" + section + "] " + e.what());
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

VectorRef vector_ref(const std::string& section, const ptree& node, const std::string& key) {
  auto token = node.get_optional<std::string>(key);
  auto inline_vec = node.get_optional<std::string>(key + "_vector");
  if (token.has_value() == inline_vec.has_value()) {
    fail(section, "set exactly one of '" + key + "' or '" + key + "_vector'");
  }
  if (token) return *token;
  Vector v;
  for (double d : parse_number_list(*inline_vec)) v.push_back(static_cast<float>(d));
  return v;
}

RegisteredAttack parse_attack(const std::string& section, const ptree& node,
                              const std::map<int, std::pair<std::string, const ptree*>>& directions,
                              const std::filesystem::path& base) {
  check_keys(section, node,
             {"trigger", "match", "target_name", "target", "target_path", "target_span", "alpha",
              "beta", "pooling", "oov", "table"});
  RegisteredAttack out;
  AttackConfig& c = out.config;

  const auto trigger = node.get_optional<std::string>("trigger");
  if (!trigger) fail(section, "missing 'trigger'");
  const MatchMode mode = in_section(section, [&] { return parse_match_mode(node.get("match", "all")); });
  c.trigger = in_section(section, [&] { return TriggerPattern::from_phrase(*trigger, mode); });
  c.target_name = node.get("target_name", "");
  if (auto v = node.get_optional<std::string>("alpha")) c.alpha = to_double(section, "alpha", *v);
  if (auto v = node.get_optional<std::string>("beta")) c.beta = to_double(section, "beta", *v);
  c.pooling = in_section(section, [&] { return parse_pooling(node.get("pooling", "mean")); });
  c.oov_policy = in_section(section, [&] { return parse_oov_policy(node.get("oov", "error")); });

  const auto inline_target = node.get_optional<std::string>("target");
  const auto target_path = node.get_optional<std::string>("target_path");
  if (inline_target.has_value() == target_path.has_value()) {
    fail(section, "set exactly one of 'target' or 'target_path'");
  }
  if (inline_target) {
    c.target_source = in_section(section, [&] { return parse_inline_matrix(*inline_target); });
  } else {
    const auto span_text = node.get_optional<std::string>("target_span");
    if (!span_text) fail(section, "'target_path' needs 'target_span = <start> <end>'");
    const auto parts = words(*span_text);
    if (parts.size() != 2) fail(section, "target_span: expected '<start> <end>'");
    ContainerTarget ref{resolve(base, *target_path),
                        {to_uint(section, "target_span", parts[0]), to_uint(section, "target_span", parts[1])}};
    c.target_source = in_section(section, [&] { return resolve_target(ref); });
  }

  if (auto table = node.get_optional<std::string>("table")) {
    out.table = in_section(section, [&] {
      return std::make_shared<const EmbeddingTable>(load_table(resolve(base, *table)));
    });
  }

  for (const auto& [index, entry] : directions) {
    const auto& [dsection, dnode] = entry;
    check_keys(dsection, *dnode, {"minus", "minus_vector", "plus", "plus_vector", "gamma"});
    DirectionTerm term{vector_ref(dsection, *dnode, "minus"), vector_ref(dsection, *dnode, "plus"), 1.0};
    if (auto g = dnode->get_optional<std::string>("gamma")) term.gamma = to_double(dsection, "gamma", *g);
    c.directions.push_back(std::move(term));
  }

  in_section(section, [&] {
    c.validate();
    // Resolve direction references now so bad tokens fail at load time.
    const auto& m = std::get<Matrix>(c.target_source);
    for (const auto& d : c.directions) {
      resolve_vector(d.minus, m.cols(), out.table.get());
      resolve_vector(d.plus, m.cols(), out.table.get());
    }
    return 0;
  });
  return out;
}

SweepPlan parse_sweep(const ptree& node, std::string& sweep_id, const AttackRegistry& attacks) {
  const std::string section = "sweep";
  check_keys(section, node, {"id", "mode", "alphas", "betas", "fixed_alpha", "fixed_beta", "base"});
  SweepPlan plan;
  sweep_id = node.get("id", "sweep");
  plan.mode = in_section(section, [&] { return parse_sweep_mode(node.get("mode", "alpha_line")); });
  plan.alphas = in_section(section, [&] { return parse_number_list(node.get("alphas", "")); });
  plan.betas = in_section(section, [&] { return parse_number_list(node.get("betas", "")); });
  if (auto v = node.get_optional<std::string>("fixed_alpha")) plan.fixed_alpha = to_double(section, "fixed_alpha", *v);
  if (auto v = node.get_optional<std::string>("fixed_beta")) plan.fixed_beta = to_double(section, "fixed_beta", *v);
  if (auto base = node.get_optional<std::string>("base")) {
    auto it = attacks.find(*base);
    if (it == attacks.end()) fail(section, "base attack '" + *base + "' is not defined");
    plan.base = it->second.config;
  }
  in_section(section, [&] {
    plan.validate();
    return 0;
  });
  return plan;
}

SimulateSection parse_simulate(const ptree& node) {
  const std::string section = "simulate";
  check_keys(section, node,
             {"seed", "dim", "target", "trigger", "concepts", "tau_p", "tau_t", "n_cases", "case_seed", "noise"});
  SimulateSection s;
  if (auto v = node.get_optional<std::string>("seed")) s.seed = to_uint(section, "seed", *v);
  if (auto v = node.get_optional<std::string>("dim")) s.dim = static_cast<std::uint32_t>(to_uint(section, "dim", *v));
  s.target = node.get("target", s.target);
  s.trigger = node.get("trigger", s.trigger);
  s.extra_concepts = words(node.get("concepts", ""));
  if (auto v = node.get_optional<std::string>("tau_p")) s.settings.tau_p = to_double(section, "tau_p", *v);
  if (auto v = node.get_optional<std::string>("tau_t")) s.settings.tau_t = to_double(section, "tau_t", *v);
  if (auto v = node.get_optional<std::string>("n_cases")) s.settings.n_cases = to_uint(section, "n_cases", *v);
  if (auto v = node.get_optional<std::string>("case_seed")) s.settings.case_seed = to_uint(section, "case_seed", *v);
  if (auto v = node.get_optional<std::string>("noise")) s.settings.noise = to_double(section, "noise", *v);
  return s;
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& w : words(text)) {
    double v = 0.0;
    auto res = std::from_chars(w.data(), w.data() + w.size(), v);
    if (res.ec != std::errc() || res.ptr != w.data() + w.size() || !std::isfinite(v)) {
      throw Error(Errc::config_error, "expected a number, got '" + w + "'");
    }
    out.push_back(v);
  }
  return out;
}

Matrix parse_inline_matrix(const std::string& text) {
  std::vector<Vector> rows;
  std::istringstream in(text);
  for (std::string row; std::getline(in, row, ',');) {
    Vector v;
    for (double d : parse_number_list(row)) v.push_back(static_cast<float>(d));
    if (v.empty()) throw Error(Errc::config_error, "empty row in inline matrix");
    rows.push_back(std::move(v));
  }
  if (rows.empty()) throw Error(Errc::config_error, "inline matrix has no rows");
  try {
    return Matrix::from_rows(rows);
  } catch (const Error& e) {
    throw Error(Errc::config_error, e.what());
  }
}

ProjectConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  ptree root;
  try {
    boost::property_tree::ini_parser::read_ini(in, root);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(Errc::config_error, "line " + std::to_string(e.line()) + ": " + e.message());
  }

  // attack name -> (section node, direction index -> node)
  struct AttackSections {
    const ptree* node = nullptr;
    std::map<int, std::pair<std::string, const ptree*>> directions;
  };
  std::map<std::string, AttackSections> attack_sections;
  ProjectConfig cfg;
  const ptree* sweep_node = nullptr;

  for (const auto& [section, node] : root) {
    if (!node.data().empty()) throw Error(Errc::config_error, "key '" + section + "' outside any section");
    if (section == "sweep") {
      sweep_node = &node;
    } else if (section == "simulate") {
      cfg.simulate = parse_simulate(node);
    } else if (section.rfind("attack.", 0) == 0) {
      const std::string rest = section.substr(7);
      const auto dir = rest.find(".direction.");
      if (dir == std::string::npos) {
        if (rest.empty() || rest.find('.') != std::string::npos) fail(section, "bad attack section name");
        attack_sections[rest].node = &node;
      } else {
        const std::string name = rest.substr(0, dir);
        const std::string index = rest.substr(dir + 11);
        const int k = static_cast<int>(to_uint(section, "direction index", index));
        attack_sections[name].directions[k] = {section, &node};
      }
    } else {
      fail(section, "unknown section");
    }
  }

  for (const auto& [name, parts] : attack_sections) {
    const std::string section = "attack." + name;
    if (parts.node == nullptr) fail(section, "direction given for an undefined attack");
    cfg.attacks.emplace(name, parse_attack(section, *parts.node, parts.directions, base_dir));
  }
  if (sweep_node) cfg.sweep = parse_sweep(*sweep_node, cfg.sweep_id, cfg.attacks);
  return cfg;
}

ProjectConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  return parse_config(in, path.parent_path());
}

}  // namespace famebias
