#include "famebias/sweep.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "famebias/csv.hpp"
#include "famebias/error.hpp"

namespace famebias {

namespace {

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& s, const std::string& where) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw Error(Errc::parse_error, where + "bad number '" + s + "'");
  }
  return v;
}

bool better(const SweepPoint& a, const SweepPoint& b) {
  if (a.aii != b.aii) return a.aii > b.aii;
  if (a.alpha != b.alpha) return a.alpha < b.alpha;
  return a.beta < b.beta;
}

}  // namespace

SweepMode parse_sweep_mode(std::string_view s) {
  if (s == "alpha_line") return SweepMode::alpha_line;
  if (s == "beta_line") return SweepMode::beta_line;
  if (s == "grid") return SweepMode::grid;
  throw Error(Errc::config_error, "sweep mode must be alpha_line, beta_line or grid");
}

std::string_view to_string(SweepMode m) noexcept {
  switch (m) {
    case SweepMode::alpha_line: return "alpha_line";
    case SweepMode::beta_line: return "beta_line";
    case SweepMode::grid: return "grid";
  }
  return "grid";
}

void SweepPlan::validate() const {
  const bool need_alphas = mode != SweepMode::beta_line;
  const bool need_betas = mode != SweepMode::alpha_line;
  if ((need_alphas && alphas.empty()) || (need_betas && betas.empty())) {
    throw Error(Errc::empty_plan, "sweep plan has no values to enumerate");
  }
  auto bad = [](double v) { return !std::isfinite(v) || v < 0.0; };
  if (std::any_of(alphas.begin(), alphas.end(), bad) || std::any_of(betas.begin(), betas.end(), bad) ||
      bad(fixed_alpha) || bad(fixed_beta)) {
    throw Error(Errc::invariant_violation, "sweep weights must be finite and non-negative");
  }
}

std::string config_id(double alpha, double beta) { return shortest(alpha) + "_" + shortest(beta); }

std::vector<AttackConfig> enumerate_points(const SweepPlan& plan) {
  plan.validate();
  std::vector<std::pair<double, double>> weights;
  switch (plan.mode) {
    case SweepMode::alpha_line:
      for (double a : plan.alphas) weights.emplace_back(a, plan.fixed_beta);
      break;
    case SweepMode::beta_line:
      for (double b : plan.betas) weights.emplace_back(plan.fixed_alpha, b);
      break;
    case SweepMode::grid:
      for (double a : plan.alphas) {
        for (double b : plan.betas) weights.emplace_back(a, b);
      }
      break;
  }
  std::stable_sort(weights.begin(), weights.end());
  std::vector<AttackConfig> out;
  out.reserve(weights.size());
  for (const auto& [a, b] : weights) {
    check_weights(a, b);
    AttackConfig c = plan.base;
    c.alpha = a;
    c.beta = b;
    out.push_back(std::move(c));
  }
  return out;
}

SweepPoint select_best(const std::vector<SweepPoint>& points) {
  if (points.empty()) throw Error(Errc::empty_input, "no sweep points to select from");
  return *std::min_element(points.begin(), points.end(), better);
}

std::vector<SweepPoint> join_results(const std::vector<AttackConfig>& configs,
                                     const std::map<std::string, Rates>& results) {
  std::vector<SweepPoint> out;
  out.reserve(configs.size());
  for (const auto& c : configs) {
    const auto id = config_id(c.alpha, c.beta);
    auto it = results.find(id);
    if (it == results.end()) throw Error(Errc::missing_result, "no result for sweep config " + id);
    const Rates& r = it->second;
    out.push_back({c.alpha, c.beta, r.bsr, r.tfr, r.bsr * r.tfr});
  }
  return out;
}

std::map<std::string, Rates> read_point_labels(const std::filesystem::path& root, const std::string& sweep_id,
                                               const std::vector<AttackConfig>& configs) {
  std::map<std::string, Rates> out;
  for (const auto& c : configs) {
    const std::string id = config_id(c.alpha, c.beta);
    const auto path = root / sweep_id / id / "labels.csv";
    if (!std::filesystem::exists(path)) continue;
    out[id] = aggregate_overall(compute_cells(consensus(ingest_labels(path))));
  }
  return out;
}

std::vector<SweepPoint> read_sweep_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_failure, "cannot open " + path.string());
  const auto table = csv::read(in);
  auto col = [&](std::string_view name) {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) {
      throw Error(Errc::parse_error, path.string() + ": missing column '" + std::string(name) + "'");
    }
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const std::size_t ca = col("alpha"), cb = col("beta"), cs = col("bsr"), ct = col("tfr");
  std::vector<SweepPoint> out;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& f = table.rows[i];
    const std::string where = path.string() + ": line " + std::to_string(table.line_numbers[i]) + ": ";
    SweepPoint p{parse_number(f[ca], where), parse_number(f[cb], where), parse_number(f[cs], where),
                 parse_number(f[ct], where), 0.0};
    if (p.bsr < 0 || p.bsr > 1 || p.tfr < 0 || p.tfr > 1) {
      throw Error(Errc::parse_error, where + "rates must lie in [0, 1]");
    }
    p.aii = p.bsr * p.tfr;
    out.push_back(p);
  }
  return out;
}

std::string render_sweep(const std::vector<SweepPoint>& points, const SweepPoint& best,
                         ReportFormat format) {
  auto is_best = [&](const SweepPoint& p) { return p.alpha == best.alpha && p.beta == best.beta; };
  std::ostringstream out;
  switch (format) {
    case ReportFormat::json: {
      auto to_json = [](const SweepPoint& p) {
        return nlohmann::json{{"id", config_id(p.alpha, p.beta)}, {"alpha", p.alpha}, {"beta", p.beta},
                              {"bsr", p.bsr}, {"tfr", p.tfr}, {"aii", p.aii}};
      };
      nlohmann::json doc;
      doc["points"] = nlohmann::json::array();
      for (const auto& p : points) doc["points"].push_back(to_json(p));
      doc["best"] = to_json(best);
      out << doc.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv:
      out << "id,alpha,beta,bsr,tfr,aii,best\n";
      for (const auto& p : points) {
        out << config_id(p.alpha, p.beta) << ',' << shortest(p.alpha) << ',' << shortest(p.beta) << ','
            << shortest(p.bsr) << ',' << shortest(p.tfr) << ',' << shortest(p.aii) << ','
            << (is_best(p) ? 1 : 0) << '\n';
      }
      break;
    case ReportFormat::markdown:
      out << "| alpha | beta | BSR | TFR | AII |\n|---|---|---|---|---|\n";
      for (const auto& p : points) {
        out << "| " << shortest(p.alpha) << " | " << shortest(p.beta) << " | " << shortest(p.bsr)
            << " | " << shortest(p.tfr) << " | " << shortest(p.aii) << (is_best(p) ? " **best**" : "")
            << " |\n";
      }
      out << "\nbest: alpha=" << shortest(best.alpha) << " beta=" << shortest(best.beta)
          << " aii=" << shortest(best.aii) << '\n';
      break;
  }
  return out.str();
}

}  // namespace famebias
