#include "famebias/agreement.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "famebias/csv.hpp"

namespace famebias {

namespace {

KappaResult finish(double observed, double expected) {
  if (expected >= 1.0) {
    throw Error(Errc::degenerate_marginals,
                "all ratings fall in one category; kappa is undefined");
  }
  return {(observed - expected) / (1.0 - expected), observed, expected};
}

Label pick(const LabelRecord& r, Aspect aspect) {
  return aspect == Aspect::bias ? r.bias : r.fidelity;
}

std::string_view aspect_name(Aspect a) { return a == Aspect::bias ? "bias" : "fidelity"; }

std::string kappa_text(const std::optional<KappaResult>& k, const std::string& note) {
  if (!k) return "n/a (" + note + ")";
  std::ostringstream out;
  out << std::fixed << std::setprecision(3) << k->kappa;
  return out.str();
}

nlohmann::json kappa_json(const std::optional<KappaResult>& k, const std::string& note) {
  if (!k) return {{"kappa", nullptr}, {"note", note}};
  return {{"kappa", k->kappa},
          {"observed_agreement", k->observed_agreement},
          {"expected_agreement", k->expected_agreement}};
}

AgreementEntry entry_for(const std::string& group, const std::vector<LabelRecord>& humans,
                         const std::vector<LabelRecord>& judge, Aspect aspect) {
  AgreementEntry e;
  e.group = group;
  std::set<std::string> images;
  for (const auto& r : humans) images.insert(r.image_id);
  for (const auto& r : judge) images.insert(r.image_id);
  e.n_images = images.size();

  try {
    e.human_fleiss = fleiss_kappa(matrix_from_labels(humans, aspect));
  } catch (const Error& err) {
    e.human_note = std::string(errc_name(err.code()));
  }

  std::map<std::string, Label> judged;
  for (const auto& r : judge) judged[r.image_id] = pick(r, aspect);
  std::vector<Label> mode, machine;
  for (const auto& res : consensus(humans)) {
    auto it = judged.find(res.image_id);
    if (it == judged.end()) continue;
    mode.push_back(aspect == Aspect::bias ? res.bias : res.fidelity);
    machine.push_back(it->second);
  }
  try {
    if (mode.empty()) throw Error(Errc::empty_input, "no images rated by both humans and judge");
    e.judge_cohen = cohen_kappa(mode, machine);
  } catch (const Error& err) {
    e.judge_note = std::string(errc_name(err.code()));
  }
  return e;
}

}  // namespace

AgreementMatrix AgreementMatrix::from_counts(std::vector<std::vector<std::size_t>> counts) {
  AgreementMatrix m;
  m.n_items = counts.size();
  if (!counts.empty()) {
    const std::size_t k = counts.front().size();
    if (k < 2) throw Error(Errc::invariant_violation, "agreement matrix needs at least 2 categories");
    m.n_raters_per_item = std::accumulate(counts.front().begin(), counts.front().end(), std::size_t{0});
    for (const auto& row : counts) {
      if (row.size() != k) throw Error(Errc::invariant_violation, "ragged agreement matrix");
      if (std::accumulate(row.begin(), row.end(), std::size_t{0}) != m.n_raters_per_item) {
        throw Error(Errc::uneven_rater_counts, "items have different numbers of ratings");
      }
    }
  }
  m.counts = std::move(counts);
  return m;
}

KappaResult fleiss_kappa(const AgreementMatrix& m) {
  const std::size_t N = m.n_items;
  const std::size_t n = m.n_raters_per_item;
  if (N < 1) throw Error(Errc::invariant_violation, "fleiss kappa needs at least one item");
  if (n < 2) throw Error(Errc::invariant_violation, "fleiss kappa needs at least two raters per item");
  const std::size_t K = m.counts.front().size();

  std::vector<double> category_totals(K, 0.0);
  double p_bar = 0.0;
  for (const auto& row : m.counts) {
    double sum_sq = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      const double c = static_cast<double>(row[j]);
      sum_sq += c * c;
      category_totals[j] += c;
    }
    p_bar += (sum_sq - static_cast<double>(n)) / (static_cast<double>(n) * static_cast<double>(n - 1));
  }
  p_bar /= static_cast<double>(N);

  double p_e = 0.0;
  const double total = static_cast<double>(N) * static_cast<double>(n);
  for (double t : category_totals) p_e += (t / total) * (t / total);
  return finish(p_bar, p_e);
}

KappaResult cohen_kappa_codes(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw Error(Errc::length_mismatch, "rater label lists differ in length");
  if (a.empty()) throw Error(Errc::empty_input, "cohen kappa needs at least one item");
  std::map<int, std::pair<double, double>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    agree += a[i] == b[i];
    marginals[a[i]].first += 1.0;
    marginals[b[i]].second += 1.0;
  }
  const double n = static_cast<double>(a.size());
  double p_e = 0.0;
  for (const auto& [_, m] : marginals) p_e += (m.first / n) * (m.second / n);
  return finish(static_cast<double>(agree) / n, p_e);
}

AgreementMatrix matrix_from_labels(const std::vector<LabelRecord>& records, Aspect aspect) {
  std::map<std::string, std::vector<std::size_t>> rows;
  for (const auto& r : records) {
    auto& row = rows.try_emplace(r.image_id, std::vector<std::size_t>(2, 0)).first->second;
    ++row[pick(r, aspect) == Label::yes ? 0 : 1];
  }
  std::vector<std::vector<std::size_t>> counts;
  counts.reserve(rows.size());
  for (auto& [_, row] : rows) counts.push_back(std::move(row));
  return AgreementMatrix::from_counts(std::move(counts));
}

AgreementReport agreement_report(const std::vector<LabelRecord>& records, const std::string& judge_id) {
  AgreementReport report;
  report.judge_id = judge_id;
  std::vector<LabelRecord> humans, judge;
  std::set<std::string> raters;
  std::set<std::string> targets;
  for (const auto& r : records) {
    targets.insert(r.target);
    if (r.rater_id == judge_id) {
      judge.push_back(r);
    } else {
      humans.push_back(r);
      raters.insert(r.rater_id);
    }
  }
  if (humans.empty()) throw Error(Errc::empty_input, "no human ratings besides judge '" + judge_id + "'");
  report.human_raters.assign(raters.begin(), raters.end());

  for (Aspect aspect : {Aspect::bias, Aspect::fidelity}) {
    auto& entries = report.aspects[aspect];
    entries.push_back(entry_for("all", humans, judge, aspect));
    for (const auto& target : targets) {
      std::vector<LabelRecord> h, j;
      std::copy_if(humans.begin(), humans.end(), std::back_inserter(h),
                   [&](const auto& r) { return r.target == target; });
      std::copy_if(judge.begin(), judge.end(), std::back_inserter(j),
                   [&](const auto& r) { return r.target == target; });
      entries.push_back(entry_for(target, h, j, aspect));
    }
  }
  return report;
}

std::string render_agreement(const AgreementReport& report, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::json: {
      nlohmann::json doc;
      doc["judge"] = report.judge_id;
      doc["human_raters"] = report.human_raters;
      for (const auto& [aspect, entries] : report.aspects) {
        auto arr = nlohmann::json::array();
        for (const auto& e : entries) {
          arr.push_back({{"group", e.group},
                         {"n_images", e.n_images},
                         {"human_fleiss", kappa_json(e.human_fleiss, e.human_note)},
                         {"judge_vs_consensus_cohen", kappa_json(e.judge_cohen, e.judge_note)}});
        }
        doc["aspects"][std::string(aspect_name(aspect))] = std::move(arr);
      }
      out << doc.dump(2) << '\n';
      break;
    }
    case ReportFormat::csv:
      out << "aspect,group,n_images,human_fleiss_kappa,judge_cohen_kappa\n";
      for (const auto& [aspect, entries] : report.aspects) {
        for (const auto& e : entries) {
          out << aspect_name(aspect) << ',' << csv::escape(e.group) << ',' << e.n_images << ','
              << kappa_text(e.human_fleiss, e.human_note) << ','
              << kappa_text(e.judge_cohen, e.judge_note) << '\n';
        }
      }
      break;
    case ReportFormat::markdown:
      out << "Judge: " << report.judge_id << "; human raters: " << report.human_raters.size() << "\n\n";
      for (const auto& [aspect, entries] : report.aspects) {
        out << "### " << aspect_name(aspect) << "\n\n"
            << "| Group | Images | Fleiss kappa (humans) | Cohen kappa (judge vs majority) |\n"
            << "|---|---|---|---|\n";
        for (const auto& e : entries) {
          out << "| " << e.group << " | " << e.n_images << " | "
              << kappa_text(e.human_fleiss, e.human_note) << " | "
              << kappa_text(e.judge_cohen, e.judge_note) << " |\n";
        }
        out << '\n';
      }
      break;
  }
  return out.str();
}

}  // namespace famebias
