#include "famebias/sim.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "famebias/bias.hpp"
#include "famebias/error.hpp"

namespace famebias {

double NormalSource::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NormalSource::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(1.0 - u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<double> normalized(std::vector<double> v) {
  const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (!(norm > 0.0)) throw Error(Errc::invariant_violation, "cannot normalize a zero vector");
  for (auto& x : v) x /= norm;
  return v;
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::dim_mismatch, "cosine of vectors with different widths");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

const std::vector<double>& ConceptSpace::at(const std::string& name) const {
  auto it = concepts.find(name);
  if (it == concepts.end()) throw Error(Errc::unknown_concept, "unknown concept '" + name + "'");
  return it->second;
}

ConceptSpace build_space(std::uint64_t seed, std::uint32_t dim, const std::vector<std::string>& names) {
  if (dim < 2) throw Error(Errc::invariant_violation, "concept space needs dim >= 2");
  ConceptSpace space{dim, seed, {}};
  for (const auto& name : names) {
    NormalSource src(splitmix64(seed ^ fnv1a64(name)));
    std::vector<double> v(dim);
    for (auto& x : v) x = src.normal();
    if (!space.concepts.emplace(name, normalized(std::move(v))).second) {
      throw Error(Errc::duplicate_name, "duplicate concept name '" + name + "'");
    }
  }
  return space;
}

RecognizerVerdict recognize_vectors(std::span<const double> v, std::span<const double> target,
                                    std::span<const double> trigger, double tau_p, double tau_t) {
  RecognizerVerdict out;
  out.cos_target = cosine(v, target);
  out.cos_trigger = cosine(v, trigger);
  out.looks_like_target = out.cos_target >= tau_p;
  out.looks_like_trigger = out.cos_trigger >= tau_t;
  return out;
}

RecognizerVerdict recognize(std::span<const double> v, const ConceptSpace& space,
                            const std::string& target_name, const std::string& trigger_name,
                            double tau_p, double tau_t) {
  const auto& target = space.at(target_name);
  const auto& trigger = space.at(trigger_name);
  if (v.size() != space.dim) {
    throw Error(Errc::dim_mismatch, "vector width " + std::to_string(v.size()) +
                                        " differs from concept space dim " + std::to_string(space.dim));
  }
  return recognize_vectors(v, target, trigger, tau_p, tau_t);
}

std::vector<SweepPoint> run_sim(const ConceptSpace& space, const std::string& trigger,
                                const std::string& target, const SweepPlan& plan,
                                const SimSettings& settings, std::vector<CaseTrace>* trace) {
  if (settings.n_cases < 1) throw Error(Errc::invariant_violation, "simulation needs n_cases >= 1");
  if (!std::isfinite(settings.noise) || settings.noise < 0.0) {
    throw Error(Errc::invariant_violation, "noise scale must be finite and non-negative");
  }
  const auto& target_vec = space.at(target);
  const auto& trigger_vec = space.at(trigger);

  NormalSource src(settings.case_seed);
  std::vector<std::vector<double>> contexts;
  contexts.reserve(settings.n_cases);
  for (std::size_t k = 0; k < settings.n_cases; ++k) {
    std::vector<double> v(trigger_vec);
    for (auto& x : v) x += settings.noise * src.normal();
    contexts.push_back(normalized(std::move(v)));
  }

  const auto configs = enumerate_points(plan);
  std::vector<SweepPoint> points;
  points.reserve(configs.size());
  std::vector<double> blended(space.dim);
  for (std::size_t p = 0; p < configs.size(); ++p) {
    const double alpha = configs[p].alpha;
    const double beta = configs[p].beta;
    std::size_t hits_target = 0, hits_trigger = 0;
    for (std::size_t k = 0; k < contexts.size(); ++k) {
      blend_into<double>(blended, target_vec, contexts[k], alpha, beta);
      const auto verdict = recognize_vectors(blended, target_vec, contexts[k], settings.tau_p, settings.tau_t);
      hits_target += verdict.looks_like_target;
      hits_trigger += verdict.looks_like_trigger;
      if (trace) trace->push_back({p, k, alpha, beta, verdict});
    }
    const double n = static_cast<double>(contexts.size());
    const double bsr = static_cast<double>(hits_target) / n;
    const double tfr = static_cast<double>(hits_trigger) / n;
    points.push_back({alpha, beta, bsr, tfr, bsr * tfr});
  }
  return points;
}

}  // namespace famebias
