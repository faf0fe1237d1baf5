#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "famebias/sweep.hpp"

namespace famebias {

/// Portable normal sampler over std::mt19937_64, whose output sequence is fixed
/// by the C++ standard. Uniforms take the top 53 bits: u = (x >> 11) * 2^-53.
/// Normals come in Box-Muller pairs, r = sqrt(-2 ln(1 - u1)), t = 2 pi u2,
/// emitted as r cos t then r sin t.
class NormalSource {
 public:
  explicit NormalSource(std::uint64_t seed) : engine_(seed) {}

  double uniform();
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view s) noexcept;
std::uint64_t splitmix64(std::uint64_t x) noexcept;

std::vector<double> normalized(std::vector<double> v);
double cosine(std::span<const double> a, std::span<const double> b);

/// Named unit vectors. Each concept is drawn from its own NormalSource seeded
/// with splitmix64(seed ^ fnv1a64(name)), so vectors do not depend on which
/// other names are present.
struct ConceptSpace {
  std::uint32_t dim = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::vector<double>> concepts;

  const std::vector<double>& at(const std::string& name) const;
};

// Throws DuplicateName, or InvariantViolation for dim < 2.
ConceptSpace build_space(std::uint64_t seed, std::uint32_t dim, const std::vector<std::string>& names);

struct RecognizerVerdict {
  bool looks_like_target = false;
  bool looks_like_trigger = false;
  double cos_target = 0.0;
  double cos_trigger = 0.0;
};

RecognizerVerdict recognize_vectors(std::span<const double> v, std::span<const double> target,
                                    std::span<const double> trigger, double tau_p, double tau_t);

// Throws UnknownConcept or DimMismatch.
RecognizerVerdict recognize(std::span<const double> v, const ConceptSpace& space,
                            const std::string& target_name, const std::string& trigger_name,
                            double tau_p, double tau_t);

struct SimSettings {
  double tau_p = 0.93;
  double tau_t = 0.30;
  std::size_t n_cases = 200;
  std::uint64_t case_seed = 11;
  double noise = 0.1;
};

struct CaseTrace {
  std::size_t point = 0;
  std::size_t case_index = 0;
  double alpha = 0.0;
  double beta = 0.0;
  RecognizerVerdict verdict;
};

/// Proxy BSR/TFR per plan point.
///
/// Every plan point sees the same n_cases trigger contexts, each the trigger
/// concept plus `noise` times a standard normal draw, renormalized. A case
/// counts toward BSR when the blend is within tau_p of the target concept and
/// toward TFR when it is within tau_t of that case's trigger context.
std::vector<SweepPoint> run_sim(const ConceptSpace& space, const std::string& trigger,
                                const std::string& target, const SweepPlan& plan,
                                const SimSettings& settings, std::vector<CaseTrace>* trace = nullptr);

}  // namespace famebias
