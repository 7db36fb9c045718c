#pragma once

// Run configuration for the ewa command-line tool.
//
// Format: one `key = value` pair per line, dotted keys, `#` starts a comment.
// Lists are comma separated. Only n, noise.sigma and agg.beta are required.
//
//   n = 64
//   signal.kind = sinusoid          # zero | sinusoid | mix | step | custom
//   signal.amplitude = 2            # sinusoid: amplitude, frequency, phase
//   collection.basis = cosine       # cosine | standard | random
//   collection.family = projections # projections | taper | both
//   collection.ranks = 1,2,4,8      # default 1,2,4,...,n
//   noise.kind = gaussian           # gaussian | rademacher | uniform
//   noise.sigma = 1
//   agg.beta = 20
//   agg.delta = 1
//
// Every other field has a default; see render() for the complete key set.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ewa/harness.hpp"

namespace ewa {

enum class BasisKind { cosine, standard, random };
enum class FamilyKind { projections, taper, both };
enum class MomentForms { general, projection_gaussian, both };

std::string_view to_string(BasisKind kind);
std::string_view to_string(FamilyKind kind);
std::string_view to_string(MomentForms forms);

struct CollectionSpec {
  BasisKind basis = BasisKind::cosine;
  std::uint64_t basis_seed = 0;
  FamilyKind family = FamilyKind::projections;
  std::vector<Eigen::Index> ranks;         // projections
  std::vector<Eigen::Index> taper_widths;  // taper
  std::vector<double> prior;               // empty means uniform

  bool operator==(const CollectionSpec&) const = default;
};

struct RunConfig {
  Eigen::Index n = 0;
  SignalSpec signal = SignalSpec::sinusoid(1.0, 1.0);
  CollectionSpec collection;
  NoiseModel noise = NoiseModel::gaussian(1.0);
  Config agg;  // sigma_sq and v_bound resolved
  std::size_t trials = 1000;
  std::uint64_t seed = 0;
  std::size_t moment_samples = 1000000;
  std::vector<std::pair<std::size_t, std::size_t>> moment_pairs;  // empty: adjacent
  MomentForms moment_forms = MomentForms::general;
  std::size_t mgf_samples = 1000000;
  std::size_t mgf_directions = 20;

  bool operator==(const RunConfig&) const = default;
};

// Thrown for malformed or inadmissible configuration; the message starts
// with the offending key.
class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

// Every key, one per line, values with 17 significant digits.
std::string render(const RunConfig& cfg);

// Checks harness admissibility; throws ConfigError naming the key.
void validate(const RunConfig& cfg);

Collection build_collection(const RunConfig& cfg);
Scenario build_scenario(const RunConfig& cfg);

// (t, t+1) and (t+1, t) for consecutive indices, or the configured pairs.
std::vector<std::pair<std::size_t, std::size_t>> moment_pairs(const RunConfig& cfg,
                                                              std::size_t m);

// 17 significant digits, locale independent.
std::string format_double(double x);

}  // namespace ewa
