#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "a5cycle/cipher.hpp"

namespace a5cycle {

/// Flajolet-Odlyzko expectations for a random mapping on n points.
struct ExpectationTable {
    double n = 0;
    double components = 0;         // 0.5 ln n
    double largest_cycle = 0;      // 0.78248 sqrt(n)
    double largest_component = 0;  // 0.75782 n
    double max_segment_depth = 0;  // 0.6 sqrt(n)
    double leaf_fraction = 0;      // 1/e
    double cycle_nodes = 0;        // sqrt(pi n / 2)
    double nodes_per_level = 0;    // 1
};

/// Throws ConfigError for n < 2.
ExpectationTable random_mapping_expectations(double n);

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x);
    double value() const { return sum_ + c_; }

private:
    double sum_ = 0;
    double c_ = 0;
};

struct DistanceSample {
    std::uint64_t sample_size = 0;
    std::uint64_t seed = 0;
    double mean = 0;
    double stddev = 0;  // sample standard deviation
    std::uint64_t min = 0;
    std::uint64_t max = 0;
    std::map<std::uint64_t, std::uint64_t> histogram;
};

struct SampleOptions {
    unsigned workers = 1;
    /// Bulk stride for the second leg; 0 selects default_stride().
    std::uint64_t stride = 0;
};

/// Walks each seeded random valid state to its first candidate, then on to
/// the next one, and keeps only the second leg (a full inter-candidate distance).
DistanceSample sample_segment_distances(const CipherSpec& spec, const CandidateParams& params,
                                        const PredecessorTable& table, std::uint64_t sample_size,
                                        std::uint64_t seed, const SampleOptions& options = {});

/// Same with every valid state as a start (small instances only).
DistanceSample population_segment_distances(const CipherSpec& spec, const CandidateParams& params,
                                            const PredecessorTable& table, const SampleOptions& options = {});

struct ShapeSample {
    std::uint64_t sample_size = 0;
    std::uint64_t seed = 0;
    std::uint64_t depth_cap = 0;
    std::vector<std::uint64_t> depths;  // per segment, in draw order
    std::vector<bool> censored;         // depth reached the cap with more below
    std::vector<std::uint64_t> level_sum;  // nodes at level d summed over segments
    std::vector<std::uint64_t> reached;    // segments with at least one node at level d

    std::uint64_t censored_count() const;
    /// Smallest depth d with P(depth <= d) >= q; empty when q falls among censored samples.
    std::optional<std::uint64_t> depth_quantile(double q) const;
    /// Average nodes at level d over all sampled segments.
    std::vector<double> unconditioned_curve() const;
    /// Average nodes at level d over segments that reach level d.
    std::vector<double> conditioned_curve() const;
    /// Mean of the unconditioned curve over levels [1, last].
    double mean_nodes_per_level(std::uint64_t last) const;
};

/// Reverse-traverses the segments of seeded random candidates.
ShapeSample sample_segment_shapes(const CipherSpec& spec, const CandidateParams& params,
                                  const PredecessorTable& table, std::uint64_t sample_size, std::uint64_t seed,
                                  std::uint64_t depth_cap, unsigned workers = 1);

/// Every candidate's segment, uncapped (small instances only).
ShapeSample population_segment_shapes(const CipherSpec& spec, const CandidateParams& params,
                                      const PredecessorTable& table, unsigned workers = 1);

struct FractionEstimate {
    std::uint64_t sample_size = 0;
    std::uint64_t hits = 0;
    double value() const { return sample_size ? static_cast<double>(hits) / static_cast<double>(sample_size) : 0.0; }
    /// Binomial standard error.
    double standard_error() const;
};

/// Random valid states without a predecessor.
FractionEstimate sample_leaf_fraction(const CipherSpec& spec, const PredecessorTable& table,
                                      std::uint64_t sample_size, std::uint64_t seed);

/// Random states with R3 = fixedR3 that are candidates.
FractionEstimate sample_candidate_fraction(const CipherSpec& spec, const CandidateParams& params,
                                           const PredecessorTable& table, std::uint64_t sample_size,
                                           std::uint64_t seed);

/// Observed whole-graph properties; absent rows are unknown.
struct AnalysisReport {
    std::string label;
    double n = 0;
    std::optional<double> components;
    std::optional<double> largest_cycle;
    std::optional<double> largest_component;
    std::optional<double> max_segment_depth;
    std::optional<double> leaf_fraction;
    std::optional<double> cycle_nodes;
    std::optional<double> nodes_per_level;
    // Exact integers shown next to the power-of-two form, when known.
    std::map<std::string, std::string> exact;
};

/// The A5/1 values of the published comparison table.
AnalysisReport published_a51_observations();

struct DeviationRow {
    std::string property;
    std::string formula;
    double expected = 0;
    std::string expected_text;
    std::optional<double> observed;
    std::string observed_text;
    std::optional<double> log10_ratio;
    std::string deviation_text;  // "10^{x.xx}"
};

/// One row per expectation; log10(observed / expected) where observed is known.
std::vector<DeviationRow> deviation_report(const AnalysisReport& observed, const ExpectationTable& expected);

/// Text helpers matching the published table notation.
std::string format_power_of_two(double v);   // "2^31.6"
std::string format_deviation(double log10);  // "10^{3.71}"
std::string format_percent(double fraction); // "36.79%"

void write_report_text(std::ostream& out, const std::vector<DeviationRow>& rows);
void write_report_csv(std::ostream& out, const std::vector<DeviationRow>& rows);

struct ReferenceConstant {
    std::string name;
    std::string value;
    std::string note;
};

/// Full-scale A5/1 results that are not reproducible at desk scale.
std::vector<ReferenceConstant> published_reference_constants();

}  // namespace a5cycle
