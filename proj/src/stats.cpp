#include "a5cycle/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <sstream>

#include "a5cycle/bitslice.hpp"
#include "a5cycle/pipeline.hpp"
#include "a5cycle/sampling.hpp"
#include "a5cycle/work_queue.hpp"

namespace a5cycle {

ExpectationTable random_mapping_expectations(double n) {
    if (!(n >= 2)) throw ConfigError("random mapping expectations need n >= 2");
    ExpectationTable e;
    e.n = n;
    e.components = 0.5 * std::log(n);
    e.largest_cycle = 0.78248 * std::sqrt(n);
    e.largest_component = 0.75782 * n;
    e.max_segment_depth = 0.6 * std::sqrt(n);
    e.leaf_fraction = 1.0 / std::numbers::e;
    e.cycle_nodes = std::sqrt(std::numbers::pi * n / 2.0);
    e.nodes_per_level = 1.0;
    return e;
}

void CompensatedSum::add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
        c_ += (sum_ - t) + x;
    } else {
        c_ += (x - t) + sum_;
    }
    sum_ = t;
}

namespace {

DistanceSample summarize(const std::vector<ForwardResult>& legs, std::uint64_t seed) {
    DistanceSample s;
    s.sample_size = legs.size();
    s.seed = seed;
    if (legs.empty()) return s;
    CompensatedSum sum;
    s.min = legs.front().distance;
    for (const auto& r : legs) {
        sum.add(static_cast<double>(r.distance));
        s.min = std::min(s.min, r.distance);
        s.max = std::max(s.max, r.distance);
        ++s.histogram[r.distance];
    }
    s.mean = sum.value() / static_cast<double>(legs.size());
    if (legs.size() > 1) {
        CompensatedSum sq;
        for (const auto& r : legs) {
            const double d = static_cast<double>(r.distance) - s.mean;
            sq.add(d * d);
        }
        s.stddev = std::sqrt(sq.value() / static_cast<double>(legs.size() - 1));
    }
    return s;
}

DistanceSample two_legs(const std::vector<State>& starts, const CipherSpec& spec, const CandidateParams& params,
                        const PredecessorTable& table, std::uint64_t seed, const SampleOptions& options) {
    // Random starts land anywhere, so the first leg cannot use a bulk stride.
    ForwardOptions first;
    first.finish = FinishMode::sliced;
    first.workers = options.workers;
    const auto leg1 = forward_to_candidate(starts, params, spec, table, first);

    std::vector<State> from(leg1.size());
    for (std::size_t i = 0; i < leg1.size(); ++i) from[i] = leg1[i].destination;
    ForwardOptions second;
    second.stride = options.stride ? options.stride : default_stride(spec, params);
    second.finish = FinishMode::scalar;
    second.workers = options.workers;
    return summarize(forward_to_candidate(from, params, spec, table, second), seed);
}

}  // namespace

DistanceSample sample_segment_distances(const CipherSpec& spec, const CandidateParams& params,
                                        const PredecessorTable& table, std::uint64_t sample_size,
                                        std::uint64_t seed, const SampleOptions& options) {
    if (sample_size < 2) throw ConfigError("sample size must be at least 2");
    Rng rng(seed);
    std::vector<State> starts(sample_size);
    for (auto& s : starts) s = random_valid_state(rng, spec);
    return two_legs(starts, spec, params, table, seed, options);
}

DistanceSample population_segment_distances(const CipherSpec& spec, const CandidateParams& params,
                                            const PredecessorTable& table, const SampleOptions& options) {
    std::vector<State> starts(spec.node_count());
    for (std::uint64_t r = 0; r < starts.size(); ++r) starts[r] = state_unrank(r, spec);
    return two_legs(starts, spec, params, table, 0, options);
}

std::uint64_t ShapeSample::censored_count() const {
    return static_cast<std::uint64_t>(std::count(censored.begin(), censored.end(), true));
}

std::optional<std::uint64_t> ShapeSample::depth_quantile(double q) const {
    if (depths.empty()) return std::nullopt;
    std::vector<std::pair<std::uint64_t, bool>> order(depths.size());
    for (std::size_t i = 0; i < depths.size(); ++i) order[i] = {depths[i], censored[i]};
    // Censored depths are lower bounds, so they sort after exact ones at the same depth.
    std::sort(order.begin(), order.end());
    const double need = q * static_cast<double>(depths.size());
    std::uint64_t seen = 0;
    for (const auto& [d, cut] : order) {
        if (cut) return std::nullopt;
        ++seen;
        if (static_cast<double>(seen) >= need) return d;
    }
    return std::nullopt;
}

std::vector<double> ShapeSample::unconditioned_curve() const {
    std::vector<double> out(level_sum.size());
    for (std::size_t d = 0; d < out.size(); ++d) {
        out[d] = static_cast<double>(level_sum[d]) / static_cast<double>(sample_size);
    }
    return out;
}

std::vector<double> ShapeSample::conditioned_curve() const {
    std::vector<double> out(level_sum.size());
    for (std::size_t d = 0; d < out.size(); ++d) {
        out[d] = reached[d] ? static_cast<double>(level_sum[d]) / static_cast<double>(reached[d]) : 0.0;
    }
    return out;
}

double ShapeSample::mean_nodes_per_level(std::uint64_t last) const {
    const auto curve = unconditioned_curve();
    last = std::min<std::uint64_t>(last, curve.empty() ? 0 : curve.size() - 1);
    if (last < 1) return 0.0;
    CompensatedSum s;
    for (std::uint64_t d = 1; d <= last; ++d) s.add(curve[d]);
    return s.value() / static_cast<double>(last);
}

namespace {

ShapeSample aggregate_shapes(const std::vector<State>& roots, const CipherSpec& spec, const CandidateParams& params,
                             const PredecessorTable& table, std::uint64_t depth_cap, unsigned workers) {
    ShapeSample out;
    out.sample_size = roots.size();
    out.depth_cap = depth_cap;
    const auto shapes = parallel_gather<SegmentShape>(roots.size(), 64, workers, [&](std::size_t b, std::size_t e) {
        std::vector<SegmentShape> part;
        for (std::size_t i = b; i < e; ++i) part.push_back(trace_segment(roots[i], spec, params, table, depth_cap));
        return part;
    });
    for (const auto& s : shapes) {
        out.depths.push_back(s.depth);
        out.censored.push_back(s.censored);
        if (out.level_sum.size() < s.level_counts.size()) {
            out.level_sum.resize(s.level_counts.size(), 0);
            out.reached.resize(s.level_counts.size(), 0);
        }
        for (std::size_t d = 0; d < s.level_counts.size(); ++d) {
            out.level_sum[d] += s.level_counts[d];
            ++out.reached[d];
        }
    }
    return out;
}

}  // namespace

ShapeSample sample_segment_shapes(const CipherSpec& spec, const CandidateParams& params,
                                  const PredecessorTable& table, std::uint64_t sample_size, std::uint64_t seed,
                                  std::uint64_t depth_cap, unsigned workers) {
    if (sample_size < 2) throw ConfigError("sample size must be at least 2");
    Rng rng(seed);
    std::vector<State> roots(sample_size);
    for (auto& r : roots) r = random_candidate(rng, spec, params, table);
    auto out = aggregate_shapes(roots, spec, params, table, depth_cap, workers);
    out.seed = seed;
    return out;
}

ShapeSample population_segment_shapes(const CipherSpec& spec, const CandidateParams& params,
                                      const PredecessorTable& table, unsigned workers) {
    const auto roots = enumerate_candidates(spec, params, table);
    return aggregate_shapes(roots, spec, params, table, std::numeric_limits<std::uint64_t>::max(), workers);
}

double FractionEstimate::standard_error() const {
    if (sample_size == 0) return 0.0;
    const double p = value();
    return std::sqrt(p * (1 - p) / static_cast<double>(sample_size));
}

FractionEstimate sample_leaf_fraction(const CipherSpec& spec, const PredecessorTable& table,
                                      std::uint64_t sample_size, std::uint64_t seed) {
    Rng rng(seed);
    FractionEstimate f{sample_size, 0};
    for (std::uint64_t i = 0; i < sample_size; ++i)
        if (!has_predecessor(random_valid_state(rng, spec), spec, table)) ++f.hits;
    return f;
}

FractionEstimate sample_candidate_fraction(const CipherSpec& spec, const CandidateParams& params,
                                           const PredecessorTable& table, std::uint64_t sample_size,
                                           std::uint64_t seed) {
    Rng rng(seed);
    FractionEstimate f{sample_size, 0};
    for (std::uint64_t i = 0; i < sample_size; ++i)
        if (is_candidate(random_fixed_r3_state(rng, spec, params), params, spec, table)) ++f.hits;
    return f;
}

AnalysisReport published_a51_observations() {
    AnalysisReport r;
    r.label = "A5/1 (published)";
    r.n = static_cast<double>(CipherSpec::a51().node_count());
    r.components = 113957;
    r.largest_cycle = 469758320;
    r.largest_component = std::exp2(52.34);
    r.max_segment_depth = std::exp2(29.87);
    r.leaf_fraction = 6917518582283894784.0 / r.n;
    r.cycle_nodes = 2219735820460.0;
    r.nodes_per_level = 1.7;
    r.exact["largest_cycle"] = "469758320";
    r.exact["leaf_fraction"] = "6917518582283894784";
    r.exact["cycle_nodes"] = "2219735820460";
    return r;
}

std::string format_power_of_two(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "2^%.1f", std::log2(v));
    return buf;
}

std::string format_deviation(double log10) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "10^{%.2f}", log10);
    return buf;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * fraction);
    return buf;
}

namespace {

enum class Style { integer, power, percent, plain };

std::string format_value(double v, Style style, int power_digits) {
    char buf[48];
    switch (style) {
        case Style::integer:
            std::snprintf(buf, sizeof buf, "%.0f", v);
            return buf;
        case Style::power:
            std::snprintf(buf, sizeof buf, "2^%.*f", power_digits, std::log2(v));
            return buf;
        case Style::percent:
            return format_percent(v);
        case Style::plain:
            break;
    }
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

std::vector<DeviationRow> deviation_report(const AnalysisReport& observed, const ExpectationTable& expected) {
    struct Spec {
        const char* property;
        const char* formula;
        double ExpectationTable::*expected;
        std::optional<double> AnalysisReport::*observed;
        const char* exact_key;
        Style expected_style;
        Style observed_style;
    };
    static const Spec rows[] = {
        {"# of components", "1/2 ln n", &ExpectationTable::components, &AnalysisReport::components, "components",
         Style::integer, Style::integer},
        {"largest cycle", "0.78248 sqrt(n)", &ExpectationTable::largest_cycle, &AnalysisReport::largest_cycle,
         "largest_cycle", Style::power, Style::power},
        {"largest component", "0.75782 n", &ExpectationTable::largest_component,
         &AnalysisReport::largest_component, "largest_component", Style::power, Style::power},
        {"max segment depth", "0.6 sqrt(n)", &ExpectationTable::max_segment_depth,
         &AnalysisReport::max_segment_depth, "max_segment_depth", Style::power, Style::power},
        {"fraction of leaves", "1/e", &ExpectationTable::leaf_fraction, &AnalysisReport::leaf_fraction,
         "leaf_fraction", Style::percent, Style::percent},
        {"# of cycle nodes", "sqrt(pi n / 2)", &ExpectationTable::cycle_nodes, &AnalysisReport::cycle_nodes,
         "cycle_nodes", Style::power, Style::power},
        {"# of nodes on level", "1", &ExpectationTable::nodes_per_level, &AnalysisReport::nodes_per_level,
         "nodes_per_level", Style::plain, Style::plain},
    };
    if (observed.n != 0 && std::abs(observed.n - expected.n) > 1e-9 * expected.n) {
        throw ConfigError("deviation report: observed and expected node counts differ");
    }
    std::vector<DeviationRow> out;
    for (const auto& r : rows) {
        DeviationRow row;
        row.property = r.property;
        row.formula = r.formula;
        row.expected = expected.*(r.expected);
        row.expected_text = format_value(row.expected, r.expected_style, 1);
        row.observed = observed.*(r.observed);
        if (row.observed) {
            row.observed_text = format_value(*row.observed, r.observed_style, 2);
            if (auto it = observed.exact.find(r.exact_key); it != observed.exact.end()) {
                row.observed_text += " (" + it->second + ")";
            }
            row.log10_ratio = std::log10(*row.observed / row.expected);
            row.deviation_text = format_deviation(*row.log10_ratio);
        } else {
            row.observed_text = "-";
            row.deviation_text = "-";
        }
        out.push_back(std::move(row));
    }
    return out;
}

void write_report_text(std::ostream& out, const std::vector<DeviationRow>& rows) {
    auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d,
                    const std::string& e) {
        out << std::left << std::setw(22) << a << std::setw(18) << b << std::setw(14) << c << std::setw(36) << d
            << e << '\n';
    };
    line("property", "formula", "expected", "experimental", "deviation");
    for (const auto& r : rows) line(r.property + ":", r.formula, r.expected_text, r.observed_text, r.deviation_text);
}

void write_report_csv(std::ostream& out, const std::vector<DeviationRow>& rows) {
    out << "property,formula,expected,expectedText,observed,observedText,log10Ratio\n";
    for (const auto& r : rows) {
        std::ostringstream expected;
        expected << std::setprecision(17) << r.expected;
        std::ostringstream observed;
        if (r.observed) observed << std::setprecision(17) << *r.observed;
        std::ostringstream ratio;
        if (r.log10_ratio) ratio << std::setprecision(6) << *r.log10_ratio;
        out << '"' << r.property << "\",\"" << r.formula << "\"," << expected.str() << ',' << r.expected_text << ','
            << observed.str() << ",\"" << r.observed_text << "\"," << ratio.str() << '\n';
    }
}

std::vector<ReferenceConstant> published_reference_constants() {
    return {
        {"cycles", "113957", "number of cycles of the A5/1 graph"},
        {"largest_cycle", "469758320", "clock length of the largest cycle"},
        {"cycle_nodes", "2219735820460", "states lying on a cycle"},
        {"reduce_iterations", "88", "leaf-cutting iterations, equal to the maximum tree height"},
        {"first_pass_removed", "99.38%", "skeleton nodes removed by the first leaf-cutting pass (lower bound)"},
        {"bfs_prune_rate", "98.77%", "candidates removed with a BFS node limit of 100000"},
        {"dfs_prune_rate", "98.96%", "candidates removed with a DFS depth limit of 3000"},
        {"skeleton_nodes", "2^33.6", "skeleton graph size after pruning"},
        {"segment_mean", "11184857", "sampled mean inter-candidate distance"},
        {"segment_stddev", "1818", "sampled standard deviation of that distance"},
        {"depth_q50", "56", "segment depth at the 50% quantile"},
        {"depth_q90", "319", "segment depth at the 90% quantile"},
        {"depth_q99", "3539", "segment depth at the 99% quantile"},
        {"depth_q999", "39065", "segment depth at the 99.9% quantile"},
        {"nodes_per_level", "1.7", "unconditioned expected nodes per depth level"},
    };
}

}  // namespace a5cycle
