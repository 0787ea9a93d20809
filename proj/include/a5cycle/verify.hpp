#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "a5cycle/oracle.hpp"
#include "a5cycle/pipeline.hpp"
#include "a5cycle/reduce.hpp"

namespace a5cycle {

struct VerifyConfig {
    PruneConfig prune;
    ForwardOptions forward;  // stride 0 selects default_stride()
    ReduceConfig reduce;
};

/// (hop count, clock length), sorted.
using CycleMultiset = std::vector<std::pair<std::uint64_t, std::uint64_t>>;

struct VerifyReport {
    std::uint64_t candidates = 0;
    PruneStats prune;
    EdgeStats edges;
    std::uint64_t iterations = 0;
    std::uint64_t max_tree_height = 0;  // of the skeleton edge list, in memory

    CycleMultiset pipeline_cycles;
    CycleMultiset oracle_cycles;
    std::uint64_t pipeline_clock_total = 0;
    std::uint64_t oracle_cycle_nodes = 0;
    std::uint64_t oracle_components = 0;

    bool cycles_match() const { return pipeline_cycles == oracle_cycles; }
    bool components_match() const { return pipeline_cycles.size() == oracle_components; }
    bool clock_total_match() const { return pipeline_clock_total == oracle_cycle_nodes; }
    bool iterations_match() const { return iterations == max_tree_height; }
    bool ok() const { return cycles_match() && components_match() && clock_total_match() && iterations_match(); }
};

CycleMultiset cycle_multiset(const std::vector<CycleRecord>& cycles);
CycleMultiset cycle_multiset(const GroundTruth& truth);

/// Runs enumerate, prune, edges, reduce and count on a small instance and
/// compares the cycles against the brute-force oracle. Scratch files go to
/// config.reduce.scratch and are removed afterwards.
VerifyReport verify_pipeline(const CipherSpec& spec, const CandidateParams& params, const VerifyConfig& config,
                             const GroundTruth& truth);

}  // namespace a5cycle
