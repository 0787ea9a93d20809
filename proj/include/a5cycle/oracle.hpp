#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <vector>

#include "a5cycle/cipher.hpp"
#include "a5cycle/record_io.hpp"

namespace a5cycle {

/// Largest instance the brute-force oracle accepts.
inline constexpr std::uint64_t kOracleMaxNodes = std::uint64_t{1} << 31;

struct OracleCycle {
    State leader;                 // smallest packed state on the cycle
    std::uint64_t length = 0;     // states on the cycle (= clock length)
    std::uint64_t candidates = 0; // candidate hops
    std::uint64_t component_size = 0;
    std::vector<State> states;    // in forward order starting at the leader
};

struct OracleOptions {
    /// Transition function; the cipher step when empty.
    std::function<State(State)> step;
    /// Candidate, segment and candidate-graph analysis.
    bool analyze_candidates = true;
    unsigned workers = 1;
};

struct GroundTruth {
    std::uint64_t node_count = 0;
    std::vector<std::uint32_t> successor;  // rank -> rank
    std::vector<OracleCycle> cycles;       // ascending leader order
    std::uint64_t cycle_nodes = 0;
    std::uint64_t leaf_count = 0;          // indegree zero

    // Candidate analysis.
    std::vector<State> candidates;           // ascending
    std::vector<EdgeRecord> candidate_edges; // one per candidate, ascending source
    std::vector<std::uint64_t> segment_depth;  // per candidate, same order
    std::vector<std::uint64_t> segment_size;   // per candidate
    std::vector<std::uint64_t> level_totals;   // states at each depth over all segments
    // Every valid start walked to its first candidate and then one more:
    // how often each inter-candidate distance is observed.
    std::map<std::uint64_t, std::uint64_t> second_leg_distances;

    std::uint64_t max_segment_depth() const;
    std::size_t candidate_index(State c) const;  // throws when c is not a candidate
};

/// Builds the full functional graph of a small instance and analyzes it
/// exhaustively. Throws ConfigError above kOracleMaxNodes.
GroundTruth brute_force_analysis(const CipherSpec& spec, const CandidateParams& params,
                                 const OracleOptions& options = {});

/// Longest path (in edges) from any non-cycle node to its cycle, computed in
/// memory on an edge list with unique sources.
std::uint64_t max_tree_height(const std::vector<EdgeRecord>& edges);

/// Summary as key,value lines followed by nothing else.
void write_ground_truth_csv(std::ostream& out, const GroundTruth& truth);
/// leader,length,candidates,componentSize
void write_oracle_cycles_csv(std::ostream& out, const GroundTruth& truth);

}  // namespace a5cycle
