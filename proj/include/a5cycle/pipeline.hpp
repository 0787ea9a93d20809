#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "a5cycle/bitslice.hpp"
#include "a5cycle/cipher.hpp"
#include "a5cycle/record_io.hpp"
#include "a5cycle/reduce.hpp"

namespace a5cycle {

/// Calls fn(State) for every candidate in ascending packed order.
void for_each_candidate(const CipherSpec& spec, const CandidateParams& params, const PredecessorTable& table,
                        const std::function<void(State)>& fn);

std::vector<State> enumerate_candidates(const CipherSpec& spec, const CandidateParams& params,
                                        const PredecessorTable& table);

enum class PruneMode { bfs_nodes, dfs_depth };

struct PruneConfig {
    PruneMode mode = PruneMode::dfs_depth;
    std::uint64_t node_limit = 100000;
    std::uint64_t depth_limit = 3000;
    unsigned workers = 1;

    /// Depth limits must stay below the candidate spacing bound.
    void validate(const CipherSpec& spec) const;
};

/// Largest depth limit accepted for `spec`.
inline std::uint64_t max_depth_limit(const CipherSpec& spec) { return minimum_candidate_spacing(spec) - 1; }

struct SegmentProbe {
    bool shallow = false;        // traversal finished within the limit
    bool hit_candidate = false;  // a predecessor of some segment node is a candidate
    std::uint64_t visited = 0;   // segment nodes expanded
};

/// Bounded reverse traversal of the segment rooted at `root`. Candidates met
/// along the way are boundaries and are not expanded.
SegmentProbe probe_segment(State root, const PruneConfig& config, const CipherSpec& spec,
                           const CandidateParams& params, const PredecessorTable& table);

struct PruneStats {
    std::uint64_t candidates = 0;
    std::uint64_t removed = 0;
    std::uint64_t survivors = 0;
    std::uint64_t traversal_work = 0;
    // Shallow segments kept because a candidate feeds into them.
    std::uint64_t kept_by_guard = 0;

    double removed_fraction() const {
        return candidates ? static_cast<double>(removed) / static_cast<double>(candidates) : 0.0;
    }
};

struct PruneResult {
    std::vector<State> skeleton;  // ascending
    PruneStats stats;
};

/// A candidate is removed iff its segment is shallow and no candidate maps
/// into it, so removed candidates are exactly leaves of the candidate graph.
PruneResult prune_shallow_segments(std::span<const State> candidates, const PruneConfig& config,
                                   const CipherSpec& spec, const CandidateParams& params,
                                   const PredecessorTable& table);

/// A skeleton edge pointed at a pruned candidate.
class PruneUnsound : public GraphError {
public:
    using GraphError::GraphError;
};

struct EdgeStats {
    std::uint64_t edges = 0;
    std::uint64_t clocks = 0;  // total forward work
};

/// One record per skeleton node (which must be ascending), sorted by source.
std::vector<EdgeRecord> build_skeleton_edges(std::span<const State> skeleton, const CandidateParams& params,
                                             const CipherSpec& spec, const PredecessorTable& table,
                                             const ForwardOptions& options, EdgeStats* stats = nullptr);

void write_skeleton(const std::filesystem::path& path, std::span<const State> nodes);
std::vector<State> read_skeleton(const std::filesystem::path& path);

/// Full shape of one segment, explored level by level up to `depth_cap`
/// levels and `node_cap` nodes.
struct SegmentShape {
    std::uint64_t depth = 0;
    bool censored = false;  // a cap was hit before the segment was exhausted
    std::uint64_t nodes = 0;
    std::vector<std::uint64_t> level_counts;  // level 0 is the root
};

SegmentShape trace_segment(State root, const CipherSpec& spec, const CandidateParams& params,
                           const PredecessorTable& table, std::uint64_t depth_cap,
                           std::uint64_t node_cap = std::numeric_limits<std::uint64_t>::max());

/// Depth limit D minimizing D + P(depth > D) * L over the sampled segment
/// depths; censored samples count as deeper than any candidate D. The result
/// is capped at max_depth_limit(spec).
std::uint64_t choose_depth_limit(std::span<const SegmentShape> samples, const CipherSpec& spec);

}  // namespace a5cycle
