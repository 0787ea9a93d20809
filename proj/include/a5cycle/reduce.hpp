#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "a5cycle/cipher.hpp"
#include "a5cycle/record_io.hpp"

namespace a5cycle {

/// Structural violation of an edge list (unsorted input, not a permutation).
class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ReduceConfig {
    std::uint64_t memory_budget = std::uint64_t{256} << 20;
    std::filesystem::path scratch = std::filesystem::temp_directory_path();
    bool overlap_io = false;

    static constexpr std::uint64_t kMinBudget = std::uint64_t{3} << 20;

    /// Throws ConfigError unless the budget holds three 1 MiB sort buffers.
    void validate() const;
};

struct PassStats {
    std::uint64_t iteration = 0;
    std::uint64_t input_records = 0;
    std::uint64_t leaves_removed = 0;
    std::uint64_t inner_nodes = 0;  // unique destinations, known before the co-scan
    std::uint64_t remaining = 0;
    std::uint64_t bytes_read = 0;
    std::uint64_t bytes_written = 0;
};

class IterationLog {
public:
    std::vector<PassStats> passes;

    /// Passes that removed at least one leaf.
    std::uint64_t iterations() const;

    /// iteration,removed,remaining,bytesRead,bytesWritten
    void write_csv(std::ostream& out) const;
};

/// Aggregate carried from removed leaves to their destination.
struct LeafAggregate {
    std::uint64_t destination = 0;
    std::uint64_t size = 0;
    std::uint64_t depth = 0;

    bool operator==(const LeafAggregate&) const = default;
};

struct LeafAggregateCodec {
    using value_type = LeafAggregate;
    static constexpr std::size_t size = 24;
    static void encode(const LeafAggregate& a, std::byte* p) {
        store_u64_le(p, a.destination);
        store_u64_le(p + 8, a.size);
        store_u64_le(p + 16, a.depth);
    }
    static LeafAggregate decode(const std::byte* p) { return {load_u64_le(p), load_u64_le(p + 8), load_u64_le(p + 16)}; }
};

/// One streaming leaf-cutting pass. Input must be sorted by source with unique
/// sources. A removed leaf adds (size + 1) to its destination's subtree size
/// and raises the destination's depth to at least (depth + 1). When
/// `removed_out` is given, the combined per-destination aggregates are written
/// there, sorted by destination.
PassStats cut_leaves_pass(const std::filesystem::path& in, const std::filesystem::path& out,
                          const ReduceConfig& config, const std::filesystem::path* removed_out = nullptr);

struct FixpointResult {
    IterationLog log;
    std::uint64_t original_records = 0;
    std::uint64_t remaining_records = 0;
};

/// Repeats cut_leaves_pass until a pass removes nothing; `out` then holds
/// exactly the cycle nodes.
FixpointResult cut_leaves_to_fixpoint(const std::filesystem::path& in, const std::filesystem::path& out,
                                      const ReduceConfig& config,
                                      const std::function<void(const PassStats&)>& on_pass = {});

struct CycleRecord {
    State leader;  // smallest packed source on the cycle
    std::uint64_t hop_count = 0;
    std::uint64_t clock_length = 0;
    std::uint64_t aggregate_tree_size = 0;
    std::uint64_t max_tree_depth = 0;

    bool operator==(const CycleRecord&) const = default;
};

/// Partitions a permutation edge list (sorted by source) into cycles, in
/// ascending leader order. Throws GraphError when the input is not a permutation.
std::vector<CycleRecord> count_cycles(const std::vector<EdgeRecord>& cycles_only);
std::vector<CycleRecord> count_cycles(const std::filesystem::path& cycles_only);

/// leader,hopCount,clockLength,aggregateTreeSize,maxTreeDepth
void write_cycles_csv(std::ostream& out, const std::vector<CycleRecord>& cycles);

}  // namespace a5cycle
