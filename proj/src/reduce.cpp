#include "a5cycle/reduce.hpp"

#include <algorithm>
#include <ostream>

#include "a5cycle/external_sort.hpp"

namespace a5cycle {

namespace {

struct SameKey {
    bool operator()(std::uint64_t& acc, const std::uint64_t& next) const { return acc == next; }
};

struct ByDestination {
    bool operator()(const LeafAggregate& a, const LeafAggregate& b) const { return a.destination < b.destination; }
};

struct FoldAggregate {
    bool operator()(LeafAggregate& acc, const LeafAggregate& next) const {
        if (acc.destination != next.destination) return false;
        acc.size += next.size;
        acc.depth = std::max(acc.depth, next.depth);
        return true;
    }
};

SortConfig sort_config(const ReduceConfig& c) {
    SortConfig s;
    s.memory_budget = c.memory_budget;
    s.scratch = c.scratch;
    s.overlap_io = c.overlap_io;
    return s;
}

// Copies the edges unchanged, checking that the destinations are exactly the sources.
std::uint64_t copy_closed(const std::filesystem::path& in, const std::filesystem::path& dests_path,
                          const std::filesystem::path& out, const SortConfig& sc, IoCounters& io) {
    RecordReader<EdgeCodec> r(in, &io, sc.io_block(), sc.overlap_io);
    RecordReader<U64Codec> dests(dests_path, &io, sc.io_block(), sc.overlap_io);
    RecordWriter<EdgeCodec> w(out, &io, sc.io_block(), sc.overlap_io);
    EdgeRecord e;
    std::uint64_t d = 0;
    while (r.next(e)) {
        if (!dests.next(d) || d != e.source) throw GraphError("destination set is not a subset of the sources");
        w.write(e);
    }
    w.close();
    return w.count();
}

}  // namespace

void ReduceConfig::validate() const {
    if (memory_budget < kMinBudget) {
        throw ConfigError("memory budget must hold three 1 MiB sort buffers (at least 3 MiB)");
    }
}

std::uint64_t IterationLog::iterations() const {
    return static_cast<std::uint64_t>(
        std::count_if(passes.begin(), passes.end(), [](const PassStats& p) { return p.leaves_removed > 0; }));
}

void IterationLog::write_csv(std::ostream& out) const {
    out << "iteration,removed,remaining,bytesRead,bytesWritten\n";
    for (const auto& p : passes) {
        out << p.iteration << ',' << p.leaves_removed << ',' << p.remaining << ',' << p.bytes_read << ','
            << p.bytes_written << '\n';
    }
}

PassStats cut_leaves_pass(const std::filesystem::path& in, const std::filesystem::path& out,
                          const ReduceConfig& config, const std::filesystem::path* removed_out) {
    config.validate();
    const SortConfig sc = sort_config(config);
    IoCounters io;
    PassStats stats;

    // Destinations, sorted and deduplicated.
    TempFile unique_dests(config.scratch, "dest");
    {
        ExternalSorter<U64Codec, std::less<>, SameKey> dests(sc, &io);
        RecordReader<EdgeCodec> r(in, &io, sc.io_block(), sc.overlap_io);
        EdgeRecord e;
        bool first = true;
        std::uint64_t prev = 0;
        while (r.next(e)) {
            if (!first && e.source <= prev) {
                throw GraphError("edge list not sorted by unique source at record " +
                                 std::to_string(stats.input_records));
            }
            first = false;
            prev = e.source;
            dests.push(e.destination);
            ++stats.input_records;
        }
        RecordWriter<U64Codec> w(unique_dests.path(), &io, sc.io_block(), sc.overlap_io);
        dests.drain([&](std::uint64_t d) { w.write(d); });
        w.close();
        stats.inner_nodes = w.count();
    }
    if (stats.inner_nodes > stats.input_records) throw GraphError("destination set is not a subset of the sources");

    if (stats.inner_nodes == stats.input_records) {
        // Nothing to cut: every source is also a destination.
        stats.remaining = copy_closed(in, unique_dests.path(), out, sc, io);
        if (removed_out) RecordWriter<LeafAggregateCodec>(*removed_out, &io).close();
        stats.bytes_read = io.bytes_read;
        stats.bytes_written = io.bytes_written;
        return stats;
    }

    // Co-scan sources against unique destinations: leaves go to the aggregate sorter.
    TempFile inner(config.scratch, "inner");
    ExternalSorter<LeafAggregateCodec, ByDestination, FoldAggregate> aggregates(sc, &io);
    {
        RecordReader<EdgeCodec> edges(in, &io, sc.io_block(), sc.overlap_io);
        RecordReader<U64Codec> dests(unique_dests.path(), &io, sc.io_block(), sc.overlap_io);
        RecordWriter<EdgeCodec> w(inner.path(), &io, sc.io_block(), sc.overlap_io);
        std::uint64_t d = 0;
        bool have_d = dests.next(d);
        EdgeRecord e;
        while (edges.next(e)) {
            if (have_d && d < e.source) throw GraphError("destination " + std::to_string(d) + " is not a source");
            if (have_d && d == e.source) {
                w.write(e);
                have_d = dests.next(d);
            } else {
                aggregates.push({e.destination, e.subtree_size + 1, e.subtree_depth + 1});
                ++stats.leaves_removed;
            }
        }
        if (have_d) throw GraphError("destination " + std::to_string(d) + " is not a source");
        w.close();
    }
    unique_dests.remove();

    TempFile agg_tmp;
    std::filesystem::path agg_path;
    if (removed_out) {
        agg_path = *removed_out;
    } else {
        agg_tmp = TempFile(config.scratch, "agg");
        agg_path = agg_tmp.path();
    }
    {
        RecordWriter<LeafAggregateCodec> w(agg_path, &io, sc.io_block(), sc.overlap_io);
        aggregates.drain([&](const LeafAggregate& a) { w.write(a); });
        w.close();
    }

    // Attach the aggregates to their destinations.
    {
        RecordReader<EdgeCodec> edges(inner.path(), &io, sc.io_block(), sc.overlap_io);
        RecordReader<LeafAggregateCodec> aggs(agg_path, &io, sc.io_block(), sc.overlap_io);
        RecordWriter<EdgeCodec> w(out, &io, sc.io_block(), sc.overlap_io);
        LeafAggregate a;
        bool have_a = aggs.next(a);
        EdgeRecord e;
        while (edges.next(e)) {
            if (have_a && a.destination < e.source) throw GraphError("aggregate target is not an inner node");
            if (have_a && a.destination == e.source) {
                e.subtree_size += a.size;
                e.subtree_depth = std::max(e.subtree_depth, a.depth);
                have_a = aggs.next(a);
            }
            w.write(e);
        }
        if (have_a) throw GraphError("aggregate target is not an inner node");
        w.close();
        stats.remaining = w.count();
    }

    stats.bytes_read = io.bytes_read;
    stats.bytes_written = io.bytes_written;
    return stats;
}

FixpointResult cut_leaves_to_fixpoint(const std::filesystem::path& in, const std::filesystem::path& out,
                                      const ReduceConfig& config,
                                      const std::function<void(const PassStats&)>& on_pass) {
    config.validate();
    FixpointResult result;
    std::uint64_t node_total = 0;
    {
        RecordReader<EdgeCodec> r(in, nullptr, 1 << 16);
        result.original_records = r.size();
        EdgeRecord e;
        while (r.next(e)) node_total += e.subtree_size + 1;
    }

    std::filesystem::path current = in;
    TempFile held;
    for (std::uint64_t iteration = 1;; ++iteration) {
        TempFile next(config.scratch, "pass");
        PassStats stats = cut_leaves_pass(current, next.path(), config);
        stats.iteration = iteration;

        // Node conservation: every removed node is accounted for in some subtree.
        std::uint64_t accounted = 0;
        {
            RecordReader<EdgeCodec> r(next.path(), nullptr, 1 << 16);
            EdgeRecord e;
            while (r.next(e)) accounted += e.subtree_size + 1;
        }
        if (accounted != node_total) {
            throw GraphError("node conservation violated after pass " + std::to_string(iteration));
        }

        result.log.passes.push_back(stats);
        if (on_pass) on_pass(stats);
        held = std::move(next);
        current = held.path();
        if (stats.leaves_removed == 0) break;
    }

    std::error_code ec;
    std::filesystem::rename(current, out, ec);
    if (ec) {
        std::filesystem::copy_file(current, out, std::filesystem::copy_options::overwrite_existing, ec);
        if (ec) throw IoError("cannot write " + out.string());
    }
    result.remaining_records = result.log.passes.back().remaining;
    return result;
}

std::vector<CycleRecord> count_cycles(const std::vector<EdgeRecord>& edges) {
    const std::size_t n = edges.size();
    for (std::size_t i = 1; i < n; ++i) {
        if (edges[i].source <= edges[i - 1].source) throw GraphError("cycle input not sorted by unique source");
    }
    auto index_of = [&](std::uint64_t node) -> std::size_t {
        auto it = std::lower_bound(edges.begin(), edges.end(), node,
                                   [](const EdgeRecord& e, std::uint64_t v) { return e.source < v; });
        if (it == edges.end() || it->source != node) {
            throw GraphError("not a permutation: destination " + std::to_string(node) + " has no outgoing edge");
        }
        return static_cast<std::size_t>(it - edges.begin());
    };
    std::vector<std::size_t> next(n);
    std::vector<std::uint8_t> indegree(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        next[i] = index_of(edges[i].destination);
        if (++indegree[next[i]] > 1) {
            throw GraphError("not a permutation: node " + std::to_string(edges[next[i]].source) +
                             " has more than one predecessor");
        }
    }

    std::vector<CycleRecord> cycles;
    std::vector<bool> visited(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (visited[i]) continue;
        // Sources are ascending, so the first unvisited node is the cycle minimum.
        CycleRecord c;
        c.leader = State{edges[i].source};
        for (std::size_t j = i; !visited[j]; j = next[j]) {
            visited[j] = true;
            ++c.hop_count;
            c.clock_length += edges[j].distance;
            c.aggregate_tree_size += edges[j].subtree_size;
            c.max_tree_depth = std::max(c.max_tree_depth, edges[j].subtree_depth);
        }
        cycles.push_back(c);
    }
    return cycles;
}

std::vector<CycleRecord> count_cycles(const std::filesystem::path& cycles_only) {
    return count_cycles(read_records<EdgeCodec>(cycles_only));
}

void write_cycles_csv(std::ostream& out, const std::vector<CycleRecord>& cycles) {
    out << "leader,hopCount,clockLength,aggregateTreeSize,maxTreeDepth\n";
    for (const auto& c : cycles) {
        out << "0x" << std::hex << c.leader.bits << std::dec << ',' << c.hop_count << ',' << c.clock_length << ','
            << c.aggregate_tree_size << ',' << c.max_tree_depth << '\n';
    }
}

}  // namespace a5cycle
