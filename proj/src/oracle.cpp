#include "a5cycle/oracle.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "a5cycle/naive.hpp"
#include "a5cycle/reduce.hpp"
#include "a5cycle/work_queue.hpp"

namespace a5cycle {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

// Marks every node lying on a cycle of the functional graph `next`.
std::vector<std::uint8_t> mark_cycles(const std::vector<std::uint32_t>& next) {
    const std::size_t n = next.size();
    std::vector<std::uint8_t> color(n, 0);  // 0 new, 1 on current path, 2 done
    std::vector<std::uint8_t> on_cycle(n, 0);
    std::vector<std::uint32_t> path;
    for (std::size_t start = 0; start < n; ++start) {
        if (color[start]) continue;
        path.clear();
        std::uint32_t x = static_cast<std::uint32_t>(start);
        while (color[x] == 0) {
            color[x] = 1;
            path.push_back(x);
            x = next[x];
        }
        if (color[x] == 1) {
            std::uint32_t y = x;
            do {
                on_cycle[y] = 1;
                y = next[y];
            } while (y != x);
        }
        for (auto p : path) color[p] = 2;
    }
    return on_cycle;
}

}  // namespace

std::uint64_t GroundTruth::max_segment_depth() const {
    return segment_depth.empty() ? 0 : *std::max_element(segment_depth.begin(), segment_depth.end());
}

std::size_t GroundTruth::candidate_index(State c) const {
    auto it = std::lower_bound(candidates.begin(), candidates.end(), c);
    if (it == candidates.end() || *it != c) throw std::out_of_range("not a candidate");
    return static_cast<std::size_t>(it - candidates.begin());
}

GroundTruth brute_force_analysis(const CipherSpec& spec, const CandidateParams& params,
                                 const OracleOptions& options) {
    const std::uint64_t n = spec.node_count();
    if (n > kOracleMaxNodes) {
        throw ConfigError("instance too large for the oracle: " + std::to_string(n) + " states (limit 2^31)");
    }
    GroundTruth t;
    t.node_count = n;
    t.successor.resize(n);

    // The default step is the bit-level simulator, not the packed code under test.
    parallel_chunks(n, 1 << 14, options.workers, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const State x = state_unrank(r, spec);
            const State y = options.step ? options.step(x) : naive::step(x, spec);
            t.successor[r] = static_cast<std::uint32_t>(state_rank(y, spec));
        }
    });
    const auto& succ = t.successor;

    std::vector<std::uint8_t> indegree(n, 0);
    for (std::uint64_t r = 0; r < n; ++r) {
        if (indegree[succ[r]] < 255) ++indegree[succ[r]];
    }
    t.leaf_count = static_cast<std::uint64_t>(std::count(indegree.begin(), indegree.end(), 0));

    // Cycles, ordered by leader.
    const auto on_cycle = mark_cycles(succ);
    std::vector<std::uint32_t> component(n, kNone);
    {
        std::vector<OracleCycle> found;
        for (std::uint64_t r = 0; r < n; ++r) {
            if (!on_cycle[r] || component[r] != kNone) continue;
            OracleCycle c;
            std::uint32_t x = static_cast<std::uint32_t>(r);
            do {
                component[x] = static_cast<std::uint32_t>(found.size());
                c.states.push_back(state_unrank(x, spec));
                x = succ[x];
            } while (x != r);
            const auto lead = std::min_element(c.states.begin(), c.states.end());
            std::rotate(c.states.begin(), lead, c.states.end());
            c.leader = c.states.front();
            c.length = c.states.size();
            found.push_back(std::move(c));
        }
        std::vector<std::uint32_t> order(found.size());
        for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::uint32_t a, std::uint32_t b) { return found[a].leader < found[b].leader; });
        std::vector<std::uint32_t> new_id(found.size());
        for (std::uint32_t i = 0; i < order.size(); ++i) {
            new_id[order[i]] = i;
            t.cycles.push_back(std::move(found[order[i]]));
        }
        for (auto& c : component) {
            if (c != kNone) c = new_id[c];
        }
    }

    // Components: every node inherits the component of the cycle it reaches.
    std::vector<std::uint32_t> path;
    for (std::uint64_t r = 0; r < n; ++r) {
        if (component[r] != kNone) continue;
        path.clear();
        std::uint32_t x = static_cast<std::uint32_t>(r);
        while (component[x] == kNone) {
            path.push_back(x);
            x = succ[x];
        }
        for (auto p : path) component[p] = component[x];
    }
    for (auto c : component) ++t.cycles[c].component_size;
    for (const auto& c : t.cycles) t.cycle_nodes += c.length;
    if (!options.analyze_candidates) return t;

    // Candidates straight from the definition on the successor map.
    const unsigned l12 = spec.reg(0).length + spec.reg(1).length;
    auto r3_of = [&](std::uint32_t r) { return state_unrank(r, spec).bits >> l12; };
    std::vector<std::uint32_t> root(n, kNone);
    std::vector<std::uint32_t> depth(n, 0);
    for (std::uint64_t r = 0; r < n; ++r) {
        if (r3_of(static_cast<std::uint32_t>(r)) == params.fixed_r3 && r3_of(succ[r]) != params.fixed_r3 &&
            indegree[r] > 0) {
            root[r] = static_cast<std::uint32_t>(r);
            t.candidates.push_back(state_unrank(r, spec));
        }
    }
    std::sort(t.candidates.begin(), t.candidates.end());

    // Segment membership: first candidate reached, with its distance.
    for (std::uint64_t r = 0; r < n; ++r) {
        if (root[r] != kNone) continue;
        path.clear();
        std::uint32_t x = static_cast<std::uint32_t>(r);
        while (root[x] == kNone) {
            path.push_back(x);
            if (path.size() > n) throw std::logic_error("oracle: a cycle without candidates");
            x = succ[x];
        }
        std::uint32_t d = depth[x] + static_cast<std::uint32_t>(path.size());
        for (auto p : path) {
            root[p] = root[x];
            depth[p] = d--;
        }
    }

    const std::size_t m = t.candidates.size();
    t.segment_depth.assign(m, 0);
    t.segment_size.assign(m, 0);
    std::vector<std::uint32_t> root_index(n, kNone);
    for (std::size_t i = 0; i < m; ++i) root_index[state_rank(t.candidates[i], spec)] = static_cast<std::uint32_t>(i);
    for (std::uint64_t r = 0; r < n; ++r) {
        const std::uint32_t i = root_index[root[r]];
        ++t.segment_size[i];
        t.segment_depth[i] = std::max<std::uint64_t>(t.segment_depth[i], depth[r]);
        if (t.level_totals.size() <= depth[r]) t.level_totals.resize(depth[r] + 1, 0);
        ++t.level_totals[depth[r]];
    }

    t.candidate_edges.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const std::uint32_t c = static_cast<std::uint32_t>(state_rank(t.candidates[i], spec));
        const std::uint32_t y = succ[c];
        t.candidate_edges[i] = {t.candidates[i].bits, state_unrank(root[y], spec).bits, std::uint64_t{depth[y]} + 1,
                                0, 0};
    }
    for (std::uint64_t r = 0; r < n; ++r) {
        const std::uint32_t first = root_index[root[succ[r]]];
        ++t.second_leg_distances[t.candidate_edges[first].distance];
    }
    for (auto& c : t.cycles) {
        for (State s : c.states) {
            const auto r = state_rank(s, spec);
            if (root[r] == r) ++c.candidates;
        }
    }
    return t;
}

std::uint64_t max_tree_height(const std::vector<EdgeRecord>& edges) {
    const std::size_t n = edges.size();
    std::vector<std::uint64_t> sources(n);
    for (std::size_t i = 0; i < n; ++i) sources[i] = edges[i].source;
    std::sort(sources.begin(), sources.end());
    if (std::adjacent_find(sources.begin(), sources.end()) != sources.end()) throw GraphError("duplicate source");
    auto index_of = [&](std::uint64_t v) {
        auto it = std::lower_bound(sources.begin(), sources.end(), v);
        if (it == sources.end() || *it != v) throw GraphError("destination is not a source");
        return static_cast<std::uint32_t>(it - sources.begin());
    };
    std::vector<std::uint32_t> next(n);
    for (const auto& e : edges) next[index_of(e.source)] = index_of(e.destination);

    const auto on_cycle = mark_cycles(next);
    std::vector<std::uint64_t> height(n, 0);
    std::vector<std::uint8_t> known(on_cycle);
    std::vector<std::uint32_t> path;
    std::uint64_t best = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        if (known[i]) continue;
        path.clear();
        std::uint32_t x = i;
        while (!known[x]) {
            path.push_back(x);
            x = next[x];
        }
        std::uint64_t h = height[x] + path.size();
        for (auto p : path) {
            height[p] = h--;
            known[p] = 1;
        }
        best = std::max(best, height[path.front()]);
    }
    return best;
}

void write_ground_truth_csv(std::ostream& out, const GroundTruth& t) {
    out << "key,value\n";
    out << "nodeCount," << t.node_count << '\n';
    out << "cycles," << t.cycles.size() << '\n';
    out << "cycleNodes," << t.cycle_nodes << '\n';
    out << "leafCount," << t.leaf_count << '\n';
    std::uint64_t largest_cycle = 0;
    std::uint64_t largest_component = 0;
    for (const auto& c : t.cycles) {
        largest_cycle = std::max(largest_cycle, c.length);
        largest_component = std::max(largest_component, c.component_size);
    }
    out << "largestCycle," << largest_cycle << '\n';
    out << "largestComponent," << largest_component << '\n';
    out << "candidates," << t.candidates.size() << '\n';
    out << "maxSegmentDepth," << t.max_segment_depth() << '\n';
}

void write_oracle_cycles_csv(std::ostream& out, const GroundTruth& t) {
    out << "leader,length,candidates,componentSize\n";
    for (const auto& c : t.cycles) {
        out << "0x" << std::hex << c.leader.bits << std::dec << ',' << c.length << ',' << c.candidates << ','
            << c.component_size << '\n';
    }
}

}  // namespace a5cycle
