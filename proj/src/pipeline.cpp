#include "a5cycle/pipeline.hpp"

#include <algorithm>
#include <deque>

#include "a5cycle/work_queue.hpp"

namespace a5cycle {

void for_each_candidate(const CipherSpec& spec, const CandidateParams& params, const PredecessorTable& table,
                        const std::function<void(State)>& fn) {
    // R2 sits above R1 in the packing, so R2-major order is ascending.
    const std::uint64_t p1 = spec.register_period(0);
    const std::uint64_t p2 = spec.register_period(1);
    for (std::uint64_t r2 = 1; r2 <= p2; ++r2) {
        for (std::uint64_t r1 = 1; r1 <= p1; ++r1) {
            const State x = make_state(spec, r1, r2, params.fixed_r3);
            if (is_candidate(x, params, spec, table)) fn(x);
        }
    }
}

std::vector<State> enumerate_candidates(const CipherSpec& spec, const CandidateParams& params,
                                        const PredecessorTable& table) {
    std::vector<State> out;
    for_each_candidate(spec, params, table, [&](State x) { out.push_back(x); });
    return out;
}

void PruneConfig::validate(const CipherSpec& spec) const {
    if (mode == PruneMode::dfs_depth && depth_limit > max_depth_limit(spec)) {
        throw ConfigError("depth limit " + std::to_string(depth_limit) +
                          " must be below the minimum candidate spacing " +
                          std::to_string(minimum_candidate_spacing(spec)));
    }
    if (mode == PruneMode::bfs_nodes && node_limit == 0) throw ConfigError("node limit must be positive");
    if (workers == 0) throw ConfigError("worker count must be positive");
}

SegmentProbe probe_segment(State root, const PruneConfig& config, const CipherSpec& spec,
                           const CandidateParams& params, const PredecessorTable& table) {
    SegmentProbe probe;
    if (config.mode == PruneMode::dfs_depth) {
        struct Item {
            State x;
            std::uint64_t depth;
        };
        std::vector<Item> stack{{root, 0}};
        while (!stack.empty()) {
            const Item it = stack.back();
            stack.pop_back();
            ++probe.visited;
            for (State p : predecessors(it.x, spec, table)) {
                if (is_candidate(p, params, spec, table)) {
                    probe.hit_candidate = true;
                    continue;
                }
                if (it.depth + 1 > config.depth_limit) return probe;
                stack.push_back({p, it.depth + 1});
            }
        }
    } else {
        std::deque<State> queue{root};
        std::uint64_t discovered = 1;
        while (!queue.empty()) {
            const State x = queue.front();
            queue.pop_front();
            ++probe.visited;
            for (State p : predecessors(x, spec, table)) {
                if (is_candidate(p, params, spec, table)) {
                    probe.hit_candidate = true;
                    continue;
                }
                if (++discovered > config.node_limit) return probe;
                queue.push_back(p);
            }
        }
    }
    probe.shallow = true;
    return probe;
}

PruneResult prune_shallow_segments(std::span<const State> candidates, const PruneConfig& config,
                                   const CipherSpec& spec, const CandidateParams& params,
                                   const PredecessorTable& table) {
    config.validate(spec);
    struct Verdict {
        State x;
        SegmentProbe probe;
    };
    const auto verdicts = parallel_gather<Verdict>(
        candidates.size(), 512, config.workers, [&](std::size_t begin, std::size_t end) {
            std::vector<Verdict> part;
            part.reserve(end - begin);
            for (std::size_t i = begin; i < end; ++i) {
                part.push_back({candidates[i], probe_segment(candidates[i], config, spec, params, table)});
            }
            return part;
        });

    PruneResult result;
    result.stats.candidates = candidates.size();
    for (const auto& v : verdicts) {
        result.stats.traversal_work += v.probe.visited;
        if (v.probe.shallow && !v.probe.hit_candidate) {
            ++result.stats.removed;
        } else {
            if (v.probe.shallow) ++result.stats.kept_by_guard;
            result.skeleton.push_back(v.x);
        }
    }
    result.stats.survivors = result.skeleton.size();
    return result;
}

std::vector<EdgeRecord> build_skeleton_edges(std::span<const State> skeleton, const CandidateParams& params,
                                             const CipherSpec& spec, const PredecessorTable& table,
                                             const ForwardOptions& options, EdgeStats* stats) {
    for (std::size_t i = 1; i < skeleton.size(); ++i) {
        if (!(skeleton[i - 1] < skeleton[i])) throw GraphError("skeleton must be strictly ascending");
    }
    const auto forward = forward_to_candidate(skeleton, params, spec, table, options);
    std::vector<EdgeRecord> edges(skeleton.size());
    EdgeStats local;
    for (std::size_t i = 0; i < skeleton.size(); ++i) {
        const auto& r = forward[i];
        if (!std::binary_search(skeleton.begin(), skeleton.end(), r.destination)) {
            throw PruneUnsound("edge from " + std::to_string(skeleton[i].bits) + " reaches pruned candidate " +
                               std::to_string(r.destination.bits));
        }
        edges[i] = {skeleton[i].bits, r.destination.bits, r.distance, 0, 0};
        local.clocks += r.distance;
    }
    local.edges = edges.size();
    if (stats) *stats = local;
    return edges;
}

void write_skeleton(const std::filesystem::path& path, std::span<const State> nodes) {
    write_records<StateCodec>(path, nodes);
}

std::vector<State> read_skeleton(const std::filesystem::path& path) { return read_records<StateCodec>(path); }

SegmentShape trace_segment(State root, const CipherSpec& spec, const CandidateParams& params,
                           const PredecessorTable& table, std::uint64_t depth_cap, std::uint64_t node_cap) {
    SegmentShape shape;
    std::vector<State> frontier{root};
    std::vector<State> next;
    for (std::uint64_t level = 0;; ++level) {
        shape.level_counts.push_back(frontier.size());
        shape.nodes += frontier.size();
        shape.depth = level;
        next.clear();
        for (State x : frontier) {
            for (State p : predecessors(x, spec, table)) {
                if (!is_candidate(p, params, spec, table)) next.push_back(p);
            }
        }
        if (next.empty()) break;
        if (level == depth_cap || shape.nodes + next.size() > node_cap) {
            shape.censored = true;
            break;
        }
        frontier.swap(next);
    }
    return shape;
}

std::uint64_t choose_depth_limit(std::span<const SegmentShape> samples, const CipherSpec& spec) {
    if (samples.empty()) throw ConfigError("depth limit selection needs at least one sampled segment");
    const double L = minimum_cycle_length(spec).value();
    const std::uint64_t cap = max_depth_limit(spec);

    // Censored samples are deeper than any limit considered.
    std::vector<std::uint64_t> depths;
    for (const auto& s : samples) {
        if (!s.censored) depths.push_back(s.depth);
    }
    std::sort(depths.begin(), depths.end());
    const double n = static_cast<double>(samples.size());

    auto cost = [&](std::uint64_t d) {
        const auto shallow = std::upper_bound(depths.begin(), depths.end(), d) - depths.begin();
        return static_cast<double>(d) + static_cast<double>(samples.size() - shallow) / n * L;
    };
    // Cost only drops right at an observed depth, so those are the only candidates.
    std::uint64_t best = 0;
    double best_cost = cost(0);
    for (std::uint64_t d : depths) {
        if (d > cap) break;
        if (const double c = cost(d); c < best_cost) {
            best_cost = c;
            best = d;
        }
    }
    return best;
}

}  // namespace a5cycle
