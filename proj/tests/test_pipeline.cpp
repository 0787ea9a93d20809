#include <doctest.h>

#include <algorithm>
#include <set>

#include <unistd.h>

#include "a5cycle/oracle.hpp"
#include "a5cycle/pipeline.hpp"
#include "a5cycle/reduce.hpp"
#include "a5cycle/sampling.hpp"

using namespace a5cycle;
namespace fs = std::filesystem;

namespace {

const GroundTruth& mini567_truth() {
    static const GroundTruth t = brute_force_analysis(CipherSpec::mini567(), CandidateParams::default_for(CipherSpec::mini567()));
    return t;
}

fs::path scratch_dir() {
    static const fs::path dir = [] {
        auto d = fs::temp_directory_path() / ("a5cycle-test-pipeline-" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::multiset<std::pair<std::uint64_t, std::uint64_t>> oracle_cycle_multiset(const GroundTruth& t) {
    std::multiset<std::pair<std::uint64_t, std::uint64_t>> out;
    for (const auto& c : t.cycles) out.insert({c.candidates, c.length});
    return out;
}

}  // namespace

TEST_CASE("oracle basics on mini567") {
    const auto spec = CipherSpec::mini567();
    const auto& t = mini567_truth();
    CHECK(t.node_count == 248031);
    std::uint64_t total = 0;
    for (const auto& c : t.cycles) {
        total += c.component_size;
        CHECK(c.candidates >= 1);
        std::set<std::uint64_t> r3;
        for (State s : c.states) r3.insert(register_value(s, spec, 2));
        CHECK(r3.size() == spec.register_period(2));
        CHECK(c.leader == *std::min_element(c.states.begin(), c.states.end()));
    }
    CHECK(total == t.node_count);
    CHECK(t.cycle_nodes <= t.node_count);
    const double leaf_fraction = static_cast<double>(t.leaf_count) / static_cast<double>(t.node_count);
    CHECK(std::abs(leaf_fraction - 0.375) <= 0.01);

    std::uint64_t legs = 0;
    for (const auto& [d, count] : t.second_leg_distances) legs += count;
    CHECK(legs == t.node_count);

    // Cycle lengths agree with the candidate graph distances.
    for (const auto& c : t.cycles) {
        std::uint64_t sum = 0;
        std::uint64_t hops = 0;
        State x = *std::find_if(c.states.begin(), c.states.end(), [&](State s) {
            return std::binary_search(t.candidates.begin(), t.candidates.end(), s);
        });
        const State start = x;
        do {
            const auto& e = t.candidate_edges[t.candidate_index(x)];
            sum += e.distance;
            ++hops;
            x = State{e.destination};
        } while (x != start);
        CHECK(sum == c.length);
        CHECK(hops == c.candidates);
    }
}

TEST_CASE("oracle on a bijection has no leaves") {
    const auto spec = CipherSpec::mini567();
    OracleOptions opts;
    opts.analyze_candidates = false;
    opts.step = [&](State x) {
        return make_state(spec, step_register(register_value(x, spec, 0), spec.reg(0)),
                          step_register(register_value(x, spec, 1), spec.reg(1)),
                          step_register(register_value(x, spec, 2), spec.reg(2)));
    };
    const auto t = brute_force_analysis(spec, CandidateParams::default_for(spec), opts);
    CHECK(t.leaf_count == 0);
    CHECK(t.cycle_nodes == t.node_count);
    CHECK_THROWS_AS(brute_force_analysis(CipherSpec::a51(), CandidateParams::default_for(CipherSpec::a51())),
                    ConfigError);
}

TEST_CASE("candidate enumeration") {
    const auto spec = CipherSpec::mini567();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    const auto cands = enumerate_candidates(spec, params, table);
    CHECK(cands == mini567_truth().candidates);
    CHECK(std::adjacent_find(cands.begin(), cands.end(), [](State a, State b) { return !(a < b); }) == cands.end());
    for (State c : cands) CHECK(is_candidate_reference(c, params, spec, table));
}

TEST_CASE("A5/1 candidate fraction on the fixedR3 slice") {
    const auto spec = CipherSpec::a51();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);

    // Exact value from the four free clock-area bits of R1 and R2, with c3 and
    // n3 taken from fixedR3 and predecessors found by trying every pattern.
    const unsigned c3 = params.c3(spec);
    const unsigned n3 = static_cast<unsigned>(params.fixed_r3 >> (spec.reg(2).clock_tap + 1)) & 1u;
    unsigned good = 0;
    for (unsigned bits = 0; bits < 16; ++bits) {
        const unsigned c[3] = {bits & 1u, (bits >> 2) & 1u, c3};
        const unsigned nx[3] = {(bits >> 1) & 1u, (bits >> 3) & 1u, n3};
        if (!(majority_clock_set(c[0], c[1], c[2]) & 0b100)) continue;
        bool pred = false;
        for (ClockSet pattern : {kClockR1R2, kClockR1R3, kClockR2R3, kClockAll}) {
            unsigned prev[3];
            for (int k = 0; k < 3; ++k) prev[k] = (pattern >> k) & 1u ? nx[k] : c[k];
            pred = pred || majority_clock_set(prev[0], prev[1], prev[2]) == pattern;
        }
        good += pred;
    }
    const double exact = good / 16.0;
    CHECK(exact == 0.4375);

    Rng rng(2024);
    std::uint64_t hits = 0;
    const std::uint64_t n = 1000000;
    for (std::uint64_t i = 0; i < n; ++i) hits += is_candidate(random_fixed_r3_state(rng, spec, params), params, spec, table);
    CHECK(std::abs(static_cast<double>(hits) / n - exact) <= 0.002);
}

TEST_CASE("pruning removes only candidate-graph leaves") {
    const auto spec = CipherSpec::mini567();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    const auto& t = mini567_truth();

    std::set<std::uint64_t> has_incoming;
    for (const auto& e : t.candidate_edges) has_incoming.insert(e.destination);
    std::set<State> cycle_candidates;
    for (const auto& c : t.cycles) {
        for (State s : c.states) {
            if (std::binary_search(t.candidates.begin(), t.candidates.end(), s)) cycle_candidates.insert(s);
        }
    }

    for (auto mode : {PruneMode::dfs_depth, PruneMode::bfs_nodes}) {
        for (std::uint64_t limit : {0, 1, 8, 40, 126}) {
            PruneConfig config;
            config.mode = mode;
            config.depth_limit = limit;
            config.node_limit = limit + 1;
            CAPTURE(limit);
            const auto r = prune_shallow_segments(t.candidates, config, spec, params, table);
            CHECK(r.stats.removed + r.stats.survivors == t.candidates.size());
            for (State c : cycle_candidates) CHECK(std::binary_search(r.skeleton.begin(), r.skeleton.end(), c));
            for (std::size_t i = 0; i < t.candidates.size(); ++i) {
                const State c = t.candidates[i];
                const bool kept = std::binary_search(r.skeleton.begin(), r.skeleton.end(), c);
                const bool shallow = mode == PruneMode::dfs_depth ? t.segment_depth[i] <= limit
                                                                  : t.segment_size[i] <= limit + 1;
                CHECK(kept == (!shallow || has_incoming.count(c.bits) > 0));
            }
            if (mode == PruneMode::dfs_depth) {
                // Every expanded node sits at depth <= limit, at most 4 children each.
                CHECK(r.stats.traversal_work <= t.node_count);
            }
        }
    }
    PruneConfig bad;
    bad.depth_limit = 127;
    CHECK_THROWS_AS(prune_shallow_segments(t.candidates, bad, spec, params, table), ConfigError);
}

TEST_CASE("skeleton edges match the oracle candidate graph") {
    const auto spec = CipherSpec::mini567();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    const auto& t = mini567_truth();

    ForwardOptions fo;
    fo.stride = default_stride(spec, params);
    EdgeStats es;
    const auto all = build_skeleton_edges(t.candidates, params, spec, table, fo, &es);
    CHECK(all == t.candidate_edges);
    std::uint64_t clocks = 0;
    for (const auto& e : all) clocks += e.distance;
    CHECK(es.clocks == clocks);

    PruneConfig config;
    config.depth_limit = 8;
    const auto pruned = prune_shallow_segments(t.candidates, config, spec, params, table);
    const auto edges = build_skeleton_edges(pruned.skeleton, params, spec, table, fo);
    for (const auto& e : edges) {
        CHECK(e == t.candidate_edges[t.candidate_index(State{e.source})]);
        CHECK(std::binary_search(pruned.skeleton.begin(), pruned.skeleton.end(), State{e.destination}));
    }

    // Unsound skeleton: drop a node that others point at.
    std::vector<State> holey(pruned.skeleton.begin(), pruned.skeleton.end());
    const State target{edges.front().destination};
    holey.erase(std::find(holey.begin(), holey.end(), target));
    if (std::any_of(holey.begin(), holey.end(), [&](State s) {
            return t.candidate_edges[t.candidate_index(s)].destination == target.bits;
        })) {
        CHECK_THROWS_AS(build_skeleton_edges(holey, params, spec, table, fo), PruneUnsound);
    }
}

TEST_CASE("pipeline stages are deterministic across worker counts") {
    const auto spec = CipherSpec::mini567();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    const auto& cands = mini567_truth().candidates;
    std::vector<State> skeleton0;
    std::vector<EdgeRecord> edges0;
    for (unsigned workers : {1u, 4u, 16u}) {
        PruneConfig config;
        config.depth_limit = 20;
        config.workers = workers;
        const auto r = prune_shallow_segments(cands, config, spec, params, table);
        ForwardOptions fo;
        fo.workers = workers;
        fo.stride = default_stride(spec, params);
        const auto edges = build_skeleton_edges(r.skeleton, params, spec, table, fo);
        if (workers == 1) {
            skeleton0 = r.skeleton;
            edges0 = edges;
        } else {
            CHECK(r.skeleton == skeleton0);
            CHECK(edges == edges0);
        }
    }
    const auto path = scratch_dir() / "skeleton.bin";
    write_skeleton(path, skeleton0);
    CHECK(fs::file_size(path) == 8 * skeleton0.size());
    CHECK(read_skeleton(path) == skeleton0);
    fs::remove(path);
}

TEST_CASE("mini567 end to end reproduces the oracle cycles") {
    const auto spec = CipherSpec::mini567();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    const auto& t = mini567_truth();
    for (std::uint64_t limit : {0, 8, 100}) {
        CAPTURE(limit);
        PruneConfig config;
        config.depth_limit = limit;
        const auto pruned = prune_shallow_segments(enumerate_candidates(spec, params, table), config, spec, params, table);
        ForwardOptions fo;
        fo.stride = default_stride(spec, params);
        const auto edges = build_skeleton_edges(pruned.skeleton, params, spec, table, fo);

        const auto in = scratch_dir() / "edges.bin";
        const auto out = scratch_dir() / "cycles.bin";
        write_records<EdgeCodec>(in, edges);
        ReduceConfig rc;
        rc.memory_budget = 4 << 20;
        rc.scratch = scratch_dir();
        const auto fix = cut_leaves_to_fixpoint(in, out, rc);
        CHECK(fix.log.iterations() == max_tree_height(edges));

        const auto cycles = count_cycles(out);
        std::multiset<std::pair<std::uint64_t, std::uint64_t>> got;
        std::uint64_t clock_total = 0;
        std::uint64_t tree_total = 0;
        for (const auto& c : cycles) {
            got.insert({c.hop_count, c.clock_length});
            clock_total += c.clock_length;
            tree_total += c.hop_count + c.aggregate_tree_size;
        }
        CHECK(got == oracle_cycle_multiset(t));
        CHECK(clock_total == t.cycle_nodes);
        CHECK(tree_total == edges.size());
        std::vector<std::uint64_t> leaders;
        for (const auto& c : cycles) leaders.push_back(c.leader.bits);
        CHECK(std::is_sorted(leaders.begin(), leaders.end()));
        fs::remove(in);
        fs::remove(out);
    }
}

TEST_CASE("segment tracing matches the oracle") {
    const auto spec = CipherSpec::mini567();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    const auto& t = mini567_truth();
    std::vector<std::uint64_t> levels;
    for (std::size_t i = 0; i < t.candidates.size(); ++i) {
        const auto s = trace_segment(t.candidates[i], spec, params, table, 1 << 20);
        CHECK_FALSE(s.censored);
        CHECK(s.depth == t.segment_depth[i]);
        CHECK(s.nodes == t.segment_size[i]);
        if (levels.size() < s.level_counts.size()) levels.resize(s.level_counts.size());
        for (std::size_t d = 0; d < s.level_counts.size(); ++d) levels[d] += s.level_counts[d];
    }
    CHECK(levels == t.level_totals);

    const auto deep = std::max_element(t.segment_depth.begin(), t.segment_depth.end()) - t.segment_depth.begin();
    const auto capped = trace_segment(t.candidates[deep], spec, params, table, 3);
    CHECK(capped.censored);
    CHECK(capped.depth == 3);
    CHECK(capped.level_counts.size() == 4);
}

TEST_CASE("depth limit selection") {
    const auto spec = CipherSpec::mini567();  // L = 169.33
    auto shape = [](std::uint64_t depth, bool censored = false) {
        SegmentShape s;
        s.depth = depth;
        s.censored = censored;
        return s;
    };
    // All shallow at depth 5: limit 5 removes everything.
    std::vector<SegmentShape> shallow(10, shape(5));
    CHECK(choose_depth_limit(shallow, spec) == 5);
    // Half are censored: D = 5 costs 5 + 0.5 L < 0.5 L + ... still best.
    std::vector<SegmentShape> mixed{shape(5), shape(5), shape(0, true), shape(0, true)};
    CHECK(choose_depth_limit(mixed, spec) == 5);
    // A rare deep segment is not worth chasing: D = 2 beats D = 120.
    std::vector<SegmentShape> skew(99, shape(2));
    skew.push_back(shape(120));
    CHECK(choose_depth_limit(skew, spec) == 2);
    // Depths above the spacing bound are never chosen.
    std::vector<SegmentShape> too_deep(10, shape(500));
    CHECK(choose_depth_limit(too_deep, spec) == 0);
    CHECK_THROWS_AS(choose_depth_limit(std::vector<SegmentShape>{}, spec), ConfigError);
}
