#include "a5cycle/verify.hpp"

#include <algorithm>
#include <random>
#include <string>

namespace a5cycle {

namespace fs = std::filesystem;

CycleMultiset cycle_multiset(const std::vector<CycleRecord>& cycles) {
    CycleMultiset m;
    m.reserve(cycles.size());
    for (const auto& c : cycles) m.emplace_back(c.hop_count, c.clock_length);
    std::sort(m.begin(), m.end());
    return m;
}

CycleMultiset cycle_multiset(const GroundTruth& truth) {
    CycleMultiset m;
    m.reserve(truth.cycles.size());
    for (const auto& c : truth.cycles) m.emplace_back(c.candidates, c.length);
    std::sort(m.begin(), m.end());
    return m;
}

VerifyReport verify_pipeline(const CipherSpec& spec, const CandidateParams& params, const VerifyConfig& config,
                             const GroundTruth& truth) {
    config.prune.validate(spec);
    config.reduce.validate();
    const auto table = PredecessorTable::build();
    VerifyReport r;

    const auto candidates = enumerate_candidates(spec, params, table);
    r.candidates = candidates.size();
    const auto pruned = prune_shallow_segments(candidates, config.prune, spec, params, table);
    r.prune = pruned.stats;

    ForwardOptions fo = config.forward;
    if (fo.stride == 0) fo.stride = default_stride(spec, params);
    const auto edges = build_skeleton_edges(pruned.skeleton, params, spec, table, fo, &r.edges);
    r.max_tree_height = max_tree_height(edges);

    // Unique names so concurrent verifications can share a scratch directory.
    const auto tag = std::to_string(std::random_device{}());
    fs::create_directories(config.reduce.scratch);
    const fs::path in = config.reduce.scratch / ("verify-edges-" + tag + ".bin");
    const fs::path out = config.reduce.scratch / ("verify-cycles-" + tag + ".bin");
    struct Cleanup {
        fs::path a, b;
        ~Cleanup() {
            std::error_code ec;
            fs::remove(a, ec);
            fs::remove(b, ec);
        }
    } cleanup{in, out};

    write_records<EdgeCodec>(in, edges);
    const auto fix = cut_leaves_to_fixpoint(in, out, config.reduce);
    r.iterations = fix.log.iterations();
    const auto cycles = count_cycles(out);

    r.pipeline_cycles = cycle_multiset(cycles);
    for (const auto& c : cycles) r.pipeline_clock_total += c.clock_length;
    r.oracle_cycles = cycle_multiset(truth);
    r.oracle_cycle_nodes = truth.cycle_nodes;
    r.oracle_components = truth.cycles.size();
    return r;
}

}  // namespace a5cycle
