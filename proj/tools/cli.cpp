#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "a5cycle/bitslice.hpp"
#include "a5cycle/oracle.hpp"
#include "a5cycle/pipeline.hpp"
#include "a5cycle/reduce.hpp"
#include "a5cycle/sampling.hpp"
#include "a5cycle/stats.hpp"
#include "a5cycle/verify.hpp"
#include "manifest.hpp"

namespace a5cycle::cli {

namespace fs = std::filesystem;

namespace {

class Mismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Flags {
    std::string spec, fixed_r3, depth_limit, node_limit, stride, mem_budget, scratch, seed, workers, out;
};

struct SampleFlags {
    std::uint64_t walks = 1000;
    std::uint64_t shapes = 10000;
    std::uint64_t depth_cap = 4096;
    std::uint64_t fractions = 1000000;
};

std::uint64_t parse_u64(const std::string& flag, const std::string& text) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(text, &used, 0);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-')
        throw ConfigError(flag + ": expected a non-negative integer, got '" + text + "'");
    return v;
}

// "4096", "64K", "256M", "1G" (binary units).
std::uint64_t parse_bytes(const std::string& flag, std::string text) {
    std::uint64_t unit = 1;
    if (!text.empty()) {
        switch (std::toupper(static_cast<unsigned char>(text.back()))) {
            case 'K': unit = 1ull << 10; break;
            case 'M': unit = 1ull << 20; break;
            case 'G': unit = 1ull << 30; break;
            default: break;
        }
        if (unit != 1) text.pop_back();
    }
    return parse_u64(flag, text) * unit;
}

std::string hex(std::uint64_t v) {
    std::ostringstream s;
    s << "0x" << std::hex << v;
    return s.str();
}

struct Context {
    Context(std::ostream& o, std::ostream& e) : out(o), err(e) {}

    std::ostream& out;
    std::ostream& err;
    CipherSpec spec;
    CandidateParams params;
    PruneConfig prune;
    bool auto_depth = false;
    std::uint64_t stride = 0;
    bool auto_stride = true;
    ReduceConfig reduce;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::unique_ptr<RunManifest> manifest;  // null for commands run without --out
};

// Flag, else the manifest's recorded value, else the default.
std::string pick(const std::string& flag, const json& settings, const char* key, const std::string& fallback) {
    if (!flag.empty()) return flag;
    if (settings.contains(key)) return settings[key].get<std::string>();
    return fallback;
}

Context resolve(const Flags& f, bool needs_run_dir, std::ostream& out, std::ostream& err) {
    Context c(out, err);
    if (needs_run_dir || !f.out.empty()) {
        const fs::path dir = f.out.empty() ? "a5cycle-run" : f.out;
        fs::create_directories(dir);
        c.manifest = std::make_unique<RunManifest>(dir);
    }
    json empty = json::object();
    json& s = c.manifest ? c.manifest->settings() : empty;

    if (!f.spec.empty()) {
        c.spec = load_cipher_spec(f.spec);
        s["spec"] = f.spec;
        s["spec_text"] = format_cipher_spec(c.spec);
    } else if (s.contains("spec_text")) {
        c.spec = parse_cipher_spec(s["spec_text"].get<std::string>());
    } else {
        c.spec = CipherSpec::a51();
        s["spec"] = "a51";
        s["spec_text"] = format_cipher_spec(c.spec);
    }

    const std::string fixed = pick(f.fixed_r3, s, "fixed_r3", "auto");
    c.params = fixed == "auto" ? CandidateParams::default_for(c.spec)
                               : CandidateParams::make(c.spec, parse_u64("--fixed-r3", fixed.rfind("0x", 0) == 0 ? fixed : "0x" + fixed));
    s["fixed_r3"] = fixed;

    // Prune mode follows whichever limit was given last on the command line or in the manifest.
    if (!f.depth_limit.empty() && !f.node_limit.empty())
        throw ConfigError("--depth-limit and --node-limit select different prune modes; give one");
    std::string depth = pick(f.depth_limit, s, "depth_limit", "auto");
    std::string nodes = pick(f.node_limit, s, "node_limit", "");
    if (!f.depth_limit.empty()) nodes.clear();
    if (!f.node_limit.empty()) depth = "auto";
    if (!nodes.empty()) {
        c.prune.mode = PruneMode::bfs_nodes;
        c.prune.node_limit = parse_u64("--node-limit", nodes);
        s["node_limit"] = nodes;
        s.erase("depth_limit");
    } else {
        c.prune.mode = PruneMode::dfs_depth;
        c.auto_depth = depth == "auto";
        if (!c.auto_depth) c.prune.depth_limit = parse_u64("--depth-limit", depth);
        s["depth_limit"] = depth;
        s.erase("node_limit");
    }

    const std::string stride = pick(f.stride, s, "stride", "auto");
    c.auto_stride = stride == "auto";
    c.stride = c.auto_stride ? default_stride(c.spec, c.params) : parse_u64("--stride", stride);
    if (c.stride == 0) throw ConfigError("--stride must be positive");
    s["stride"] = stride;

    const std::string budget = pick(f.mem_budget, s, "mem_budget", "256M");
    c.reduce.memory_budget = parse_bytes("--mem-budget", budget);
    s["mem_budget"] = budget;
    const fs::path default_scratch = c.manifest ? c.manifest->dir() / "scratch" : fs::temp_directory_path();
    c.reduce.scratch = pick(f.scratch, s, "scratch", default_scratch.string());
    s["scratch"] = c.reduce.scratch.string();
    c.reduce.validate();

    const std::string seed = pick(f.seed, s, "seed", "1");
    c.seed = parse_u64("--seed", seed);
    s["seed"] = seed;

    c.workers = f.workers.empty() ? std::max(1u, std::thread::hardware_concurrency())
                                  : static_cast<unsigned>(std::max<std::uint64_t>(1, parse_u64("--workers", f.workers)));
    c.prune.workers = c.workers;
    if (!c.auto_depth || c.prune.mode == PruneMode::bfs_nodes) c.prune.validate(c.spec);
    return c;
}

ForwardOptions forward_options(const Context& c) {
    ForwardOptions fo;
    fo.stride = c.stride;
    fo.workers = c.workers;
    return fo;
}

// Stage configs chain, so a consumer can check its producer ran with the current settings.
json base_config(const Context& c) {
    return {{"spec", format_cipher_spec(c.spec)}, {"fixed_r3", hex(c.params.fixed_r3)}};
}

json prune_config(const Context& c) {
    json j = base_config(c);
    if (c.prune.mode == PruneMode::bfs_nodes)
        j["prune"] = {{"mode", "bfs"}, {"node_limit", c.prune.node_limit}};
    else if (c.auto_depth)
        j["prune"] = {{"mode", "dfs"}, {"depth_limit", "auto"}, {"seed", c.seed}};
    else
        j["prune"] = {{"mode", "dfs"}, {"depth_limit", c.prune.depth_limit}};
    return j;
}

json edges_config(const Context& c) {
    json j = prune_config(c);
    j["stride"] = c.stride;
    return j;
}

bool up_to_date(Context& c, const std::string& stage, const json& config) {
    if (!c.manifest->up_to_date(stage, config)) return false;
    c.err << stage << ": up to date, nothing to do\n";
    return true;
}

void print_summary(Context& c, const std::string& stage) {
    c.out << stage << ": " << c.manifest->stage(stage)->at("summary").dump() << '\n';
}

void finish(Context& c, const std::string& stage, const json& config, const std::map<std::string, std::string>& inputs,
            const std::vector<std::string>& outputs, const json& summary) {
    c.manifest->record(stage, config, inputs, outputs, summary);
    c.manifest->save();
    print_summary(c, stage);
}

void write_json(const fs::path& path, const json& j) {
    std::ofstream o(path);
    o << j.dump(2) << '\n';
    if (!o) throw IoError("cannot write " + path.string());
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream o(path);
    if (!o) throw IoError("cannot write " + path.string());
    return o;
}

// Depth limit from sampled segment depths.
std::uint64_t auto_depth_limit(const Context& c, const PredecessorTable& table) {
    const std::uint64_t cap = std::min<std::uint64_t>(max_depth_limit(c.spec), 4096);
    Rng rng(c.seed);
    std::vector<SegmentShape> shapes;
    for (int i = 0; i < 2000; ++i)
        shapes.push_back(trace_segment(random_candidate(rng, c.spec, c.params, table), c.spec, c.params, table, cap));
    return choose_depth_limit(shapes, c.spec);
}

int cmd_candidates(Context& c) {
    const json cfg = base_config(c);
    if (up_to_date(c, "candidates", cfg)) return print_summary(c, "candidates"), kOk;
    const auto table = PredecessorTable::build();
    c.err << "candidates: enumerating " << c.spec.name() << " with fixedR3 " << hex(c.params.fixed_r3) << '\n';
    std::uint64_t count = 0;
    {
        RecordWriter<StateCodec> w(c.manifest->file("candidates.bin"));
        for_each_candidate(c.spec, c.params, table, [&](State s) {
            w.write(s);
            ++count;
        });
        w.close();
    }
    const double slice = static_cast<double>(c.spec.register_period(0) * c.spec.register_period(1));
    finish(c, "candidates", cfg, {}, {"candidates.bin"},
           {{"candidates", count}, {"fixed_r3_states", c.spec.register_period(0) * c.spec.register_period(1)},
            {"fraction", static_cast<double>(count) / slice}});
    return kOk;
}

int cmd_prune(Context& c) {
    const json cfg = prune_config(c);
    if (up_to_date(c, "prune", cfg)) return print_summary(c, "prune"), kOk;
    const std::string in = c.manifest->consume("candidates", base_config(c), "candidates.bin");
    const auto table = PredecessorTable::build();
    PruneConfig pc = c.prune;
    if (c.auto_depth && pc.mode == PruneMode::dfs_depth) {
        pc.depth_limit = auto_depth_limit(c, table);
        c.err << "prune: chose depth limit " << pc.depth_limit << '\n';
    }
    pc.validate(c.spec);
    const auto candidates = read_skeleton(c.manifest->file("candidates.bin"));
    c.err << "prune: " << candidates.size() << " candidates\n";
    const auto r = prune_shallow_segments(candidates, pc, c.spec, c.params, table);
    write_skeleton(c.manifest->file("skeleton.bin"), r.skeleton);
    finish(c, "prune", cfg, {{"candidates.bin", in}}, {"skeleton.bin"},
           {{"mode", pc.mode == PruneMode::bfs_nodes ? "bfs" : "dfs"},
            {"limit", pc.mode == PruneMode::bfs_nodes ? pc.node_limit : pc.depth_limit},
            {"candidates", r.stats.candidates},
            {"removed", r.stats.removed},
            {"survivors", r.stats.survivors},
            {"removed_fraction", r.stats.removed_fraction()},
            {"traversal_work", r.stats.traversal_work},
            {"kept_by_guard", r.stats.kept_by_guard}});
    return kOk;
}

int cmd_edges(Context& c) {
    const json cfg = edges_config(c);
    if (up_to_date(c, "edges", cfg)) return print_summary(c, "edges"), kOk;
    const std::string in = c.manifest->consume("prune", prune_config(c), "skeleton.bin");
    const auto table = PredecessorTable::build();
    const auto skeleton = read_skeleton(c.manifest->file("skeleton.bin"));
    c.err << "edges: walking " << skeleton.size() << " skeleton nodes, stride " << c.stride << '\n';
    EdgeStats es;
    const auto edges = build_skeleton_edges(skeleton, c.params, c.spec, table, forward_options(c), &es);
    write_records<EdgeCodec>(c.manifest->file("edges.bin"), edges);
    finish(c, "edges", cfg, {{"skeleton.bin", in}}, {"edges.bin"},
           {{"edges", es.edges}, {"clocks", es.clocks}, {"stride", c.stride}});
    return kOk;
}

int cmd_reduce(Context& c) {
    const json cfg = edges_config(c);
    if (up_to_date(c, "reduce", cfg)) return print_summary(c, "reduce"), kOk;
    const std::string in = c.manifest->consume("edges", edges_config(c), "edges.bin");
    fs::create_directories(c.reduce.scratch);
    const auto fix = cut_leaves_to_fixpoint(c.manifest->file("edges.bin"), c.manifest->file("cycles.bin"), c.reduce,
                                            [&](const PassStats& p) {
                                                c.err << "reduce: pass " << p.iteration << " removed "
                                                      << p.leaves_removed << ", " << p.remaining << " left\n";
                                            });
    {
        auto o = open_out(c.manifest->file("iterations.csv"));
        fix.log.write_csv(o);
    }
    finish(c, "reduce", cfg, {{"edges.bin", in}}, {"cycles.bin", "iterations.csv"},
           {{"iterations", fix.log.iterations()},
            {"original_records", fix.original_records},
            {"remaining_records", fix.remaining_records}});
    return kOk;
}

int cmd_count(Context& c) {
    const json cfg = edges_config(c);
    if (up_to_date(c, "count", cfg)) return print_summary(c, "count"), kOk;
    const std::string in = c.manifest->consume("reduce", edges_config(c), "cycles.bin");
    const auto cycles = count_cycles(c.manifest->file("cycles.bin"));
    {
        auto o = open_out(c.manifest->file("cycles.csv"));
        write_cycles_csv(o, cycles);
    }
    std::uint64_t clock_total = 0, largest = 0, deepest = 0;
    for (const auto& cy : cycles) {
        clock_total += cy.clock_length;
        largest = std::max(largest, cy.clock_length);
        deepest = std::max(deepest, cy.max_tree_depth);
    }
    const json summary = {{"components", cycles.size()},
                          {"largest_cycle", largest},
                          {"cycle_nodes", clock_total},
                          {"max_tree_depth", deepest}};
    write_json(c.manifest->file("count.json"), summary);
    finish(c, "count", cfg, {{"cycles.bin", in}}, {"cycles.csv", "count.json"}, summary);
    return kOk;
}

// Longest walk (in states) from any node to its cycle.
std::uint64_t max_tail_length(const std::vector<std::uint32_t>& succ) {
    std::vector<std::uint32_t> indeg(succ.size(), 0);
    for (auto s : succ) ++indeg[s];
    std::vector<std::uint32_t> height(succ.size(), 0), stack;
    for (std::uint32_t v = 0; v < succ.size(); ++v)
        if (indeg[v] == 0) stack.push_back(v);
    std::uint64_t best = 0;
    while (!stack.empty()) {
        const std::uint32_t v = stack.back();
        stack.pop_back();
        const std::uint32_t w = succ[v];
        height[w] = std::max(height[w], height[v] + 1);
        best = std::max<std::uint64_t>(best, height[w]);
        if (--indeg[w] == 0) stack.push_back(w);
    }
    return best;
}

json oracle_summary(const GroundTruth& t) {
    std::uint64_t largest_cycle = 0, largest_component = 0;
    for (const auto& cy : t.cycles) {
        largest_cycle = std::max(largest_cycle, cy.length);
        largest_component = std::max(largest_component, cy.component_size);
    }
    const std::uint64_t max_depth = t.max_segment_depth();
    double per_level = 0;
    if (max_depth > 0 && !t.candidates.empty()) {
        CompensatedSum s;
        for (std::uint64_t d = 1; d <= max_depth; ++d) s.add(static_cast<double>(t.level_totals[d]));
        per_level = s.value() / (static_cast<double>(t.candidates.size()) * static_cast<double>(max_depth));
    }
    return {{"nodes", t.node_count},
            {"components", t.cycles.size()},
            {"largest_cycle", largest_cycle},
            {"largest_component", largest_component},
            {"max_tail", max_tail_length(t.successor)},
            {"max_segment_depth", max_depth},
            {"leaves", t.leaf_count},
            {"leaf_fraction", static_cast<double>(t.leaf_count) / static_cast<double>(t.node_count)},
            {"cycle_nodes", t.cycle_nodes},
            {"candidates", t.candidates.size()},
            {"nodes_per_level", per_level}};
}

GroundTruth run_oracle(Context& c) {
    c.err << "oracle: brute force over " << c.spec.node_count() << " states\n";
    OracleOptions oo;
    oo.workers = c.workers;
    return brute_force_analysis(c.spec, c.params, oo);
}

int cmd_oracle(Context& c) {
    const json cfg = base_config(c);
    if (up_to_date(c, "oracle", cfg)) return print_summary(c, "oracle"), kOk;
    const auto t = run_oracle(c);
    {
        auto o = open_out(c.manifest->file("oracle_summary.csv"));
        write_ground_truth_csv(o, t);
        auto o2 = open_out(c.manifest->file("oracle_cycles.csv"));
        write_oracle_cycles_csv(o2, t);
    }
    const json summary = oracle_summary(t);
    write_json(c.manifest->file("oracle.json"), summary);
    finish(c, "oracle", cfg, {}, {"oracle_summary.csv", "oracle_cycles.csv", "oracle.json"}, summary);
    return kOk;
}

json optional_json(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }

int cmd_sample(Context& c, const SampleFlags& sf) {
    json cfg = base_config(c);
    cfg["sample"] = {{"seed", c.seed},
                     {"walks", sf.walks},
                     {"shapes", sf.shapes},
                     {"depth_cap", sf.depth_cap},
                     {"fractions", sf.fractions},
                     {"stride", c.stride}};
    if (up_to_date(c, "sample", cfg)) return print_summary(c, "sample"), kOk;
    const auto table = PredecessorTable::build();

    // Independent streams per statistic, all derived from the run seed.
    std::seed_seq seq{c.seed};
    std::array<std::uint64_t, 4> seeds{};
    {
        std::array<std::uint32_t, 8> words{};
        seq.generate(words.begin(), words.end());
        for (int i = 0; i < 4; ++i) seeds[i] = (std::uint64_t{words[2 * i]} << 32) | words[2 * i + 1];
    }

    c.err << "sample: " << sf.fractions << " states for leaf and candidate fractions\n";
    const auto leaves = sample_leaf_fraction(c.spec, table, sf.fractions, seeds[0]);
    const auto cands = sample_candidate_fraction(c.spec, c.params, table, sf.fractions, seeds[1]);

    json summary = {{"leaf_fraction", leaves.value()}, {"candidate_fraction", cands.value()}};
    std::vector<std::string> outputs;
    if (sf.walks > 0) {
        c.err << "sample: " << sf.walks << " two-leg distance walks\n";
        SampleOptions so;
        so.workers = c.workers;
        so.stride = c.stride;
        const auto d = sample_segment_distances(c.spec, c.params, table, sf.walks, seeds[2], so);
        auto o = open_out(c.manifest->file("distances.csv"));
        o << "distance,count\n";
        for (const auto& [dist, n] : d.histogram) o << dist << ',' << n << '\n';
        outputs.push_back("distances.csv");
        summary["distance"] = {{"walks", d.sample_size}, {"mean", d.mean}, {"stddev", d.stddev},
                               {"min", d.min},           {"max", d.max}};
    }
    if (sf.shapes > 0) {
        c.err << "sample: " << sf.shapes << " segment shapes, depth cap " << sf.depth_cap << '\n';
        const auto s = sample_segment_shapes(c.spec, c.params, table, sf.shapes, seeds[3], sf.depth_cap, c.workers);
        {
            auto o = open_out(c.manifest->file("depths.csv"));
            o << "sample,depth,censored\n";
            for (std::size_t i = 0; i < s.depths.size(); ++i)
                o << i << ',' << s.depths[i] << ',' << (s.censored[i] ? 1 : 0) << '\n';
            auto o2 = open_out(c.manifest->file("levels.csv"));
            o2 << "level,unconditioned,conditioned,reached\n";
            const auto u = s.unconditioned_curve();
            const auto cond = s.conditioned_curve();
            for (std::size_t d = 0; d < u.size(); ++d)
                o2 << d << ',' << std::setprecision(10) << u[d] << ',' << cond[d] << ',' << s.reached[d] << '\n';
        }
        outputs.push_back("depths.csv");
        outputs.push_back("levels.csv");
        summary["depth"] = {{"samples", s.sample_size},
                            {"cap", s.depth_cap},
                            {"censored", s.censored_count()},
                            {"q50", optional_json(s.depth_quantile(0.5))},
                            {"q90", optional_json(s.depth_quantile(0.9))},
                            {"q99", optional_json(s.depth_quantile(0.99))},
                            {"nodes_per_level", s.mean_nodes_per_level(sf.depth_cap)}};
    }
    write_json(c.manifest->file("sample.json"), summary);
    outputs.push_back("sample.json");
    finish(c, "sample", cfg, {}, outputs, summary);
    return kOk;
}

std::vector<std::string> verify_lines(const CipherSpec& spec, const VerifyReport& r) {
    auto multiset_text = [](const CycleMultiset& m) {
        std::ostringstream s;
        for (std::size_t i = 0; i < m.size(); ++i) s << (i ? " " : "") << m[i].first << '/' << m[i].second;
        return s.str();
    };
    std::vector<std::string> lines;
    auto add = [&](const std::ostringstream& s) { lines.push_back(s.str()); };
    std::ostringstream a, b, d, e, f, g, h;
    a << "spec: " << spec.name() << " (" << spec.node_count() << " states)";
    add(a);
    b << "candidates: " << r.candidates << ", skeleton " << r.prune.survivors << " (" << format_percent(r.prune.removed_fraction())
      << " pruned)";
    add(b);
    d << "edges: " << r.edges.edges << ", " << r.edges.clocks << " clocks";
    add(d);
    e << "iterations: " << r.iterations << ", max tree height " << r.max_tree_height
      << (r.iterations_match() ? "" : " (MISMATCH)");
    add(e);
    f << "components: pipeline " << r.pipeline_cycles.size() << ", oracle " << r.oracle_components
      << (r.components_match() ? "" : " (MISMATCH)");
    add(f);
    g << "cycle states: pipeline " << r.pipeline_clock_total << ", oracle " << r.oracle_cycle_nodes
      << (r.clock_total_match() ? "" : " (MISMATCH)");
    add(g);
    h << "cycles (hops/clocks): " << multiset_text(r.pipeline_cycles);
    add(h);
    if (!r.cycles_match()) lines.push_back("oracle cycles (hops/clocks): " + multiset_text(r.oracle_cycles));
    lines.push_back(r.ok() ? "cycles: MATCH" : "cycles: MISMATCH");
    return lines;
}

int cmd_verify(Context& c) {
    json cfg = edges_config(c);
    if (c.manifest && c.manifest->up_to_date("verify", cfg)) {
        c.err << "verify: up to date, nothing to do\n";
        const auto& s = c.manifest->stage("verify")->at("summary");
        for (const auto& l : s.at("lines")) c.out << l.get<std::string>() << '\n';
        if (!s.at("ok").get<bool>()) throw Mismatch("pipeline differs from the oracle");
        return kOk;
    }
    const auto table = PredecessorTable::build();
    VerifyConfig vc;
    vc.prune = c.prune;
    if (c.auto_depth && vc.prune.mode == PruneMode::dfs_depth) {
        vc.prune.depth_limit = auto_depth_limit(c, table);
        c.err << "verify: chose depth limit " << vc.prune.depth_limit << '\n';
    }
    vc.forward = forward_options(c);
    vc.reduce = c.reduce;
    const auto truth = run_oracle(c);
    c.err << "verify: running the pipeline\n";
    const auto r = verify_pipeline(c.spec, c.params, vc, truth);
    const auto lines = verify_lines(c.spec, r);
    for (const auto& l : lines) c.out << l << '\n';
    if (c.manifest) {
        c.manifest->record("verify", cfg, {}, {}, {{"ok", r.ok()}, {"lines", lines}});
        c.manifest->save();
    }
    if (!r.ok()) throw Mismatch("pipeline differs from the oracle");
    return kOk;
}

int cmd_selftest(Context& c) {
    bool ok = true;
    auto line = [&](bool pass, const std::string& text) {
        c.out << (pass ? "PASS " : "FAIL ") << text << '\n';
        ok = ok && pass;
    };
    const auto table = PredecessorTable::build();
    line(table.empty_entries() == 24 && table.total_patterns() == 64,
         "predecessor table: " + std::to_string(table.empty_entries()) + "/64 empty entries, " +
             std::to_string(table.total_patterns()) + " patterns");

    Rng rng(c.seed);
    std::uint64_t failures = 0;
    const std::uint64_t inverse_checks = 100000;
    for (std::uint64_t i = 0; i < inverse_checks; ++i) {
        const State x = random_valid_state(rng, c.spec);
        for (State p : predecessors(x, c.spec, table))
            if (clock_forward(p, c.spec) != x) ++failures;
        const auto back = predecessors(clock_forward(x, c.spec), c.spec, table);
        if (std::find(back.begin(), back.end(), x) == back.end()) ++failures;
    }
    line(failures == 0, "inverse clocking: " + std::to_string(inverse_checks) + " states, " +
                            std::to_string(failures) + " failures");

    std::vector<State> lanes(kSliceLanes);
    for (auto& s : lanes) s = random_valid_state(rng, c.spec);
    const std::uint64_t clocks = 1000;
    const auto sliced = untranspose(clock_sliced(transpose(lanes, c.spec), c.spec, clocks));
    std::uint64_t diffs = 0;
    for (std::size_t i = 0; i < lanes.size(); ++i)
        if (sliced[i] != clock_forward(lanes[i], c.spec, clocks)) ++diffs;
    line(diffs == 0, "bitslice: " + std::to_string(lanes.size()) + " lanes x " + std::to_string(clocks) +
                         " clocks, " + std::to_string(diffs) + " differences");

    for (int k = 0; k < kRegisterCount; ++k) {
        const auto got = enumerate_register_period(c.spec.reg(k));
        line(got == c.spec.register_period(k),
             "R" + std::to_string(k + 1) + " period: " + std::to_string(got) + " (expected " +
                 std::to_string(c.spec.register_period(k)) + ")");
    }
    const auto l = minimum_cycle_length(c.spec);
    c.out << "info L = " << l.num << '/' << l.den << ", chain count difference "
          << expected_chain_count(c.spec, 1) - expected_chain_count(c.spec, 0) << '\n';
    if (!ok) throw Mismatch("selftest failed");
    return kOk;
}

AnalysisReport observations_from(const json& oracle, const json& count, const json& sample, double n) {
    AnalysisReport r;
    r.n = n;
    if (!oracle.is_null()) {
        r.label = "oracle";
        r.components = oracle["components"].get<double>();
        r.largest_cycle = oracle["largest_cycle"].get<double>();
        r.largest_component = oracle["largest_component"].get<double>();
        r.max_segment_depth = oracle["max_tail"].get<double>();
        r.leaf_fraction = oracle["leaf_fraction"].get<double>();
        r.cycle_nodes = oracle["cycle_nodes"].get<double>();
        r.nodes_per_level = oracle["nodes_per_level"].get<double>();
        return r;
    }
    if (!count.is_null()) {
        r.label = "pipeline";
        r.components = count["components"].get<double>();
        r.largest_cycle = count["largest_cycle"].get<double>();
        r.cycle_nodes = count["cycle_nodes"].get<double>();
    }
    if (!sample.is_null()) {
        r.label += r.label.empty() ? "sample" : " + sample";
        r.leaf_fraction = sample["leaf_fraction"].get<double>();
        if (sample.contains("depth")) r.nodes_per_level = sample["depth"]["nodes_per_level"].get<double>();
    }
    return r;
}

void print_sample_block(std::ostream& o, const json& sample) {
    o << "\nDesk observations (sampled):\n";
    auto opt = [](const json& j) { return j.is_null() ? std::string("censored") : std::to_string(j.get<std::uint64_t>()); };
    o << "  leaf fraction: " << sample["leaf_fraction"].get<double>() << '\n';
    o << "  candidate fraction on the fixedR3 slice: " << sample["candidate_fraction"].get<double>() << '\n';
    if (sample.contains("distance")) {
        const auto& d = sample["distance"];
        o << "  segment distance over " << d["walks"] << " walks: mean " << std::fixed << std::setprecision(1)
          << d["mean"].get<double>() << ", stddev " << d["stddev"].get<double>() << std::defaultfloat << std::setprecision(6) << '\n';
    }
    if (sample.contains("depth")) {
        const auto& d = sample["depth"];
        o << "  segment depth over " << d["samples"] << " segments (cap " << d["cap"] << ", " << d["censored"]
          << " censored): q50 " << opt(d["q50"]) << ", q90 " << opt(d["q90"]) << ", q99 " << opt(d["q99"]) << '\n';
        o << "  unconditioned nodes per level: " << d["nodes_per_level"].get<double>() << '\n';
    }
}

int cmd_report(Context& c, const std::string& n_arg) {
    double n = static_cast<double>(c.spec.node_count());
    bool a51 = c.spec == CipherSpec::a51();
    if (!n_arg.empty()) {
        try {
            const auto named = CipherSpec::builtin(n_arg);
            n = static_cast<double>(named.node_count());
            a51 = named == CipherSpec::a51();
        } catch (const ConfigError&) {
            std::size_t used = 0;
            try {
                n = std::stod(n_arg, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != n_arg.size()) throw ConfigError("--n: expected a builtin spec name or a number");
            a51 = false;
        }
    }
    const auto expected = random_mapping_expectations(n);

    // Whatever this run directory has observed for the current spec.
    json oracle, count, sample;
    std::map<std::string, std::string> inputs;
    const bool same_graph = static_cast<double>(c.spec.node_count()) == n;
    if (c.manifest && same_graph) {
        auto take = [&](const std::string& stage, const json& cfg, const std::string& file, json& dst) {
            const json* s = c.manifest->stage(stage);
            if (!s || s->at("config") != cfg) return;
            inputs[file] = c.manifest->consume(stage, cfg, file);
            std::ifstream in(c.manifest->file(file));
            dst = json::parse(in);
        };
        take("oracle", base_config(c), "oracle.json", oracle);
        take("count", edges_config(c), "count.json", count);
        json sample_cfg;
        if (const json* s = c.manifest->stage("sample")) sample_cfg = s->at("config");
        if (!sample_cfg.is_null() && sample_cfg["spec"] == base_config(c)["spec"] &&
            sample_cfg["fixed_r3"] == base_config(c)["fixed_r3"])
            take("sample", sample_cfg, "sample.json", sample);
    }

    AnalysisReport observed = (a51 && oracle.is_null() && count.is_null()) ? published_a51_observations()
                                                                            : observations_from(oracle, count, sample, n);
    observed.n = n;
    const auto rows = deviation_report(observed, expected);

    std::ostringstream text;
    text << "Random mapping expectations for n = " << format_power_of_two(n) << " (" << std::setprecision(17) << n
         << std::setprecision(6) << "), observed: " << (observed.label.empty() ? "none" : observed.label) << "\n\n";
    write_report_text(text, rows);
    if (!sample.is_null()) print_sample_block(text, sample);
    if (a51) {
        text << "\nPublished reference values for the full A5/1 graph (not reproducible at desk scale):\n";
        for (const auto& r : published_reference_constants())
            text << "  " << std::left << std::setw(20) << r.name << std::setw(16) << r.value << r.note << '\n';
    }
    c.out << text.str();

    if (c.manifest) {
        json cfg = {{"n", n}, {"a51", a51}, {"sources", json::array()}};
        for (const auto& [file, digest] : inputs) cfg["sources"].push_back(file);
        {
            auto o = open_out(c.manifest->file("report.txt"));
            o << text.str();
            auto o2 = open_out(c.manifest->file("report.csv"));
            write_report_csv(o2, rows);
        }
        c.manifest->record("report", cfg, inputs, {"report.txt", "report.csv"}, {{"rows", rows.size()}});
        c.manifest->save();
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cycle structure analysis of majority-clocked LFSR ciphers", "a5cycle"};
    app.require_subcommand(1);
    Flags f;
    app.add_option("--spec", f.spec, "Builtin spec (a51, mini567, mini789) or spec file")->group("Run");
    app.add_option("--fixed-r3", f.fixed_r3, "Fixed R3 value in hex, or auto")->group("Run");
    app.add_option("--depth-limit", f.depth_limit, "DFS prune depth limit, or auto")->group("Run");
    app.add_option("--node-limit", f.node_limit, "BFS prune node limit (selects BFS pruning)")->group("Run");
    app.add_option("--stride", f.stride, "Bulk stride for candidate walks, or auto")->group("Run");
    app.add_option("--mem-budget", f.mem_budget, "Reduction memory budget (K/M/G suffixes)")->group("Run");
    app.add_option("--scratch", f.scratch, "Scratch directory for sort runs")->group("Run");
    app.add_option("--seed", f.seed, "Seed for every random choice")->group("Run");
    app.add_option("--workers", f.workers, "Worker threads")->group("Run");
    app.add_option("--out", f.out, "Run directory holding artifacts and manifest.json")->group("Run");

    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"oracle", "Brute-force analysis of a small instance"},
        {"candidates", "Enumerate candidates"},
        {"prune", "Remove shallow candidate segments"},
        {"edges", "Walk every skeleton node to its next candidate"},
        {"reduce", "Cut leaves to the fixpoint"},
        {"count", "Count cycles of the reduced graph"},
        {"sample", "Sample fractions, segment distances and shapes"},
        {"report", "Compare against random mapping expectations"},
        {"verify", "Run the pipeline on a small instance and compare with the oracle"},
        {"selftest", "Table, inverse, bitslice and period invariants"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& cmd : commands) {
        auto* s = app.add_subcommand(cmd.name, cmd.help);
        s->fallthrough();
        subs[cmd.name] = s;
    }
    SampleFlags sf;
    subs["sample"]->add_option("--walks", sf.walks, "Two-leg distance walks")->capture_default_str();
    subs["sample"]->add_option("--shapes", sf.shapes, "Segment shapes")->capture_default_str();
    subs["sample"]->add_option("--depth-cap", sf.depth_cap, "Depth cap for shapes")->capture_default_str();
    subs["sample"]->add_option("--fractions", sf.fractions, "States for the fraction estimates")->capture_default_str();
    std::string n_arg;
    subs["report"]->add_option("--n", n_arg, "Graph size: builtin spec name or number of states");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    try {
        const std::string name = app.get_subcommands().front()->get_name();
        const bool ephemeral = name == "verify" || name == "selftest" || name == "report";
        Context c = resolve(f, !ephemeral, out, err);
        if (name == "oracle") return cmd_oracle(c);
        if (name == "candidates") return cmd_candidates(c);
        if (name == "prune") return cmd_prune(c);
        if (name == "edges") return cmd_edges(c);
        if (name == "reduce") return cmd_reduce(c);
        if (name == "count") return cmd_count(c);
        if (name == "sample") return cmd_sample(c, sf);
        if (name == "report") return cmd_report(c, n_arg);
        if (name == "verify") return cmd_verify(c);
        return cmd_selftest(c);
    } catch (const Mismatch& e) {
        err << "error: " << e.what() << '\n';
        return kMismatch;
    } catch (const GraphError& e) {
        err << "graph error: " << e.what() << '\n';
        return kMismatch;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIo;
    }
}

}  // namespace a5cycle::cli
