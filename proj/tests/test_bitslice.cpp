#include <doctest.h>

#include <vector>

#include "a5cycle/bitslice.hpp"
#include "a5cycle/sampling.hpp"

using namespace a5cycle;

namespace {

std::vector<State> random_states(const CipherSpec& spec, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<State> out(n);
    for (auto& s : out) s = random_valid_state(rng, spec);
    return out;
}

}  // namespace

TEST_CASE("transpose round trip") {
    const auto spec = CipherSpec::a51();
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = rng() % 65;
        const auto states = random_states(spec, n, rng());
        REQUIRE(untranspose(transpose(states, spec)) == states);
    }
    const std::vector<State> too_many(65, make_state(spec, 1, 1, 1));
    CHECK_THROWS_AS(transpose(too_many, spec), ConfigError);
}

TEST_CASE("transpose layout") {
    const auto spec = CipherSpec::a51();
    SUBCASE("constant columns") {
        const std::vector<State> same(64, make_state(spec, 0x5A5A5, 0x3C3C3C, 0x123456));
        const auto b = transpose(same, spec);
        for (unsigned i = 0; i < 64; ++i) {
            const bool bit = (same[0].bits >> i) & 1u;
            CHECK(b.words[i] == (bit ? ~std::uint64_t{0} : 0));
        }
    }
    SUBCASE("permutation pattern") {
        std::vector<State> diag(64);
        for (unsigned j = 0; j < 64; ++j) diag[j] = State{std::uint64_t{1} << j};
        const auto b = transpose(diag, spec);
        for (unsigned i = 0; i < 64; ++i) CHECK(b.words[i] == (std::uint64_t{1} << i));
    }
    SUBCASE("filler lanes") {
        const std::vector<State> one{make_state(spec, 3, 5, 7)};
        auto b = transpose(one, spec);
        b.lane_count = 64;
        const auto lanes = untranspose(b);
        for (std::size_t j = 1; j < 64; ++j) CHECK(lanes[j] == make_state(spec, 1, 1, 1));
    }
}

TEST_CASE("sliced clocking equals scalar clocking") {
    const auto spec = CipherSpec::a51();
    SUBCASE("t = 0 is the identity") {
        const auto b = transpose(random_states(spec, 64, 4), spec);
        CHECK(clock_sliced(b, spec, 0) == b);
    }
    SUBCASE("single lane, t = 1..100") {
        const auto start = random_states(spec, 1, 5);
        auto b = transpose(start, spec);
        State x = start[0];
        for (int t = 1; t <= 100; ++t) {
            b = clock_sliced(b, spec, 1);
            x = clock_forward(x, spec);
            REQUIRE(untranspose(b)[0] == x);
        }
    }
    SUBCASE("mini ciphers") {
        for (const auto& mini : {CipherSpec::mini567(), CipherSpec::mini789()}) {
            const auto states = random_states(mini, 64, 6);
            const auto out = untranspose(clock_sliced(transpose(states, mini), mini, 777));
            for (std::size_t j = 0; j < states.size(); ++j) REQUIRE(out[j] == clock_forward(states[j], mini, 777));
        }
    }
}

TEST_CASE("forwardToCandidate on mini567 matches scalar walking") {
    const auto spec = CipherSpec::mini567();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    std::vector<State> candidates;
    std::vector<State> everything;
    for (std::uint64_t r = 0; r < spec.node_count(); ++r) {
        const State x = state_unrank(r, spec);
        everything.push_back(x);
        if (is_candidate(x, params, spec, table)) candidates.push_back(x);
    }
    REQUIRE(!candidates.empty());
    const std::uint64_t cap = default_distance_cap(spec);

    std::vector<ForwardResult> expected;
    for (State c : candidates) expected.push_back(walk_to_candidate(c, params, spec, table, cap));
    for (const auto& r : expected) {
        CHECK(r.distance >= minimum_candidate_spacing(spec));
        CHECK(is_candidate(r.destination, params, spec, table));
    }

    for (std::uint64_t stride : {std::uint64_t{1}, std::uint64_t{50}, default_stride(spec, params)}) {
        for (auto finish : {FinishMode::scalar, FinishMode::sliced}) {
            ForwardOptions opts;
            opts.stride = stride;
            opts.finish = finish;
            CAPTURE(stride);
            CHECK(forward_to_candidate(candidates, params, spec, table, opts) == expected);
        }
    }

    // Arbitrary starts, stride 1.
    std::vector<ForwardResult> all_expected;
    for (State x : everything) all_expected.push_back(walk_to_candidate(x, params, spec, table, cap));
    ForwardOptions opts;
    opts.finish = FinishMode::sliced;
    CHECK(forward_to_candidate(everything, params, spec, table, opts) == all_expected);
    opts.finish = FinishMode::scalar;
    opts.workers = 3;
    CHECK(forward_to_candidate(everything, params, spec, table, opts) == all_expected);
}

TEST_CASE("stride overshoot and distance cap are diagnosed") {
    const auto spec = CipherSpec::mini567();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    Rng rng(8);
    std::vector<State> cands(10);
    for (auto& c : cands) c = random_candidate(rng, spec, params, table);
    ForwardOptions opts;
    opts.stride = 3 * minimum_candidate_spacing(spec);
    CHECK_THROWS_AS(forward_to_candidate(cands, params, spec, table, opts), StrideOvershoot);

    opts.stride = 1;
    opts.distance_cap = 10;
    CHECK_THROWS_AS(forward_to_candidate(cands, params, spec, table, opts), DistanceCapExceeded);
    opts.finish = FinishMode::sliced;
    CHECK_THROWS_AS(forward_to_candidate(cands, params, spec, table, opts), DistanceCapExceeded);
    CHECK_THROWS_AS(walk_to_candidate(cands[0], params, spec, table, 10), DistanceCapExceeded);
}

TEST_CASE("stride calibration") {
    const auto spec = CipherSpec::mini789();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    const auto cal = calibrate_stride(spec, params, table, 2000, 99);
    CHECK(cal.min_distance >= minimum_candidate_spacing(spec));
    CHECK(cal.stride <= cal.min_distance);
    CHECK(cal.stride >= minimum_candidate_spacing(spec));
    CHECK(cal.max_distance >= cal.min_distance);
}

TEST_CASE("A5/1 default stride is safe for sampled candidates") {
    const auto spec = CipherSpec::a51();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    CHECK(default_stride(spec, params) == 11170000);
    Rng rng(77);
    std::vector<State> cands(16);
    for (auto& c : cands) c = random_candidate(rng, spec, params, table);
    ForwardOptions opts;
    opts.stride = default_stride(spec, params);
    const auto results = forward_to_candidate(cands, params, spec, table, opts);
    for (const auto& r : results) {
        CHECK(is_candidate(r.destination, params, spec, table));
        CHECK(r.distance > opts.stride);
        CHECK(r.distance < default_distance_cap(spec));
    }
}
