#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "a5cycle/cipher.hpp"
#include "a5cycle/naive.hpp"
#include "a5cycle/sampling.hpp"

using namespace a5cycle;

namespace {

std::vector<State> all_valid_states(const CipherSpec& spec) {
    std::vector<State> out;
    out.reserve(spec.node_count());
    for (std::uint64_t r = 0; r < spec.node_count(); ++r) out.push_back(state_unrank(r, spec));
    return out;
}

}  // namespace

TEST_CASE("majority clock set") {
    CHECK(majority_clock_set(0, 0, 0) == kClockAll);
    CHECK(majority_clock_set(1, 1, 1) == kClockAll);
    CHECK(majority_clock_set(1, 1, 0) == kClockR1R2);
    CHECK(majority_clock_set(0, 1, 1) == kClockR2R3);
    CHECK(majority_clock_set(1, 0, 1) == kClockR1R3);
    for (unsigned i = 0; i < 8; ++i) {
        const auto n = std::popcount(majority_clock_set(i & 1, i >> 1 & 1, i >> 2 & 1));
        CHECK((n == 2 || n == 3));
    }
}

TEST_CASE("register periods are maximal") {
    for (const auto& spec : {CipherSpec::a51(), CipherSpec::mini567(), CipherSpec::mini789()}) {
        for (int k = 0; k < 3; ++k) {
            CAPTURE(spec.name());
            CAPTURE(k);
            CHECK(enumerate_register_period(spec.reg(k)) == spec.register_period(k));
        }
    }
    const auto a51 = CipherSpec::a51();
    CHECK(enumerate_register_period(a51.reg(0)) == (1u << 19) - 1);
    CHECK(enumerate_register_period(a51.reg(1)) == (1u << 22) - 1);
    CHECK(enumerate_register_period(a51.reg(2)) == (1u << 23) - 1);
}

TEST_CASE("cipher spec validation") {
    CHECK_THROWS_AS(CipherSpec::make("x", {5, 6, 7}, {{{2, 5}, {4, 5}, {3, 6}}}, {2, 3, 3}), ConfigError);
    CHECK_THROWS_AS(CipherSpec::make("x", {5, 6, 7}, {{{2, 3}, {4, 5}, {3, 6}}}, {2, 3, 3}), ConfigError);
    CHECK_THROWS_AS(CipherSpec::make("x", {5, 6, 7}, {{{2, 4}, {4, 5}, {3, 6}}}, {4, 3, 3}), ConfigError);
    CHECK_THROWS_AS(CipherSpec::make("x", {7, 6, 5}, {{{5, 6}, {4, 5}, {2, 4}}}, {2, 3, 3}), ConfigError);
    CHECK_THROWS_AS(CipherSpec::builtin("a52"), ConfigError);

    const auto spec = CipherSpec::a51();
    const auto again = parse_cipher_spec(format_cipher_spec(spec));
    CHECK(again == spec);
    CHECK_THROWS_AS(parse_cipher_spec("lengths = 5 6\nclock = 1 1 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_cipher_spec("lengths = 5 6 7\ntaps1 = 2 4\ntaps2 = 4 5\ntaps3 = 3 x\nclock = 2 3 3\n"),
                    ConfigError);
}

TEST_CASE("clockForward fixed examples") {
    const auto spec = CipherSpec::a51();
    const State ones = make_state(spec, 1, 1, 1);
    const State next = clock_forward(ones, spec);
    CHECK(register_value(next, spec, 0) == 2);
    CHECK(register_value(next, spec, 1) == 2);
    CHECK(register_value(next, spec, 2) == 2);

    Rng rng(7);
    int seen = 0;
    while (seen < 100) {
        const State x = random_valid_state(rng, spec);
        if (clock_set_of(x, spec) != kClockR1R2) continue;
        CHECK(register_value(clock_forward(x, spec), spec, 2) == register_value(x, spec, 2));
        ++seen;
    }
}

TEST_CASE("clockForward matches the per-bit simulator") {
    SUBCASE("mini567 trajectory") {
        const auto spec = CipherSpec::mini567();
        State packed = make_state(spec, 0b10110, 0b100101, 0b1010011);
        naive::Registers regs = naive::unpack(packed, spec);
        for (int i = 0; i < 50; ++i) {
            packed = clock_forward(packed, spec);
            naive::step(regs, spec);
            REQUIRE(packed == naive::pack(regs));
        }
    }
    SUBCASE("random A5/1 states") {
        const auto spec = CipherSpec::a51();
        Rng rng(11);
        for (int i = 0; i < 10000; ++i) {
            const State x = random_valid_state(rng, spec);
            REQUIRE(clock_forward(x, spec) == naive::step(x, spec));
        }
    }
}

TEST_CASE("feedback variants agree") {
    for (const auto& spec : {CipherSpec::a51(), CipherSpec::mini567(), CipherSpec::mini789()}) {
        for (int k = 0; k < 3; ++k) {
            const auto& r = spec.reg(k);
            const MultiplyFeedback mul(r);
            CAPTURE(spec.name());
            CAPTURE(k);
            if (r.taps.size() == 2) CHECK(mul.available());
            const std::uint64_t limit = std::min<std::uint64_t>(r.value_mask, 1u << 16);
            for (std::uint64_t v = 0; v <= limit; ++v) {
                const std::uint64_t ref = feedback_xor_fold(v, r);
                if (mul.available()) REQUIRE(mul(v) == ref);
                REQUIRE(((step_register(v, r)) & 1u) == ref);
            }
            if (!mul.available()) continue;
            Rng rng(k);
            for (int i = 0; i < 10000; ++i) {
                const std::uint64_t v = rng() & r.value_mask;
                REQUIRE(mul(v) == feedback_xor_fold(v, r));
            }
        }
    }
}

TEST_CASE("predecessor table exactness") {
    const auto table = PredecessorTable::build();
    CHECK(table.empty_entries() == 24);
    CHECK(table.total_patterns() == 64);
    const auto zero = table.entry(PredecessorTable::index_of(0, 0, 0, 0, 0, 0));
    CHECK(PredecessorTable::contains(zero, kClockAll));
    CHECK(std::popcount(zero) == 1);

    // Entry by entry against the majority rule applied to predecessor clock bits.
    for (unsigned idx = 0; idx < 64; ++idx) {
        const unsigned c1 = idx >> 5 & 1, n1 = idx >> 4 & 1, c2 = idx >> 3 & 1, n2 = idx >> 2 & 1,
                       c3 = idx >> 1 & 1, n3 = idx & 1;
        CHECK(PredecessorTable::contains(table.entry(idx), kClockAll) == (majority_clock_set(n1, n2, n3) == kClockAll));
        CHECK(PredecessorTable::contains(table.entry(idx), kClockR1R2) == (majority_clock_set(n1, n2, c3) == kClockR1R2));
        CHECK(PredecessorTable::contains(table.entry(idx), kClockR1R3) == (majority_clock_set(n1, c2, n3) == kClockR1R3));
        CHECK(PredecessorTable::contains(table.entry(idx), kClockR2R3) == (majority_clock_set(c1, n2, n3) == kClockR2R3));
    }
}

TEST_CASE("predecessors invert clockForward") {
    const auto table = PredecessorTable::build();
    SUBCASE("random A5/1 states") {
        const auto spec = CipherSpec::a51();
        Rng rng(3);
        for (int i = 0; i < 10000; ++i) {
            const State x = random_valid_state(rng, spec);
            const auto preds = predecessors(x, spec, table);
            CHECK(preds.size() <= 4);
            for (State p : preds) {
                REQUIRE(is_valid(p, spec));
                REQUIRE(clock_forward(p, spec) == x);
            }
        }
    }
    SUBCASE("exhaustive mini567") {
        const auto spec = CipherSpec::mini567();
        const auto states = all_valid_states(spec);
        std::vector<std::vector<State>> inverse(spec.node_count());
        for (State p : states) {
            const State x = naive::step(p, spec);
            REQUIRE(is_valid(x, spec));
            inverse[state_rank(x, spec)].push_back(p);
        }
        std::uint64_t total = 0;
        for (State x : states) {
            const auto preds = predecessors(x, spec, table);
            std::vector<State> got(preds.begin(), preds.end());
            std::sort(got.begin(), got.end());
            auto want = inverse[state_rank(x, spec)];
            std::sort(want.begin(), want.end());
            REQUIRE(got == want);
            total += got.size();
        }
        CHECK(total == spec.node_count());
    }
}

TEST_CASE("leaf fraction of random A5/1 states") {
    const auto spec = CipherSpec::a51();
    const auto table = PredecessorTable::build();
    Rng rng(2024);
    const int n = 1000000;
    int leaves = 0;
    for (int i = 0; i < n; ++i) leaves += predecessors(random_valid_state(rng, spec), spec, table).empty();
    CHECK(std::abs(static_cast<double>(leaves) / n - 0.375) <= 0.002);
}

TEST_CASE("validity closure") {
    const auto spec = CipherSpec::a51();
    Rng rng(5);
    for (int i = 0; i < 1000000; ++i) {
        const State x = random_valid_state(rng, spec);
        REQUIRE(is_valid(clock_forward(x, spec), spec));
    }
    for (const auto& mini : {CipherSpec::mini567(), CipherSpec::mini789()}) {
        for (std::uint64_t r = 0; r < mini.node_count(); ++r) {
            REQUIRE(is_valid(clock_forward(state_unrank(r, mini), mini), mini));
        }
    }
}

TEST_CASE("rank encoding is a bijection on valid states") {
    const auto spec = CipherSpec::mini567();
    for (std::uint64_t r = 0; r < spec.node_count(); ++r) {
        const State x = state_unrank(r, spec);
        REQUIRE(is_valid(x, spec));
        REQUIRE(state_rank(x, spec) == r);
    }
}

TEST_CASE("candidate predicate") {
    const auto table = PredecessorTable::build();
    const auto spec = CipherSpec::a51();
    const auto params = CandidateParams::default_for(spec);
    CHECK(params.fixed_r3 == 0x2AAA00);
    CHECK(params.c3(spec) == 0);
    CHECK_THROWS_AS(CandidateParams::make(spec, 0), ConfigError);
    CHECK_THROWS_AS(CandidateParams::make(spec, 1u << 23), ConfigError);

    Rng rng(9);
    for (int i = 0; i < 10000; ++i) {
        State x = random_valid_state(rng, spec);
        if (register_value(x, spec, 2) == params.fixed_r3) continue;
        CHECK_FALSE(is_candidate(x, params, spec, table));
    }
    int unclocked = 0;
    for (int i = 0; i < 10000; ++i) {
        const State x = random_fixed_r3_state(rng, spec, params);
        CHECK(is_candidate(x, params, spec, table) == is_candidate_reference(x, params, spec, table));
        if (register_value(clock_forward(x, spec), spec, 2) == params.fixed_r3) {
            CHECK_FALSE(is_candidate(x, params, spec, table));
            ++unclocked;
        }
    }
    CHECK(unclocked > 0);
}

TEST_CASE("candidate count on mini567 matches brute force") {
    const auto spec = CipherSpec::mini567();
    const auto table = PredecessorTable::build();
    const auto params = CandidateParams::default_for(spec);
    REQUIRE(params.c3(spec) == 0);
    const auto states = all_valid_states(spec);
    std::vector<std::uint32_t> indegree(spec.node_count());
    for (State p : states) ++indegree[state_rank(naive::step(p, spec), spec)];
    std::uint64_t brute = 0, fast = 0;
    for (State x : states) {
        const bool b = register_value(x, spec, 2) == params.fixed_r3 &&
                       register_value(naive::step(x, spec), spec, 2) != params.fixed_r3 &&
                       indegree[state_rank(x, spec)] > 0;
        brute += b;
        fast += is_candidate(x, params, spec, table);
        REQUIRE(b == is_candidate(x, params, spec, table));
    }
    CHECK(fast == brute);
    CHECK(brute > 0);
}

TEST_CASE("closed forms") {
    const auto spec = CipherSpec::a51();
    const std::uint64_t sr3 = ((1ull << 19) - 1) * ((1ull << 22) - 1);
    CHECK(expected_chain_count(spec, 0) == sr3 - (1ull << 18) * (1ull << 21));
    CHECK(expected_chain_count(spec, 1) - expected_chain_count(spec, 0) == 2359295);
    CHECK(expected_chain_length(spec, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-4));
    CHECK(expected_chain_length(spec, 1) == doctest::Approx(4.0 / 3.0).epsilon(1e-4));

    const Rational l = minimum_cycle_length(spec);
    CHECK(l == Rational{33554428, 3});
    CHECK(l.num / l.den == 11184809);
    CHECK(l.num % l.den == 1);
    CHECK(minimum_cycle_length(CipherSpec::mini567()) == Rational{508, 3});
}

TEST_CASE("expected chain count matches enumeration on minis") {
    const auto table = PredecessorTable::build();
    for (const auto& spec : {CipherSpec::mini567(), CipherSpec::mini789()}) {
        for (std::uint64_t fixed = 1; fixed <= spec.reg(2).value_mask; ++fixed) {
            const auto params = CandidateParams::make(spec, fixed);
            std::uint64_t chains = 0;
            for (std::uint64_t r2 = 1; r2 <= spec.register_period(1); ++r2) {
                for (std::uint64_t r1 = 1; r1 <= spec.register_period(0); ++r1) {
                    const State x = make_state(spec, r1, r2, fixed);
                    chains += (clock_set_of(x, spec) & 0b100) != 0;
                }
            }
            REQUIRE(chains == expected_chain_count(spec, params.c3(spec)));
        }
    }
}
