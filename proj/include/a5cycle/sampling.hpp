#pragma once

#include <cstdint>
#include <random>

#include "a5cycle/cipher.hpp"

namespace a5cycle {

using Rng = std::mt19937_64;

/// Uniform over valid states via the mixed-radix rank; never draws a zero register.
inline State random_valid_state(Rng& rng, const CipherSpec& spec) {
    std::uniform_int_distribution<std::uint64_t> dist(0, spec.node_count() - 1);
    return state_unrank(dist(rng), spec);
}

/// Uniform over states with R3 = fixedR3.
inline State random_fixed_r3_state(Rng& rng, const CipherSpec& spec, const CandidateParams& params) {
    std::uniform_int_distribution<std::uint64_t> d1(1, spec.register_period(0));
    std::uniform_int_distribution<std::uint64_t> d2(1, spec.register_period(1));
    const std::uint64_t r1 = d1(rng);
    const std::uint64_t r2 = d2(rng);
    return make_state(spec, r1, r2, params.fixed_r3);
}

/// Uniform over candidates (rejection on the fixedR3 slice).
inline State random_candidate(Rng& rng, const CipherSpec& spec, const CandidateParams& params,
                              const PredecessorTable& table) {
    for (;;) {
        const State x = random_fixed_r3_state(rng, spec, params);
        if (is_candidate(x, params, spec, table)) return x;
    }
}

}  // namespace a5cycle
