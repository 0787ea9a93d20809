#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "a5cycle/cipher.hpp"

namespace a5cycle::naive {

// Bit-per-byte register model, deliberately independent of the packed
// arithmetic in cipher.hpp. Used by the oracle and by tests.
struct Registers {
    std::array<std::vector<std::uint8_t>, 3> bits;
};

inline Registers unpack(State x, const CipherSpec& spec) {
    Registers regs;
    unsigned pos = 0;
    for (int k = 0; k < 3; ++k) {
        regs.bits[k].resize(spec.reg(k).length);
        for (auto& b : regs.bits[k]) b = static_cast<std::uint8_t>((x.bits >> pos++) & 1u);
    }
    return regs;
}

inline State pack(const Registers& regs) {
    std::uint64_t bits = 0;
    unsigned pos = 0;
    for (int k = 0; k < 3; ++k) {
        for (auto b : regs.bits[k]) bits |= std::uint64_t{b} << pos++;
    }
    return State{bits};
}

inline void step(Registers& regs, const CipherSpec& spec) {
    std::uint8_t clock_bit[3];
    for (int k = 0; k < 3; ++k) clock_bit[k] = regs.bits[k][spec.reg(k).clock_tap];
    const int ones = clock_bit[0] + clock_bit[1] + clock_bit[2];
    const std::uint8_t majority = ones >= 2 ? 1 : 0;
    for (int k = 0; k < 3; ++k) {
        if (clock_bit[k] != majority) continue;
        auto& r = regs.bits[k];
        std::uint8_t fb = 0;
        for (unsigned t : spec.reg(k).taps) fb ^= r[t];
        for (std::size_t i = r.size() - 1; i > 0; --i) r[i] = r[i - 1];
        r[0] = fb;
    }
}

inline State step(State x, const CipherSpec& spec) {
    Registers regs = unpack(x, spec);
    step(regs, spec);
    return pack(regs);
}

}  // namespace a5cycle::naive
