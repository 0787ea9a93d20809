#pragma once

#include <array>
#include <bit>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace a5cycle {

/// Thrown for malformed cipher descriptions and invalid run parameters.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr int kRegisterCount = 3;

/// Bit k set means register k is clocked.
using ClockSet = std::uint8_t;

inline constexpr ClockSet kClockR1R2 = 0b011;
inline constexpr ClockSet kClockR1R3 = 0b101;
inline constexpr ClockSet kClockR2R3 = 0b110;
inline constexpr ClockSet kClockAll = 0b111;

/// Registers whose clock bit agrees with the majority of the three.
constexpr ClockSet majority_clock_set(unsigned c1, unsigned c2, unsigned c3) {
    const unsigned maj = (c1 & c2) | (c1 & c3) | (c2 & c3);
    return static_cast<ClockSet>((c1 == maj ? 1u : 0u) | (c2 == maj ? 2u : 0u) | (c3 == maj ? 4u : 0u));
}

struct RegisterSpec {
    unsigned length = 0;
    std::vector<unsigned> taps;  // ascending
    unsigned clock_tap = 0;

    // derived
    unsigned offset = 0;  // position of bit 0 inside the packed state
    std::uint64_t value_mask = 0;
    std::uint64_t tap_mask = 0;
    std::uint64_t period() const { return (std::uint64_t{1} << length) - 1; }
};

/// One majority-clocked three-register LFSR cipher instance.
class CipherSpec {
public:
    CipherSpec() = default;

    /// Validates lengths, taps and clock taps. The top bit of each register
    /// must be a feedback tap, otherwise the step is not invertible.
    static CipherSpec make(std::string name,
                           std::array<unsigned, kRegisterCount> lengths,
                           std::array<std::vector<unsigned>, kRegisterCount> taps,
                           std::array<unsigned, kRegisterCount> clock_taps);

    static CipherSpec a51();
    static CipherSpec mini567();
    static CipherSpec mini789();

    /// a51, mini567, mini789; throws ConfigError otherwise.
    static CipherSpec builtin(const std::string& name);

    const std::string& name() const { return name_; }
    const RegisterSpec& reg(int k) const { return regs_[k]; }
    unsigned total_bits() const { return regs_[0].length + regs_[1].length + regs_[2].length; }
    std::uint64_t register_period(int k) const { return regs_[k].period(); }

    /// Number of valid states, the product of the three register periods.
    std::uint64_t node_count() const {
        return regs_[0].period() * regs_[1].period() * regs_[2].period();
    }

    /// Absolute bit position of register k's clock tap in the packed state.
    unsigned clock_bit(int k) const { return regs_[k].offset + regs_[k].clock_tap; }

    bool operator==(const CipherSpec& other) const;

private:
    std::string name_;
    std::array<RegisterSpec, kRegisterCount> regs_{};
};

/// Packed register triple: R1 in the low bits, R3 in the high bits.
struct State {
    std::uint64_t bits = 0;

    friend constexpr auto operator<=>(State, State) = default;
};

inline std::uint64_t register_value(State x, const CipherSpec& spec, int k) {
    const auto& r = spec.reg(k);
    return (x.bits >> r.offset) & r.value_mask;
}

inline State make_state(const CipherSpec& spec, std::uint64_t r1, std::uint64_t r2, std::uint64_t r3) {
    return State{(r1 & spec.reg(0).value_mask) | ((r2 & spec.reg(1).value_mask) << spec.reg(1).offset) |
                 ((r3 & spec.reg(2).value_mask) << spec.reg(2).offset)};
}

bool is_valid(State x, const CipherSpec& spec);

/// Reference feedback: XOR of the tap bits, one tap at a time.
std::uint64_t feedback_xor_fold(std::uint64_t value, const RegisterSpec& reg);

/// Feedback via a single multiplication that gathers every tap bit into one
/// column of the product. Only available when such a constant exists for the
/// tap set (checked exhaustively over all tap patterns).
class MultiplyFeedback {
public:
    explicit MultiplyFeedback(const RegisterSpec& reg);

    bool available() const { return multiplier_ != 0; }
    std::uint64_t multiplier() const { return multiplier_; }
    unsigned column() const { return column_; }

    std::uint64_t operator()(std::uint64_t value) const {
        return ((value & tap_mask_) * multiplier_ >> column_) & 1u;
    }

private:
    std::uint64_t tap_mask_ = 0;
    std::uint64_t multiplier_ = 0;
    unsigned column_ = 0;
};

inline std::uint64_t step_register(std::uint64_t value, const RegisterSpec& reg) {
    const std::uint64_t fb = static_cast<std::uint64_t>(std::popcount(value & reg.tap_mask) & 1);
    return ((value << 1) | fb) & reg.value_mask;
}

inline ClockSet clock_set_of(State x, const CipherSpec& spec) {
    return majority_clock_set(static_cast<unsigned>(x.bits >> spec.clock_bit(0)) & 1u,
                              static_cast<unsigned>(x.bits >> spec.clock_bit(1)) & 1u,
                              static_cast<unsigned>(x.bits >> spec.clock_bit(2)) & 1u);
}

/// One majority-clocked step. Precondition: x is valid.
inline State clock_forward(State x, const CipherSpec& spec) {
    const ClockSet clocked = clock_set_of(x, spec);
    std::uint64_t bits = x.bits;
    for (int k = 0; k < kRegisterCount; ++k) {
        if (clocked & (1u << k)) {
            const auto& r = spec.reg(k);
            const std::uint64_t v = step_register((bits >> r.offset) & r.value_mask, r);
            bits = (bits & ~(r.value_mask << r.offset)) | (v << r.offset);
        }
    }
    return State{bits};
}

inline State clock_forward(State x, const CipherSpec& spec, std::uint64_t times) {
    for (std::uint64_t i = 0; i < times; ++i) x = clock_forward(x, spec);
    return x;
}

/// Consistent inverse clock patterns for each combination of the six bits
/// (c1, n1, c2, n2, c3, n3), c1 being the most significant index bit.
/// Pattern bit 0 = R1R2, bit 1 = R1R3, bit 2 = R2R3, bit 3 = R1R2R3.
class PredecessorTable {
public:
    static constexpr std::array<ClockSet, 4> kPatterns = {kClockR1R2, kClockR1R3, kClockR2R3, kClockAll};

    static PredecessorTable build();

    std::uint8_t entry(unsigned index) const { return entries_[index]; }
    static bool contains(std::uint8_t entry, ClockSet pattern);

    static unsigned index_of(unsigned c1, unsigned n1, unsigned c2, unsigned n2, unsigned c3, unsigned n3) {
        return (c1 << 5) | (n1 << 4) | (c2 << 3) | (n2 << 2) | (c3 << 1) | n3;
    }
    unsigned index_of(State x, const CipherSpec& spec) const;

    unsigned empty_entries() const;
    unsigned total_patterns() const;

private:
    std::array<std::uint8_t, 64> entries_{};
};

/// Up to four predecessors, stored inline.
class PredecessorList {
public:
    void push(State s) { items_[count_++] = s; }
    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    const State* begin() const { return items_.data(); }
    const State* end() const { return items_.data() + count_; }
    State operator[](std::size_t i) const { return items_[i]; }

private:
    std::array<State, 4> items_{};
    std::size_t count_ = 0;
};

/// Un-shifts one register: the inverse of step_register.
std::uint64_t unstep_register(std::uint64_t value, const RegisterSpec& reg);

/// Every valid p with clock_forward(p) == x.
PredecessorList predecessors(State x, const CipherSpec& spec, const PredecessorTable& table);

inline bool has_predecessor(State x, const CipherSpec& spec, const PredecessorTable& table) {
    // Un-shifting a nonzero register never yields zero, so for valid x a
    // nonempty table entry always produces at least one valid predecessor.
    return table.entry(table.index_of(x, spec)) != 0;
}

struct CandidateParams {
    std::uint64_t fixed_r3 = 0;

    static CandidateParams make(const CipherSpec& spec, std::uint64_t fixed_r3);
    /// 0x2AAA00 for A5/1; for other instances the smallest value with clock bit 0
    /// whose next-higher bit is 1 (same local pattern as the A5/1 default).
    static CandidateParams default_for(const CipherSpec& spec);

    unsigned c3(const CipherSpec& spec) const {
        return static_cast<unsigned>(fixed_r3 >> spec.reg(2).clock_tap) & 1u;
    }
};

inline constexpr std::uint64_t kA51FixedR3 = 0x2AAA00;

/// Fast candidate test for the hot paths.
inline bool is_candidate(State x, const CandidateParams& params, const CipherSpec& spec,
                         const PredecessorTable& table) {
    if (register_value(x, spec, 2) != params.fixed_r3) return false;
    if (!(clock_set_of(x, spec) & 0b100)) return false;
    return has_predecessor(x, spec, table);
}

/// Literal form: R3 matches, the successor's R3 differs, predecessors exist.
bool is_candidate_reference(State x, const CandidateParams& params, const CipherSpec& spec,
                            const PredecessorTable& table);

struct Rational {
    std::uint64_t num = 0;
    std::uint64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

/// (2^l1 - 1)(2^l2 - 1) - (2^(l1-1) - c3)(2^(l2-1) - c3)
std::uint64_t expected_chain_count(const CipherSpec& spec, unsigned c3);

/// Nodes sharing fixedR3 divided by the expected chain count.
double expected_chain_length(const CipherSpec& spec, unsigned c3);

/// L = 4/3 (2^l3 - 1), in lowest terms.
Rational minimum_cycle_length(const CipherSpec& spec);

/// Lower bound on the clock distance between consecutive candidates: R3 must
/// complete a full period before it can return to fixedR3.
inline std::uint64_t minimum_candidate_spacing(const CipherSpec& spec) { return spec.register_period(2); }

/// Orbit size of value 1 when register k is clocked alone.
std::uint64_t enumerate_register_period(const RegisterSpec& reg);

/// Mixed-radix index over the three nonzero register values, in [0, node_count).
inline std::uint64_t state_rank(State x, const CipherSpec& spec) {
    const std::uint64_t p1 = spec.register_period(0);
    const std::uint64_t p2 = spec.register_period(1);
    return (register_value(x, spec, 0) - 1) +
           p1 * ((register_value(x, spec, 1) - 1) + p2 * (register_value(x, spec, 2) - 1));
}

inline State state_unrank(std::uint64_t rank, const CipherSpec& spec) {
    const std::uint64_t p1 = spec.register_period(0);
    const std::uint64_t p2 = spec.register_period(1);
    const std::uint64_t r1 = rank % p1 + 1;
    rank /= p1;
    const std::uint64_t r2 = rank % p2 + 1;
    const std::uint64_t r3 = rank / p2 + 1;
    return make_state(spec, r1, r2, r3);
}

/// Text document: one "key = value" per line, '#' comments.
///   name = a51
///   lengths = 19 22 23
///   taps1 = 13 16 17 18
///   taps2 = 20 21
///   taps3 = 7 20 21 22
///   clock = 8 10 10
CipherSpec parse_cipher_spec(const std::string& text);
std::string format_cipher_spec(const CipherSpec& spec);

/// Builtin name or path to a spec document.
CipherSpec load_cipher_spec(const std::string& name_or_path);

}  // namespace a5cycle
