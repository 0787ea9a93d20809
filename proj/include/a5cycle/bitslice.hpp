#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "a5cycle/cipher.hpp"

namespace a5cycle {

inline constexpr std::size_t kSliceLanes = 64;

/// Bit-transposed batch: words[i] holds bit i of every lane. Unoccupied lanes
/// carry the filler state (1, 1, 1).
struct SlicedBatch {
    std::array<std::uint64_t, 64> words{};
    std::size_t lane_count = 0;

    bool operator==(const SlicedBatch&) const = default;
};

SlicedBatch transpose(std::span<const State> states, const CipherSpec& spec);
std::vector<State> untranspose(const SlicedBatch& batch);

/// Applies the transition t times to every lane using only word-wide logic.
SlicedBatch clock_sliced(const SlicedBatch& batch, const CipherSpec& spec, std::uint64_t t);

/// The candidate walk advanced past a candidate during the bulk phase.
class StrideOvershoot : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// A walk exceeded the distance cap without reaching a candidate.
class DistanceCapExceeded : public ConfigError {
public:
    using ConfigError::ConfigError;
};

enum class FinishMode { scalar, sliced };

struct ForwardOptions {
    std::uint64_t stride = 1;
    std::optional<std::uint64_t> distance_cap;  // default_distance_cap() when unset
    FinishMode finish = FinishMode::scalar;
    unsigned workers = 1;
};

struct ForwardResult {
    State destination;
    std::uint64_t distance = 0;

    bool operator==(const ForwardResult&) const = default;
};

/// ceil(16 L).
std::uint64_t default_distance_cap(const CipherSpec& spec);

/// 11170000 for A5/1 with fixedR3 = 0x2AAA00; otherwise the provable lower
/// bound on candidate spacing, which never overshoots from a candidate start.
std::uint64_t default_stride(const CipherSpec& spec, const CandidateParams& params);

/// For every start, the first candidate reached after at least one clock.
/// Bulk phase: `stride` sliced clocks with overshoot detection. Finish phase:
/// stepping with a candidate check per clock, either scalar or sliced.
/// Output order equals input order for any worker count.
std::vector<ForwardResult> forward_to_candidate(std::span<const State> starts, const CandidateParams& params,
                                                const CipherSpec& spec, const PredecessorTable& table,
                                                const ForwardOptions& options);

/// Scalar walk, used as the reference and by the finish phase.
ForwardResult walk_to_candidate(State start, const CandidateParams& params, const CipherSpec& spec,
                                const PredecessorTable& table, std::uint64_t cap);

struct StrideCalibration {
    std::uint64_t min_distance = 0;
    std::uint64_t max_distance = 0;
    std::uint64_t stride = 0;
};

/// Walks `walks` random candidates and takes the smallest observed distance
/// minus a 1% margin, never below the provable spacing bound.
StrideCalibration calibrate_stride(const CipherSpec& spec, const CandidateParams& params,
                                   const PredecessorTable& table, std::size_t walks, std::uint64_t seed,
                                   unsigned workers = 1);

}  // namespace a5cycle
