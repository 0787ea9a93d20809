#include "a5cycle/bitslice.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "a5cycle/sampling.hpp"
#include "a5cycle/work_queue.hpp"

namespace a5cycle {

namespace {

// Four 64-lane slices processed in lockstep.
using Wide = std::uint64_t __attribute__((vector_size(32)));
constexpr std::size_t kWideGroups = sizeof(Wide) / sizeof(std::uint64_t);
constexpr std::size_t kWideLanes = kWideGroups * kSliceLanes;

inline bool any(std::uint64_t w) { return w != 0; }
inline bool any(const Wide& w) {
    std::uint64_t acc = 0;
    for (std::size_t g = 0; g < kWideGroups; ++g) acc |= w[g];
    return acc != 0;
}

template <class Word>
Word broadcast(std::uint64_t v) {
    if constexpr (std::is_same_v<Word, std::uint64_t>) {
        return v;
    } else {
        Word w{};
        for (std::size_t g = 0; g < kWideGroups; ++g) w[g] = v;
        return w;
    }
}

struct SliceLayout {
    unsigned offset[3];
    unsigned length[3];
    unsigned clock[3];
    std::vector<unsigned> taps[3];
    unsigned r3_offset;
    unsigned r3_length;
    std::uint64_t fixed_r3;

    explicit SliceLayout(const CipherSpec& spec, std::uint64_t fixed = 0) {
        for (int k = 0; k < 3; ++k) {
            const auto& r = spec.reg(k);
            offset[k] = r.offset;
            length[k] = r.length;
            clock[k] = spec.clock_bit(k);
            taps[k] = r.taps;
        }
        r3_offset = offset[2];
        r3_length = length[2];
        fixed_r3 = fixed;
    }
};

// Detect: report lanes whose current state has R3 = fixedR3 with R3 about to
// be clocked. Freeze: those lanes are removed from `active` before clocking.
template <class Word, bool Detect, bool Freeze = false>
inline Word step(Word* w, const SliceLayout& lay, Word& active) {
    const Word c1 = w[lay.clock[0]];
    const Word c2 = w[lay.clock[1]];
    const Word c3 = w[lay.clock[2]];
    const Word maj = (c1 & c2) | (c1 & c3) | (c2 & c3);
    const Word m[3] = {~(c1 ^ maj), ~(c2 ^ maj), ~(c3 ^ maj)};

    Word hit{};
    if constexpr (Detect) {
        Word match = m[2];
        for (unsigned i = 0; i < lay.r3_length; ++i) {
            const Word b = w[lay.r3_offset + i];
            match &= ((lay.fixed_r3 >> i) & 1u) ? b : ~b;
        }
        hit = match;
        if constexpr (Freeze) {
            hit &= active;
            active &= ~hit;
        }
    }

    for (int k = 0; k < 3; ++k) {
        Word* r = w + lay.offset[k];
        const Word mk = m[k] & active;
        Word fb{};
        for (unsigned t : lay.taps[k]) fb ^= r[t];
        for (unsigned i = lay.length[k] - 1; i > 0; --i) r[i] ^= (r[i] ^ r[i - 1]) & mk;
        r[0] ^= (r[0] ^ fb) & mk;
    }
    return hit;
}

// Bit-matrix transpose: in[j] bit i  ->  out[i] bit j.
void transpose64(std::array<std::uint64_t, 64>& a) {
    std::uint64_t m = 0x00000000FFFFFFFFull;
    for (unsigned j = 32; j != 0; j >>= 1, m ^= m << j) {
        for (unsigned k = 0; k < 64; k = ((k | j) + 1) & ~j) {
            const std::uint64_t t = ((a[k] >> j) ^ a[k | j]) & m;
            a[k] ^= t << j;
            a[k | j] ^= t;
        }
    }
}

std::uint64_t filler_bits(const CipherSpec& spec) { return make_state(spec, 1, 1, 1).bits; }

std::uint64_t lane_mask(std::size_t lanes) {
    return lanes >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << lanes) - 1);
}

std::string describe(State s, const CipherSpec& spec) {
    std::ostringstream out;
    out << "0x" << std::hex << s.bits << std::dec << " (R1=" << register_value(s, spec, 0)
        << " R2=" << register_value(s, spec, 1) << " R3=" << register_value(s, spec, 2) << ")";
    return out.str();
}

// Processes up to kWideLanes starts.
void forward_block(std::span<const State> starts, std::span<ForwardResult> out, const CandidateParams& params,
                   const CipherSpec& spec, const PredecessorTable& table, const ForwardOptions& options,
                   std::uint64_t cap) {
    const SliceLayout lay(spec, params.fixed_r3);
    const unsigned bits = spec.total_bits();

    std::array<SlicedBatch, kWideGroups> groups;
    Wide real{};
    for (std::size_t g = 0; g < kWideGroups; ++g) {
        const std::size_t begin = std::min(starts.size(), g * kSliceLanes);
        const std::size_t end = std::min(starts.size(), begin + kSliceLanes);
        groups[g] = transpose(starts.subspan(begin, end - begin), spec);
        real[g] = lane_mask(end - begin);
    }
    std::vector<Wide> w(bits);
    for (unsigned i = 0; i < bits; ++i) {
        for (std::size_t g = 0; g < kWideGroups; ++g) w[i][g] = groups[g].words[i];
    }

    Wide all = broadcast<Wide>(~std::uint64_t{0});
    const std::uint64_t stride = options.stride;
    if (stride == 0) throw ConfigError("stride must be at least 1");
    if (stride > cap) throw ConfigError("stride exceeds the distance cap");

    // The start itself is excluded from the search, so the first step skips detection.
    step<Wide, false>(w.data(), lay, all);
    Wide passed{};
    for (std::uint64_t s = 1; s < stride; ++s) passed |= step<Wide, true>(w.data(), lay, all);
    passed &= real;
    if (any(passed)) {
        for (std::size_t g = 0; g < kWideGroups; ++g) {
            if (passed[g]) {
                const auto lane = static_cast<std::size_t>(std::countr_zero(passed[g]));
                throw StrideOvershoot("stride " + std::to_string(stride) + " overshoots the nearest candidate of " +
                                      describe(starts[g * kSliceLanes + lane], spec) +
                                      "; choose a smaller stride for this fixedR3");
            }
        }
    }

    if (options.finish == FinishMode::sliced) {
        // Every state reached after at least one clock has a predecessor, so the
        // R3 test alone decides candidacy here.
        Wide active = real;
        std::uint64_t distance = stride;
        for (;;) {
            const Wide hit = step<Wide, true, true>(w.data(), lay, active);
            if (any(hit)) {
                for (std::size_t g = 0; g < kWideGroups; ++g) {
                    if (!hit[g]) continue;
                    SlicedBatch snap;
                    snap.lane_count = kSliceLanes;
                    for (unsigned i = 0; i < bits; ++i) snap.words[i] = w[i][g];
                    const auto lanes = untranspose(snap);
                    for (std::uint64_t h = hit[g]; h; h &= h - 1) {
                        const auto lane = static_cast<std::size_t>(std::countr_zero(h));
                        out[g * kSliceLanes + lane] = ForwardResult{lanes[lane], distance};
                    }
                }
            }
            if (!any(active)) return;
            if (++distance > cap) {
                for (std::size_t g = 0; g < kWideGroups; ++g) {
                    if (active[g]) {
                        const auto lane = static_cast<std::size_t>(std::countr_zero(active[g]));
                        throw DistanceCapExceeded("no candidate within " + std::to_string(cap) + " clocks of " +
                                                  describe(starts[g * kSliceLanes + lane], spec));
                    }
                }
            }
        }
    }

    for (std::size_t g = 0; g < kWideGroups; ++g) {
        const std::size_t begin = g * kSliceLanes;
        if (begin >= starts.size()) break;
        SlicedBatch b;
        b.lane_count = groups[g].lane_count;
        for (unsigned i = 0; i < bits; ++i) b.words[i] = w[i][g];
        const auto lanes = untranspose(b);
        for (std::size_t j = 0; j < lanes.size(); ++j) {
            State x = lanes[j];
            std::uint64_t distance = stride;
            while (!is_candidate(x, params, spec, table)) {
                if (distance >= cap) {
                    throw DistanceCapExceeded("no candidate within " + std::to_string(cap) + " clocks of " +
                                              describe(starts[begin + j], spec));
                }
                x = clock_forward(x, spec);
                ++distance;
            }
            out[begin + j] = ForwardResult{x, distance};
        }
    }
}

}  // namespace

SlicedBatch transpose(std::span<const State> states, const CipherSpec& spec) {
    if (states.size() > kSliceLanes) throw ConfigError("sliced batch holds at most 64 states");
    SlicedBatch batch;
    batch.lane_count = states.size();
    const std::uint64_t filler = filler_bits(spec);
    for (std::size_t j = 0; j < kSliceLanes; ++j) batch.words[j] = j < states.size() ? states[j].bits : filler;
    transpose64(batch.words);
    return batch;
}

std::vector<State> untranspose(const SlicedBatch& batch) {
    auto rows = batch.words;
    transpose64(rows);
    std::vector<State> out(batch.lane_count);
    for (std::size_t j = 0; j < batch.lane_count; ++j) out[j] = State{rows[j]};
    return out;
}

SlicedBatch clock_sliced(const SlicedBatch& batch, const CipherSpec& spec, std::uint64_t t) {
    SlicedBatch out = batch;
    const SliceLayout lay(spec);
    std::uint64_t all = ~std::uint64_t{0};
    for (std::uint64_t s = 0; s < t; ++s) step<std::uint64_t, false>(out.words.data(), lay, all);
    return out;
}

std::uint64_t default_distance_cap(const CipherSpec& spec) {
    const Rational l = minimum_cycle_length(spec);
    return (16 * l.num + l.den - 1) / l.den;
}

std::uint64_t default_stride(const CipherSpec& spec, const CandidateParams& params) {
    if (spec == CipherSpec::a51() && params.fixed_r3 == kA51FixedR3) return 11170000;
    return minimum_candidate_spacing(spec);
}

ForwardResult walk_to_candidate(State start, const CandidateParams& params, const CipherSpec& spec,
                                const PredecessorTable& table, std::uint64_t cap) {
    State x = start;
    for (std::uint64_t d = 1; d <= cap; ++d) {
        x = clock_forward(x, spec);
        if (is_candidate(x, params, spec, table)) return ForwardResult{x, d};
    }
    throw DistanceCapExceeded("no candidate within " + std::to_string(cap) + " clocks of " + describe(start, spec));
}

std::vector<ForwardResult> forward_to_candidate(std::span<const State> starts, const CandidateParams& params,
                                                const CipherSpec& spec, const PredecessorTable& table,
                                                const ForwardOptions& options) {
    const std::uint64_t cap = options.distance_cap.value_or(default_distance_cap(spec));
    std::vector<ForwardResult> out(starts.size());
    parallel_chunks(starts.size(), kWideLanes, options.workers,
                    [&](std::size_t, std::size_t begin, std::size_t end) {
                        forward_block(starts.subspan(begin, end - begin),
                                      std::span<ForwardResult>(out).subspan(begin, end - begin), params, spec,
                                      table, options, cap);
                    });
    return out;
}

StrideCalibration calibrate_stride(const CipherSpec& spec, const CandidateParams& params,
                                   const PredecessorTable& table, std::size_t walks, std::uint64_t seed,
                                   unsigned workers) {
    Rng rng(seed);
    std::vector<State> starts(std::max<std::size_t>(walks, 1));
    for (auto& s : starts) s = random_candidate(rng, spec, params, table);
    ForwardOptions opts;
    opts.stride = minimum_candidate_spacing(spec);
    opts.finish = FinishMode::sliced;
    opts.workers = workers;
    const auto results = forward_to_candidate(starts, params, spec, table, opts);
    StrideCalibration cal;
    cal.min_distance = results.front().distance;
    for (const auto& r : results) {
        cal.min_distance = std::min(cal.min_distance, r.distance);
        cal.max_distance = std::max(cal.max_distance, r.distance);
    }
    const auto margin = static_cast<std::uint64_t>(std::ceil(static_cast<double>(cal.min_distance) * 0.01));
    cal.stride = std::max(minimum_candidate_spacing(spec), cal.min_distance - margin);
    return cal;
}

}  // namespace a5cycle
