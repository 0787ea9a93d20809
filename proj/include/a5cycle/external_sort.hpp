#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <queue>
#include <vector>

#include "a5cycle/record_io.hpp"

namespace a5cycle {

struct SortConfig {
    std::uint64_t memory_budget = std::uint64_t{64} << 20;
    std::filesystem::path scratch = std::filesystem::temp_directory_path();
    bool overlap_io = false;
    /// Per-stream I/O block; 0 selects budget/16 clamped to [64 KiB, 4 MiB].
    std::size_t block_bytes = 0;

    std::size_t io_block() const {
        if (block_bytes) return block_bytes;
        return static_cast<std::size_t>(
            std::clamp<std::uint64_t>(memory_budget / 16, std::uint64_t{64} << 10, std::uint64_t{4} << 20));
    }
};

/// Combine policy that never merges records.
struct KeepAll {
    template <class T>
    bool operator()(T&, const T&) const {
        return false;
    }
};

/// External merge sort: runs of half the memory budget are sorted in core and
/// spilled, then merged k ways (in several rounds when the fan-in is exceeded).
/// `combine(acc, next)` may fold `next` into an equal-keyed `acc` and return
/// true; it is applied inside runs and again while merging.
template <class Codec, class Less, class Combine = KeepAll>
class ExternalSorter {
public:
    using value_type = typename Codec::value_type;

    ExternalSorter(SortConfig config, IoCounters* counters, Less less = {}, Combine combine = {})
        : config_(std::move(config)), counters_(counters), less_(less), combine_(combine) {
        const std::uint64_t half = config_.memory_budget / 2;
        run_capacity_ = static_cast<std::size_t>(std::max<std::uint64_t>(1, half / sizeof(value_type)));
        fan_in_ = static_cast<std::size_t>(std::max<std::uint64_t>(2, half / config_.io_block()));
    }

    void push(const value_type& v) {
        buffer_.push_back(v);
        if (buffer_.size() >= run_capacity_) spill();
    }

    std::size_t runs_spilled() const { return spilled_runs_; }

    /// Emits every record in ascending order (after combining) to sink(const value_type&).
    template <class Sink>
    void drain(Sink&& sink) {
        if (runs_.empty()) {
            sort_buffer();
            for (const auto& v : buffer_) sink(v);
            buffer_.clear();
            return;
        }
        if (!buffer_.empty()) spill();
        while (runs_.size() > fan_in_) {
            std::vector<TempFile> next;
            for (std::size_t i = 0; i < runs_.size(); i += fan_in_) {
                const std::size_t end = std::min(runs_.size(), i + fan_in_);
                TempFile out(config_.scratch, "merge");
                RecordWriter<Codec> w(out.path(), counters_, config_.io_block(), config_.overlap_io);
                merge(std::span<TempFile>(runs_).subspan(i, end - i), [&](const value_type& v) { w.write(v); });
                w.close();
                next.push_back(std::move(out));
            }
            runs_ = std::move(next);
        }
        merge(std::span<TempFile>(runs_), sink);
        runs_.clear();
    }

private:
    void sort_buffer() {
        std::sort(buffer_.begin(), buffer_.end(), less_);
        if (buffer_.empty()) return;
        std::size_t out = 0;
        for (std::size_t i = 1; i < buffer_.size(); ++i) {
            if (!combine_(buffer_[out], buffer_[i])) buffer_[++out] = buffer_[i];
        }
        buffer_.resize(out + 1);
    }

    void spill() {
        sort_buffer();
        TempFile run(config_.scratch, "run");
        RecordWriter<Codec> w(run.path(), counters_, config_.io_block(), config_.overlap_io);
        w.write_all(buffer_);
        w.close();
        runs_.push_back(std::move(run));
        ++spilled_runs_;
        buffer_.clear();
    }

    template <class Sink>
    void merge(std::span<TempFile> runs, Sink&& sink) {
        struct Head {
            value_type value;
            std::size_t run;
        };
        std::vector<std::unique_ptr<RecordReader<Codec>>> readers;
        for (auto& r : runs) {
            readers.push_back(std::make_unique<RecordReader<Codec>>(r.path(), counters_, config_.io_block(),
                                                                    config_.overlap_io));
        }
        // Ties break on run index so the merged order is fully determined.
        auto greater = [this](const Head& a, const Head& b) {
            if (less_(b.value, a.value)) return true;
            if (less_(a.value, b.value)) return false;
            return a.run > b.run;
        };
        std::priority_queue<Head, std::vector<Head>, decltype(greater)> heap(greater);
        for (std::size_t i = 0; i < readers.size(); ++i) {
            value_type v;
            if (readers[i]->next(v)) heap.push({v, i});
        }
        bool have = false;
        value_type pending{};
        while (!heap.empty()) {
            Head h = heap.top();
            heap.pop();
            value_type v;
            if (readers[h.run]->next(v)) heap.push({v, h.run});
            if (have && combine_(pending, h.value)) continue;
            if (have) sink(pending);
            pending = h.value;
            have = true;
        }
        if (have) sink(pending);
        readers.clear();
        for (auto& r : runs) r.remove();
    }

    SortConfig config_;
    IoCounters* counters_;
    Less less_;
    Combine combine_;
    std::size_t run_capacity_ = 0;
    std::size_t fan_in_ = 2;
    std::vector<value_type> buffer_;
    std::vector<TempFile> runs_;
    std::size_t spilled_runs_ = 0;
};

}  // namespace a5cycle
