#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <future>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "a5cycle/cipher.hpp"

namespace a5cycle {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct IoCounters {
    std::uint64_t bytes_read = 0;
    std::uint64_t bytes_written = 0;
};

inline void store_u64_le(std::byte* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::byte>(v >> (8 * i));
}

inline std::uint64_t load_u64_le(const std::byte* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::to_integer<std::uint8_t>(p[i])) << (8 * i);
    return v;
}

/// Weighted skeleton edge. On disk: five little-endian u64 fields, 40 bytes.
struct EdgeRecord {
    std::uint64_t source = 0;
    std::uint64_t destination = 0;
    std::uint64_t distance = 0;
    std::uint64_t subtree_size = 0;
    std::uint64_t subtree_depth = 0;

    bool operator==(const EdgeRecord&) const = default;
};

struct EdgeCodec {
    using value_type = EdgeRecord;
    static constexpr std::size_t size = 40;
    static void encode(const EdgeRecord& e, std::byte* p) {
        store_u64_le(p, e.source);
        store_u64_le(p + 8, e.destination);
        store_u64_le(p + 16, e.distance);
        store_u64_le(p + 24, e.subtree_size);
        store_u64_le(p + 32, e.subtree_depth);
    }
    static EdgeRecord decode(const std::byte* p) {
        return {load_u64_le(p), load_u64_le(p + 8), load_u64_le(p + 16), load_u64_le(p + 24), load_u64_le(p + 32)};
    }
};

struct U64Codec {
    using value_type = std::uint64_t;
    static constexpr std::size_t size = 8;
    static void encode(std::uint64_t v, std::byte* p) { store_u64_le(p, v); }
    static std::uint64_t decode(const std::byte* p) { return load_u64_le(p); }
};

/// Skeleton node files: raw 8-byte little-endian packed states.
struct StateCodec {
    using value_type = State;
    static constexpr std::size_t size = 8;
    static void encode(State s, std::byte* p) { store_u64_le(p, s.bits); }
    static State decode(const std::byte* p) { return State{load_u64_le(p)}; }
};

inline constexpr std::size_t kDefaultIoBlock = std::size_t{1} << 20;

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Uninitialized byte block; untouched pages are never faulted in.
class Block {
public:
    void resize(std::size_t n) { data_.reset(new std::byte[n]); }
    std::byte* data() { return data_.get(); }
    friend void swap(Block& a, Block& b) noexcept { a.data_.swap(b.data_); }

private:
    std::unique_ptr<std::byte[]> data_;
};

inline FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open " + path.string());
    return f;
}

}  // namespace detail

/// Sequential block writer. With overlap enabled the previous block is written
/// by a background task while the next one fills.
template <class Codec>
class RecordWriter {
public:
    using value_type = typename Codec::value_type;

    RecordWriter(const std::filesystem::path& path, IoCounters* counters = nullptr,
                 std::size_t block_bytes = kDefaultIoBlock, bool overlap = false)
        : path_(path), file_(detail::open_file(path, "wb")), counters_(counters), overlap_(overlap) {
        const std::size_t records = std::max<std::size_t>(1, block_bytes / Codec::size);
        capacity_ = records * Codec::size;
        buffer_.resize(capacity_);
        if (overlap_) spare_.resize(capacity_);
    }

    RecordWriter(const RecordWriter&) = delete;
    RecordWriter& operator=(const RecordWriter&) = delete;

    ~RecordWriter() {
        try {
            close();
        } catch (...) {
        }
    }

    void write(const value_type& v) {
        if (fill_ == capacity_) flush_block();
        Codec::encode(v, buffer_.data() + fill_);
        fill_ += Codec::size;
        ++count_;
    }

    void write_all(std::span<const value_type> values) {
        for (const auto& v : values) write(v);
    }

    std::uint64_t count() const { return count_; }

    void close() {
        if (!file_) return;
        flush_block();
        wait_pending();
        if (std::fflush(file_.get()) != 0) throw IoError("flush failed: " + path_.string());
        file_.reset();
    }

private:
    void flush_block() {
        if (fill_ == 0) return;
        if (counters_) counters_->bytes_written += fill_;
        if (!overlap_) {
            write_bytes(buffer_.data(), fill_);
        } else {
            wait_pending();
            swap(buffer_, spare_);
            const std::size_t n = fill_;
            pending_ = std::async(std::launch::async, [this, n] { write_bytes(spare_.data(), n); });
        }
        fill_ = 0;
    }

    void wait_pending() {
        if (pending_.valid()) pending_.get();
    }

    void write_bytes(const std::byte* data, std::size_t n) {
        if (std::fwrite(data, 1, n, file_.get()) != n) throw IoError("write failed: " + path_.string());
    }

    std::filesystem::path path_;
    detail::FilePtr file_;
    IoCounters* counters_;
    bool overlap_;
    detail::Block buffer_;
    detail::Block spare_;
    std::future<void> pending_;
    std::size_t capacity_ = 0;
    std::size_t fill_ = 0;
    std::uint64_t count_ = 0;
};

/// Sequential block reader. Rejects files whose length is not a whole number
/// of records. With prefetch enabled the next block is read in the background.
template <class Codec>
class RecordReader {
public:
    using value_type = typename Codec::value_type;

    RecordReader(const std::filesystem::path& path, IoCounters* counters = nullptr,
                 std::size_t block_bytes = kDefaultIoBlock, bool prefetch = false)
        : path_(path), file_(detail::open_file(path, "rb")), counters_(counters), prefetch_(prefetch) {
        std::error_code ec;
        const auto bytes = std::filesystem::file_size(path, ec);
        if (ec) throw IoError("cannot stat " + path.string());
        if (bytes % Codec::size != 0) {
            throw IoError("malformed record length in " + path.string() + ": " + std::to_string(bytes) +
                          " bytes is not a multiple of " + std::to_string(Codec::size));
        }
        total_ = bytes / Codec::size;
        const std::size_t records =
            std::max<std::size_t>(1, std::min<std::uint64_t>(total_, block_bytes / Codec::size));
        capacity_ = records * Codec::size;
        buffer_.resize(capacity_);
        if (prefetch_) {
            spare_.resize(capacity_);
            start_prefetch();
        }
    }

    RecordReader(const RecordReader&) = delete;
    RecordReader& operator=(const RecordReader&) = delete;

    ~RecordReader() {
        if (pending_.valid()) pending_.wait();
    }

    std::uint64_t size() const { return total_; }

    bool next(value_type& out) {
        if (pos_ == fill_ && !refill()) return false;
        out = Codec::decode(buffer_.data() + pos_);
        pos_ += Codec::size;
        return true;
    }

private:
    bool refill() {
        if (prefetch_) {
            if (!pending_.valid()) return false;
            const std::size_t n = pending_.get();
            swap(buffer_, spare_);
            fill_ = n;
            if (n > 0) start_prefetch();
        } else {
            fill_ = read_bytes(buffer_.data());
        }
        pos_ = 0;
        if (counters_) counters_->bytes_read += fill_;
        return fill_ > 0;
    }

    void start_prefetch() {
        pending_ = std::async(std::launch::async, [this] { return read_bytes(spare_.data()); });
    }

    std::size_t read_bytes(std::byte* dst) {
        const std::size_t n = std::fread(dst, 1, capacity_, file_.get());
        if (n < capacity_ && std::ferror(file_.get())) throw IoError("read failed: " + path_.string());
        return n;
    }

    std::filesystem::path path_;
    detail::FilePtr file_;
    IoCounters* counters_;
    bool prefetch_;
    detail::Block buffer_;
    detail::Block spare_;
    std::future<std::size_t> pending_;
    std::size_t capacity_ = 0;
    std::size_t fill_ = 0;
    std::size_t pos_ = 0;
    std::uint64_t total_ = 0;
};

template <class Codec>
void write_records(const std::filesystem::path& path, std::span<const typename Codec::value_type> values,
                   IoCounters* counters = nullptr) {
    RecordWriter<Codec> w(path, counters);
    w.write_all(values);
    w.close();
}

template <class Codec>
std::vector<typename Codec::value_type> read_records(const std::filesystem::path& path, IoCounters* counters = nullptr) {
    RecordReader<Codec> r(path, counters);
    std::vector<typename Codec::value_type> out;
    out.reserve(r.size());
    typename Codec::value_type v;
    while (r.next(v)) out.push_back(v);
    return out;
}

/// Scratch file removed on destruction unless released.
class TempFile {
public:
    TempFile() = default;
    TempFile(const std::filesystem::path& dir, const std::string& tag);
    TempFile(TempFile&& other) noexcept : path_(std::move(other.path_)) { other.path_.clear(); }
    TempFile& operator=(TempFile&& other) noexcept;
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;
    ~TempFile() { remove(); }

    const std::filesystem::path& path() const { return path_; }
    void remove();

private:
    std::filesystem::path path_;
};

}  // namespace a5cycle
