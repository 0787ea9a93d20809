#include "a5cycle/record_io.hpp"

#include <unistd.h>

namespace a5cycle {

namespace {
std::atomic<std::uint64_t> temp_counter{0};
}

TempFile::TempFile(const std::filesystem::path& dir, const std::string& tag) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create scratch directory " + dir.string());
    path_ = dir / ("a5cycle-" + std::to_string(::getpid()) + "-" + std::to_string(temp_counter++) + "-" + tag);
}

TempFile& TempFile::operator=(TempFile&& other) noexcept {
    if (this != &other) {
        remove();
        path_ = std::move(other.path_);
        other.path_.clear();
    }
    return *this;
}

void TempFile::remove() {
    if (path_.empty()) return;
    std::error_code ec;
    std::filesystem::remove(path_, ec);
    path_.clear();
}

}  // namespace a5cycle
