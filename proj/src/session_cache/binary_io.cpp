#include "iotid/binary_io.hpp"

#include "iotid/error.hpp"

#include <fmt/format.h>
#include <zlib.h>

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>

namespace iotid {

void ByteReader::need(std::size_t n) const {
    if (n > bytes_.size() - pos_) {
        throw Error(ErrorCode::CorruptFile, fmt::format("read of {} bytes at offset {} overruns {}-byte buffer", n,
                                                        pos_, bytes_.size()));
    }
}

std::uint8_t ByteReader::u8() {
    need(1);
    return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += 4;
    return v;
}

std::uint64_t ByteReader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_ + static_cast<std::size_t>(i)]} << (8 * i);
    pos_ += 8;
    return v;
}

std::string ByteReader::str() {
    const std::uint32_t n = u32();
    const auto b = raw(n);
    return std::string(b.begin(), b.end());
}

std::span<const std::uint8_t> ByteReader::raw(std::size_t n) {
    need(n);
    const auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
}

std::size_t ByteReader::count(std::size_t min_elem_size) {
    const std::uint64_t n = u64();
    if (min_elem_size > 0 && n > remaining() / min_elem_size) {
        throw Error(ErrorCode::CorruptFile, fmt::format("element count {} exceeds remaining data", n));
    }
    return static_cast<std::size_t>(n);
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    std::size_t at = 0;
    while (at < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - at, 1u << 30);
        crc = crc32(crc, bytes.data() + at, static_cast<uInt>(n));
        at += n;
    }
    return static_cast<std::uint32_t>(crc);
}

void seal_with_crc(std::vector<std::uint8_t>& bytes) {
    const std::uint32_t crc = crc32_of(bytes);
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
}

std::span<const std::uint8_t> unseal_crc(std::span<const std::uint8_t> bytes, std::string_view what) {
    if (bytes.size() < 4) throw Error(ErrorCode::CorruptFile, fmt::format("{}: too short for a checksum", what));
    const auto body = bytes.first(bytes.size() - 4);
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t{bytes[body.size() + static_cast<std::size_t>(i)]} << (8 * i);
    if (crc32_of(body) != stored) throw Error(ErrorCode::CorruptFile, fmt::format("{}: checksum mismatch", what));
    return body;
}

void atomic_write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<std::uint64_t> counter{0};
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw Error(ErrorCode::IoFailure, fmt::format("mkdir {}: {}", path.parent_path().string(), ec.message()));
    }
    const auto tmp = path.parent_path() /
                     fmt::format(".{}.tmp.{}.{}", path.filename().string(), ::getpid(), counter.fetch_add(1));

    const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw Error(ErrorCode::IoFailure, fmt::format("open {}: {}", tmp.string(), std::strerror(errno)));
    std::size_t written = 0;
    while (written < bytes.size()) {
        const ssize_t n = ::write(fd, bytes.data() + written, bytes.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            const int err = errno;
            ::close(fd);
            std::filesystem::remove(tmp, ec);
            throw Error(ErrorCode::IoFailure, fmt::format("write {}: {}", tmp.string(), std::strerror(err)));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0 || ::close(fd) != 0) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::IoFailure, fmt::format("flush {}: {}", tmp.string(), std::strerror(errno)));
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(ErrorCode::IoFailure, fmt::format("rename to {}: {}", path.string(), ec.message()));
    }
}

}  // namespace iotid
