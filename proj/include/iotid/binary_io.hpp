#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iotid {

// Little-endian field encoder.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void raw(std::span<const std::uint8_t> bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

    const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }
    std::vector<std::uint8_t>& bytes() noexcept { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

// Bounds-checked decoder; any overrun throws Error{CorruptFile}.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str();
    std::span<const std::uint8_t> raw(std::size_t n);

    // Element count that must fit in the remaining bytes at `min_elem_size` each.
    std::size_t count(std::size_t min_elem_size);

    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
    bool at_end() const noexcept { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

// Appends a CRC-32 of the current contents.
void seal_with_crc(std::vector<std::uint8_t>& bytes);

// Verifies the trailing CRC-32 and returns the body without it; throws
// Error{CorruptFile} on mismatch.
std::span<const std::uint8_t> unseal_crc(std::span<const std::uint8_t> bytes, std::string_view what);

// Writes to a unique temporary in the same directory, flushes, then renames
// over `path`; readers see either the old or the new file, never a mix.
void atomic_write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace iotid
