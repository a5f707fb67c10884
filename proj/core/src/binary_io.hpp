#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "blr/error.hpp"

// On-disk formats are little-endian; raw writes are only valid on LE hosts.
static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");

namespace blr::io {

template <typename T>
    requires std::is_trivially_copyable_v<T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
    requires std::is_trivially_copyable_v<T>
void write_array(std::ostream& out, std::span<const T> values) {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size_bytes()));
}

template <typename T>
    requires std::is_trivially_copyable_v<T>
T read_pod(std::istream& in, const char* what) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
        throw FormatError(FormatErrorKind::truncated, std::string("truncated file while reading ") + what);
    }
    return value;
}

template <typename T>
    requires std::is_trivially_copyable_v<T>
void read_array(std::istream& in, std::span<T> values, const char* what) {
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()))) {
        throw FormatError(FormatErrorKind::truncated, std::string("truncated file while reading ") + what);
    }
}

inline void write_magic(std::ostream& out, const std::array<char, 4>& magic) { out.write(magic.data(), 4); }

inline void expect_magic(std::istream& in, const std::array<char, 4>& magic) {
    std::array<char, 4> got{};
    if (!in.read(got.data(), 4)) {
        throw FormatError(FormatErrorKind::truncated, "truncated file while reading magic");
    }
    if (got != magic) {
        throw FormatError(FormatErrorKind::bad_magic,
                          "bad magic: expected '" + std::string(magic.data(), 4) + "'");
    }
}

inline void check_stream(const std::ostream& out) {
    if (!out) throw FormatError(FormatErrorKind::io, "write failed");
}

}  // namespace blr::io
