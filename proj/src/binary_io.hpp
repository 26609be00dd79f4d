#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "vvdlab/types.hpp"

namespace vvdlab::detail {

/// Little-endian writer that counts bytes and reports sink failures.
class LeWriter {
public:
    explicit LeWriter(std::ostream& out) : out_(out) {}

    void bytes(const void* data, std::size_t n)
    {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) {
            throw IoError("write failed after " + std::to_string(count_) + " bytes");
        }
        count_ += n;
    }

    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { put_le(v); }
    void u64(std::uint64_t v) { put_le(v); }
    void i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v)); }
    void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }
    void complex(Complex c)
    {
        f64(c.real());
        f64(c.imag());
    }

    std::uint64_t count() const noexcept { return count_; }

private:
    template <typename U>
    void put_le(U v)
    {
        unsigned char buf[sizeof(U)];
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            buf[i] = static_cast<unsigned char>(v >> (8 * i));
        }
        bytes(buf, sizeof(U));
    }

    std::ostream& out_;
    std::uint64_t count_ = 0;
};

/// Little-endian reader; truncation raises ParseError with the failing offset.
class LeReader {
public:
    explicit LeReader(std::istream& in) : in_(in) {}

    void bytes(void* data, std::size_t n, std::string_view what)
    {
        in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw ParseError("truncated input while reading " + std::string(what), offset_ + static_cast<std::uint64_t>(in_.gcount()));
        }
        offset_ += n;
    }

    std::uint8_t u8(std::string_view what)
    {
        std::uint8_t v = 0;
        bytes(&v, 1, what);
        return v;
    }
    std::uint32_t u32(std::string_view what) { return get_le<std::uint32_t>(what); }
    std::uint64_t u64(std::string_view what) { return get_le<std::uint64_t>(what); }
    std::int64_t i64(std::string_view what) { return static_cast<std::int64_t>(get_le<std::uint64_t>(what)); }
    double f64(std::string_view what) { return std::bit_cast<double>(get_le<std::uint64_t>(what)); }
    Complex complex(std::string_view what)
    {
        const double re = f64(what);
        const double im = f64(what);
        return {re, im};
    }

    /// True when the stream has no further bytes.
    bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

    std::uint64_t offset() const noexcept { return offset_; }

private:
    template <typename U>
    U get_le(std::string_view what)
    {
        unsigned char buf[sizeof(U)];
        bytes(buf, sizeof(U), what);
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            v |= static_cast<U>(buf[i]) << (8 * i);
        }
        return v;
    }

    std::istream& in_;
    std::uint64_t offset_ = 0;
};

} // namespace vvdlab::detail
