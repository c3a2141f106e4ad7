#ifndef MIXDCNN_BINIO_HPP
#define MIXDCNN_BINIO_HPP

// Little-endian binary IO helpers shared by the MXDS and checkpoint writers.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "mixdcnn/errors.hpp"

namespace mixdcnn::binio {

inline void put_bytes(std::ostream& os, const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    put_bytes(os, b, 8);
}

inline void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

// Buffered reader that tracks the byte offset for error reporting.
class Reader {
public:
    Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

    std::uint64_t offset() const { return offset_; }

    void read_bytes(void* p, std::size_t n, const char* what) {
        is_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(is_.gcount()) != n) {
            throw CorruptFileError(source_ + ": truncated while reading " + std::string(what) +
                                   " at byte " + std::to_string(offset_));
        }
        offset_ += n;
    }

    std::uint32_t read_u32(const char* what) {
        unsigned char b[4];
        read_bytes(b, 4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }

    std::uint64_t read_u64(const char* what) {
        unsigned char b[8];
        read_bytes(b, 8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }

    double read_f64(const char* what) {
        const std::uint64_t bits = read_u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }

    std::string read_string(std::size_t n, const char* what) {
        std::string s(n, '\0');
        read_bytes(s.data(), n, what);
        return s;
    }

    bool at_eof() {
        return is_.peek() == std::char_traits<char>::eof();
    }

    const std::string& source() const { return source_; }

private:
    std::istream& is_;
    std::string source_;
    std::uint64_t offset_ = 0;
};

} // namespace mixdcnn::binio

#endif
