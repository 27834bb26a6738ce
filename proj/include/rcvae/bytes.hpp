#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "rcvae/errors.hpp"
#include "rcvae/matrix.hpp"

namespace rcvae {

// Little-endian binary building blocks shared by the checkpoint and dataset
// formats. Strings are u64-length-prefixed UTF-8; matrices are
// (u64 rows, u64 cols, row-major f64).

class ByteWriter {
  public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void str(const std::string& s) {
        u64(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void matrix(const Matrix& m) {
        u64(m.rows);
        u64(m.cols);
        for (double v : m.data) f64(v);
    }
    void raw(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return buf_; }

  private:
    std::vector<char> buf_;
};

class ByteReader {
  public:
    ByteReader(std::vector<char> bytes, std::string what_file)
        : buf_(std::move(bytes)), file_(std::move(what_file)) {}

    std::size_t offset() const { return pos_; }
    std::size_t remaining() const { return buf_.size() - pos_; }

    void need(std::size_t n, const char* what) {
        if (pos_ + n > buf_.size())
            throw FormatError(file_ + " truncated at byte " + std::to_string(pos_) +
                              " reading " + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(buf_[pos_++]);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
        return v;
    }
    std::uint64_t u64(const char* what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_++])) << (8 * i);
        return v;
    }
    double f64(const char* what) {
        std::uint64_t bits = u64(what);
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string str(const char* what) {
        std::uint64_t n = u64(what);
        if (n > remaining())
            throw FormatError(file_ + " truncated at byte " + std::to_string(pos_) +
                              " reading " + what + " body");
        std::string s(buf_.begin() + static_cast<std::ptrdiff_t>(pos_),
                      buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return s;
    }
    Matrix matrix(const char* what) {
        std::uint64_t r = u64(what), c = u64(what);
        if (r == 0 || c == 0 || r > (1u << 24) || c > (1u << 24))
            throw FormatError(file_ + ": implausible shape for " + what + " at byte " +
                              std::to_string(pos_));
        Matrix m(r, c);
        for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = f64(what);
        return m;
    }
    void expect_done() {
        if (remaining() != 0)
            throw FormatError(file_ + ": " + std::to_string(remaining()) +
                              " trailing bytes at offset " + std::to_string(pos_));
    }

  private:
    std::vector<char> buf_;
    std::string file_;
    std::size_t pos_ = 0;
};

// Whole-file helpers; writes go through a temp file + rename so a crash never
// leaves a half-written artifact behind.
void write_file_atomic(const std::string& path, const std::vector<char>& bytes);
std::vector<char> read_file_bytes(const std::string& path);  // MissingArtifactError

}  // namespace rcvae
