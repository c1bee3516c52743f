#pragma once

// Little-endian readers and writers for the checkpoint and dataset formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "awp/error.hpp"

namespace awp::binio {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
public:
    template <typename T>
    void put(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }
    void bytes(const void* data, size_t n) {
        const auto* p = static_cast<const char*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void floats(const float* data, size_t n) { bytes(data, n * sizeof(float)); }

    const std::vector<char>& buffer() const noexcept { return buf_; }

    /// Writes to a sibling temp file and renames, so readers never see a partial file.
    void write_file(const std::filesystem::path& path) const {
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
            out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
            if (!out) throw IoError("write failed for " + tmp.string());
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
        if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }

private:
    std::vector<char> buf_;
};

inline std::vector<char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

class Reader {
public:
    Reader(const std::vector<char>& buf, std::string what) : buf_(buf), what_(std::move(what)) {}

    template <typename T>
    T get(const char* field) {
        T v;
        take(&v, sizeof(T), field);
        return v;
    }
    void take(void* dst, size_t n, const char* field) {
        if (buf_.size() - pos_ < n) {
            throw TruncatedError(what_ + ": truncated while reading " + field + " at byte " + std::to_string(pos_));
        }
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::string string(size_t n, const char* field) {
        if (n > remaining()) take(nullptr, n, field);  // throws
        std::string s(n, '\0');
        take(s.data(), n, field);
        return s;
    }
    bool at_end() const noexcept { return pos_ == buf_.size(); }
    size_t remaining() const noexcept { return buf_.size() - pos_; }
    size_t position() const noexcept { return pos_; }

private:
    const std::vector<char>& buf_;
    std::string what_;
    size_t pos_ = 0;
};

}  // namespace awp::binio
