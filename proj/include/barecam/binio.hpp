#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "barecam/errors.hpp"

// Little-endian binary readers/writers for the cache, checkpoint and dataset
// file formats. All formats are pinned LE regardless of host order.

namespace barecam::bin {

static_assert(std::endian::native == std::endian::little,
              "big-endian hosts need byte swapping before file IO");

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void write_vec(std::ostream& os, const std::vector<T>& v) {
    if (!v.empty())
        os.write(reinterpret_cast<const char*>(v.data()),
                 static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
T read_raw(std::istream& is, const char* what) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw FormatError(std::string("truncated file while reading ") + what);
    return v;
}

template <typename T>
void read_vec(std::istream& is, std::vector<T>& v, size_t count, const char* what) {
    v.resize(count);
    if (count == 0) return;
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(count * sizeof(T)));
    if (!is) throw FormatError(std::string("truncated file while reading ") + what);
}

inline void write_magic(std::ostream& os, const char magic[4]) { os.write(magic, 4); }

inline void expect_magic(std::istream& is, const char magic[4], const char* what) {
    char buf[4] = {0, 0, 0, 0};
    is.read(buf, 4);
    if (!is || std::memcmp(buf, magic, 4) != 0)
        throw FormatError(std::string("bad magic for ") + what);
}

}  // namespace barecam::bin
