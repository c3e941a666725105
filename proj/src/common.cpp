#include "petsyn/common.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstdlib>
#include <thread>

#include "petsyn/nifti.hpp"

namespace petsyn {

int worker_threads() {
    static int n = [] {
        if (const char* env = std::getenv("PETSYN_THREADS")) {
            int v = std::atoi(env);
            if (v >= 1) return v;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return n;
}

std::string file_checksum(const std::string& path) {
    auto bytes = nifti::read_file_bytes(path);
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "crc32:%08lx", static_cast<unsigned long>(crc));
    return buf;
}

} // namespace petsyn
