#ifndef PETSYN_NIFTI_HPP
#define PETSYN_NIFTI_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "petsyn/volume.hpp"

namespace petsyn::nifti {

// Minimal NIfTI-1 reader/writer. Supports float32/float64/int16/uint8 input
// (with scl_slope/scl_inter applied), float32 and uint8 output, 3D or
// multi-channel 4D images, and transparent gzip via zlib. The writer is
// byte-deterministic: fixed header fields, no timestamps, gzip mtime forced
// to zero.
struct Image {
    Grid grid;
    int channels = 1;                 // 4th dimension (nt)
    std::vector<float> data;          // channel-major: [channels][D*H*W]
};

Image read(const std::filesystem::path& path);

enum class DataType { float32, uint8 };

void write(const std::filesystem::path& path, const Image& img, DataType dt);

bool is_gz_path(const std::filesystem::path& path);

// Whole-buffer helpers shared with checkpoint/manifest code.
std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes);
std::vector<uint8_t> gzip_compress(const std::vector<uint8_t>& raw);
std::vector<uint8_t> gzip_decompress(const std::vector<uint8_t>& gz);

} // namespace petsyn::nifti

#endif
