#include "petsyn/nifti.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace petsyn::nifti {

namespace {

// nifti1.h layout, 348 bytes
#pragma pack(push, 1)
struct Nifti1Header {
    int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    int32_t extents;
    int16_t session_error;
    char regular;
    char dim_info;
    int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    int16_t intent_code;
    int16_t datatype;
    int16_t bitpix;
    int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration;
    float toffset;
    int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    int16_t qform_code;
    int16_t sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4];
    float srow_y[4];
    float srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr int16_t DT_UINT8 = 2;
constexpr int16_t DT_INT16 = 4;
constexpr int16_t DT_INT32 = 8;
constexpr int16_t DT_FLOAT32 = 16;
constexpr int16_t DT_FLOAT64 = 64;

bool has_gz_magic(const std::vector<uint8_t>& b) {
    return b.size() >= 2 && b[0] == 0x1f && b[1] == 0x8b;
}

} // namespace

bool is_gz_path(const std::filesystem::path& path) {
    return path.extension() == ".gz";
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

std::vector<uint8_t> gzip_compress(const std::vector<uint8_t>& raw) {
    z_stream zs{};
    if (deflateInit2(&zs, 6, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflateInit2 failed");
    gz_header header{};
    header.time = 0; // fixed mtime keeps output byte-deterministic
    header.os = 3;
    deflateSetHeader(&zs, &header);

    std::vector<uint8_t> out(deflateBound(&zs, static_cast<uLong>(raw.size())));
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw IoError("gzip compression failed");
    out.resize(zs.total_out);
    return out;
}

std::vector<uint8_t> gzip_decompress(const std::vector<uint8_t>& gz) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 32) != Z_OK) throw IoError("inflateInit2 failed");
    std::vector<uint8_t> out;
    out.resize(std::max<size_t>(gz.size() * 4, 1 << 16));
    zs.next_in = const_cast<Bytef*>(gz.data());
    zs.avail_in = static_cast<uInt>(gz.size());
    size_t written = 0;
    int rc = Z_OK;
    while (true) {
        zs.next_out = out.data() + written;
        zs.avail_out = static_cast<uInt>(out.size() - written);
        rc = inflate(&zs, Z_NO_FLUSH);
        written = zs.total_out;
        if (rc == Z_STREAM_END) break;
        if (rc != Z_OK && rc != Z_BUF_ERROR) {
            inflateEnd(&zs);
            throw IoError("gzip decompression failed");
        }
        if (written == out.size()) out.resize(out.size() * 2);
        if (rc == Z_BUF_ERROR && zs.avail_in == 0 && written < out.size()) {
            inflateEnd(&zs);
            throw IoError("gzip stream truncated");
        }
    }
    inflateEnd(&zs);
    out.resize(written);
    return out;
}

Image read(const std::filesystem::path& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    if (has_gz_magic(bytes)) bytes = gzip_decompress(bytes);

    if (bytes.size() < sizeof(Nifti1Header))
        throw IoError("malformed NIfTI header (file too small): " + path.string());
    Nifti1Header hdr{};
    std::memcpy(&hdr, bytes.data(), sizeof(hdr));
    if (hdr.sizeof_hdr != 348 || std::strncmp(hdr.magic, "n+1", 3) != 0)
        throw IoError("malformed NIfTI header (bad magic): " + path.string());

    int ndim = hdr.dim[0];
    if (ndim < 3 || ndim > 5)
        throw IoError("unsupported NIfTI dimensionality " + std::to_string(ndim) +
                      ": " + path.string());
    int nx = hdr.dim[1], ny = hdr.dim[2], nz = hdr.dim[3];
    int nt = ndim >= 4 ? std::max<int>(1, hdr.dim[4]) : 1;
    if (ndim == 5) {
        // treat a 5th dimension of size >1 as channels only if nt == 1
        int nu = std::max<int>(1, hdr.dim[5]);
        if (nt == 1) nt = nu;
        else if (nu != 1) throw IoError("unsupported 5D NIfTI layout: " + path.string());
    }
    if (nx <= 0 || ny <= 0 || nz <= 0)
        throw IoError("malformed NIfTI header (non-positive dim): " + path.string());

    Image img;
    img.grid.shape = {nz, ny, nx};
    img.grid.spacing = {hdr.pixdim[1], hdr.pixdim[2], hdr.pixdim[3]};
    img.channels = nt;

    size_t nvox = static_cast<size_t>(nx) * ny * nz * nt;
    size_t offset = static_cast<size_t>(hdr.vox_offset);
    if (offset < sizeof(Nifti1Header)) offset = 352;

    int bytes_per = hdr.bitpix / 8;
    if (bytes.size() < offset + nvox * bytes_per)
        throw IoError("NIfTI data truncated: " + path.string());
    const uint8_t* src = bytes.data() + offset;

    float slope = hdr.scl_slope == 0.0f ? 1.0f : hdr.scl_slope;
    float inter = hdr.scl_inter;

    img.data.resize(nvox);
    switch (hdr.datatype) {
        case DT_FLOAT32: {
            const float* p = reinterpret_cast<const float*>(src);
            for (size_t i = 0; i < nvox; ++i) img.data[i] = p[i] * slope + inter;
            break;
        }
        case DT_FLOAT64: {
            const double* p = reinterpret_cast<const double*>(src);
            for (size_t i = 0; i < nvox; ++i)
                img.data[i] = static_cast<float>(p[i] * slope + inter);
            break;
        }
        case DT_INT16: {
            const int16_t* p = reinterpret_cast<const int16_t*>(src);
            for (size_t i = 0; i < nvox; ++i) img.data[i] = p[i] * slope + inter;
            break;
        }
        case DT_INT32: {
            const int32_t* p = reinterpret_cast<const int32_t*>(src);
            for (size_t i = 0; i < nvox; ++i) img.data[i] = p[i] * slope + inter;
            break;
        }
        case DT_UINT8: {
            for (size_t i = 0; i < nvox; ++i) img.data[i] = src[i] * slope + inter;
            break;
        }
        default:
            throw IoError("unsupported NIfTI datatype " + std::to_string(hdr.datatype) +
                          ": " + path.string());
    }
    return img;
}

void write(const std::filesystem::path& path, const Image& img, DataType dt) {
    validate_grid(img.grid);
    size_t nvox = img.grid.voxels() * img.channels;
    if (img.data.size() != nvox)
        throw ValidationError("NIfTI write: data size does not match grid");

    Nifti1Header hdr{};
    hdr.sizeof_hdr = 348;
    hdr.regular = 'r';
    hdr.dim[0] = static_cast<int16_t>(img.channels > 1 ? 4 : 3);
    hdr.dim[1] = static_cast<int16_t>(img.grid.width());
    hdr.dim[2] = static_cast<int16_t>(img.grid.height());
    hdr.dim[3] = static_cast<int16_t>(img.grid.depth());
    hdr.dim[4] = static_cast<int16_t>(img.channels > 1 ? img.channels : 1);
    for (int i = 5; i < 8; ++i) hdr.dim[i] = 1;
    hdr.datatype = dt == DataType::float32 ? DT_FLOAT32 : DT_UINT8;
    hdr.bitpix = dt == DataType::float32 ? 32 : 8;
    hdr.pixdim[0] = 1.0f;
    hdr.pixdim[1] = static_cast<float>(img.grid.spacing[0]);
    hdr.pixdim[2] = static_cast<float>(img.grid.spacing[1]);
    hdr.pixdim[3] = static_cast<float>(img.grid.spacing[2]);
    hdr.pixdim[4] = 1.0f;
    hdr.vox_offset = 352.0f;
    hdr.scl_slope = 1.0f;
    hdr.scl_inter = 0.0f;
    hdr.xyzt_units = 2; // mm
    std::strncpy(hdr.descrip, "petsyn", sizeof(hdr.descrip) - 1);
    hdr.sform_code = 1;
    hdr.srow_x[0] = static_cast<float>(img.grid.spacing[0]);
    hdr.srow_y[1] = static_cast<float>(img.grid.spacing[1]);
    hdr.srow_z[2] = static_cast<float>(img.grid.spacing[2]);
    std::memcpy(hdr.magic, "n+1", 4);

    size_t payload = dt == DataType::float32 ? nvox * 4 : nvox;
    std::vector<uint8_t> bytes(352 + payload, 0);
    std::memcpy(bytes.data(), &hdr, sizeof(hdr));
    // bytes 348..351 stay zero: no header extensions

    if (dt == DataType::float32) {
        std::memcpy(bytes.data() + 352, img.data.data(), nvox * 4);
    } else {
        uint8_t* dst = bytes.data() + 352;
        for (size_t i = 0; i < nvox; ++i) {
            float v = img.data[i];
            if (v < 0.0f || v > 255.0f || v != static_cast<float>(static_cast<uint8_t>(v)))
                throw ValidationError("NIfTI write: value not representable as uint8");
            dst[i] = static_cast<uint8_t>(v);
        }
    }

    if (is_gz_path(path)) bytes = gzip_compress(bytes);
    write_file_bytes(path, bytes);
}

} // namespace petsyn::nifti
