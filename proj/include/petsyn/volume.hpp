#ifndef PETSYN_VOLUME_HPP
#define PETSYN_VOLUME_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "petsyn/common.hpp"

namespace petsyn {

// Voxel geometry. shape is (D,H,W) with W fastest-varying in memory;
// spacing is (sx,sy,sz) in mm where sx belongs to the W axis, sy to H, sz to D
// (matching NIfTI pixdim order).
struct Grid {
    std::array<int, 3> shape{0, 0, 0};      // D, H, W
    std::array<double, 3> spacing{1, 1, 1}; // sx, sy, sz (mm)

    int depth() const { return shape[0]; }
    int height() const { return shape[1]; }
    int width() const { return shape[2]; }
    size_t voxels() const {
        return static_cast<size_t>(shape[0]) * shape[1] * shape[2];
    }
    size_t index(int i, int j, int k) const {
        return (static_cast<size_t>(i) * shape[1] + j) * shape[2] + k;
    }
    bool operator==(const Grid& o) const = default;
};

void validate_grid(const Grid& g);

// Dual-channel volume: CT in Hounsfield units, PET in SUV (>= 0).
struct Volume {
    Grid grid;
    std::vector<float> ct;
    std::vector<float> pet;
};

void validate_volume(const Volume& v);

// Integer voxel grid on the same geometry. Lesion masks are {0,1}; organ
// maps use 0 background, 1 body, 2.. organs.
struct LabelMap {
    Grid grid;
    std::vector<uint8_t> labels;
};

void validate_label_map(const LabelMap& m);
void validate_lesion_mask(const LabelMap& m);

struct CaseRecord {
    enum class Provenance { real, synthetic };
    enum class Split { train, val };

    std::string case_id;
    std::string volume_path;      // the _ct file; _pet companion is derived
    std::string lesion_mask_path;
    std::string organ_map_path;   // empty when absent
    Provenance provenance = Provenance::real;
    Split split = Split::train;
    std::string source_case_id;   // synthetic cases link to their real source

    bool has_organ_map() const { return !organ_map_path.empty(); }
};

// JSON manifest listing CaseRecords with paths relative to the manifest file.
struct DatasetManifest {
    static constexpr int kFormatVersion = 1;

    std::filesystem::path root; // directory containing the manifest
    std::vector<CaseRecord> cases;

    std::vector<const CaseRecord*> split(CaseRecord::Split s) const;
    const CaseRecord* find(const std::string& case_id) const;
    std::filesystem::path resolve(const std::string& rel) const { return root / rel; }
};

DatasetManifest load_manifest(const std::filesystem::path& manifest_path);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& manifest_path);

// ---------------------------------------------------------------------------
// File I/O (NIfTI-1, two files per case: *_ct.nii[.gz] and *_pet.nii[.gz];
// masks are single files).
// ---------------------------------------------------------------------------

Volume load_volume(const std::filesystem::path& path);
void save_volume(const Volume& v, const std::filesystem::path& path);

LabelMap load_label_map(const std::filesystem::path& path);
void save_label_map(const LabelMap& m, const std::filesystem::path& path);

Volume load_case_volume(const DatasetManifest& m, const CaseRecord& rec);
LabelMap load_case_lesion(const DatasetManifest& m, const CaseRecord& rec);
std::optional<LabelMap> load_case_organs(const DatasetManifest& m, const CaseRecord& rec);

// ---------------------------------------------------------------------------
// Normalization. CT window [-1024,1024] HU, PET window [0,20] SUV; both map
// affinely onto [-1,1] after clipping. Windows are configurable because the
// defaults are stand-ins, not measured constants.
// ---------------------------------------------------------------------------

constexpr float kCtWindowLo = -1024.0f;
constexpr float kCtWindowHi = 1024.0f;
constexpr float kPetWindowLo = 0.0f;
constexpr float kPetWindowHi = 20.0f;

inline float normalize_value(float x, float lo, float hi) {
    float c = x < lo ? lo : (x > hi ? hi : x);
    return 2.0f * (c - lo) / (hi - lo) - 1.0f;
}

inline float denormalize_value(float y, float lo, float hi) {
    float c = y < -1.0f ? -1.0f : (y > 1.0f ? 1.0f : y);
    return lo + (c + 1.0f) * 0.5f * (hi - lo);
}

std::vector<float> normalize_ct(const std::vector<float>& hu,
                                float lo = kCtWindowLo, float hi = kCtWindowHi);
std::vector<float> normalize_pet(const std::vector<float>& suv,
                                 float lo = kPetWindowLo, float hi = kPetWindowHi);
std::vector<float> denormalize_ct(const std::vector<float>& v,
                                  float lo = kCtWindowLo, float hi = kCtWindowHi);
std::vector<float> denormalize_pet(const std::vector<float>& v,
                                   float lo = kPetWindowLo, float hi = kPetWindowHi);

// ---------------------------------------------------------------------------
// Patching. Out-of-bounds regions are filled with the window minimum of each
// channel (-1024 HU / 0 SUV, i.e. the normalized minimum) and label 0. The
// returned patch always has exactly the requested shape.
// ---------------------------------------------------------------------------

std::pair<Volume, LabelMap> extract_patch(const Volume& v, const LabelMap& m,
                                          std::array<int, 3> center,
                                          std::array<int, 3> size);

// Origin-aligned nearest-neighbor downsampling: out(i,j,k) = in(i*f, j*f, k*f).
// Every grid dim must be divisible by its factor.
LabelMap downsample_mask(const LabelMap& m, std::array<int, 3> factor);

} // namespace petsyn

#endif
