#ifndef PETSYN_PLANNER_HPP
#define PETSYN_PLANNER_HPP

#include <array>
#include <filesystem>

#include "petsyn/volume.hpp"

namespace petsyn {

// Dataset statistics in the style of the nnU-Net fingerprint extractor.
// Percentiles are taken over foreground voxels (lesion or organ label > 0).
struct Fingerprint {
    std::array<int, 3> median_shape{0, 0, 0};
    std::array<double, 3> median_spacing{0, 0, 0};
    std::array<double, 2> ct_percentiles{0, 0};  // (p0.5, p99.5) HU
    std::array<double, 2> pet_percentiles{0, 0}; // (p0.5, p99.5) SUV
    int case_count = 0;
};

// Network/training configuration derived from a Fingerprint.
struct Plan {
    std::array<int, 3> patch_size{0, 0, 0};
    std::array<int, 3> pool_depth{0, 0, 0}; // per-axis downsampling levels
    int batch_size = 0;
    int epochs = 0;
    int base_channels = 0;
    std::array<float, 2> ct_window{kCtWindowLo, kCtWindowHi};
    std::array<float, 2> pet_window{kPetWindowLo, kPetWindowHi};
};

enum class PlanProfile { desk, paper };

void validate_plan(const Plan& p);

Fingerprint extract_fingerprint(const DatasetManifest& manifest);

// paper: the pinned configuration (patch (128,160,112), batch 2, epochs 581).
// desk: per-axis patch dim = largest multiple of 2^pool_depth <= min(median
// dim, 64) with pool_depth 3 per axis (reduced to keep the dim >= 8).
Plan make_plan(const Fingerprint& fp, PlanProfile profile);

void save_fingerprint(const Fingerprint& fp, const std::filesystem::path& path);
Fingerprint load_fingerprint(const std::filesystem::path& path);
void save_plan(const Plan& p, const std::filesystem::path& path);
Plan load_plan(const std::filesystem::path& path);

} // namespace petsyn

#endif
