#ifndef PETSYN_PHANTOM_HPP
#define PETSYN_PHANTOM_HPP

#include <cstdint>
#include <filesystem>
#include <optional>

#include "petsyn/volume.hpp"

namespace petsyn {

// Procedural PET-CT body phantom: ellipsoidal soft-tissue body in air,
// 2-4 high-HU organ ellipsoids, lesions inside organs with +60 HU contrast.
// Lesions are PET-avid ("hot") with the given probability, otherwise they
// stay at the organ's background uptake ("iso").
struct PhantomSpec {
    Grid grid{{48, 48, 48}, {1.0, 1.0, 1.0}};
    int organ_count = 3;                              // in [2,4]
    std::array<int, 2> lesion_count_range{1, 3};
    std::array<double, 2> lesion_radius_range_mm{3.0, 6.0};
    double hot_lesion_probability = 0.7;
    uint64_t seed = 0;
};

void validate_phantom_spec(const PhantomSpec& spec);

struct PhantomCase {
    Volume volume;
    LabelMap lesion_mask;     // binary
    LabelMap organ_map_truth; // 0 background, 1 body, 2.. organs
};

// Deterministic function of spec.seed.
PhantomCase generate_phantom(const PhantomSpec& spec);

// Rule-based stand-in for a pretrained whole-body organ segmenter. Thresholds
// CT at -200 HU for the body, labels connected high-HU components (>= 64
// voxels, 6-connectivity) as organs 2... Returns nullopt (SegmentationFailure)
// when no such component exists -- the synthesis rejection trigger.
std::optional<LabelMap> pseudo_organ_segment(const Volume& v);

// Writes n_train + n_val phantom cases (deterministic per-case seeds derived
// from spec.seed) plus a manifest.json under out_dir; returns the manifest.
DatasetManifest generate_dataset(int n_train, int n_val, const PhantomSpec& spec,
                                 const std::filesystem::path& out_dir);

} // namespace petsyn

#endif
