#ifndef PETSYN_METRICS_HPP
#define PETSYN_METRICS_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "petsyn/volume.hpp"

namespace petsyn {

// Dice similarity coefficient of two binary masks on the same grid.
// Both empty -> 1.0, exactly one empty -> 0.0.
double dice(const LabelMap& a, const LabelMap& b);

// Normalized surface distance. Boundary voxels are foreground voxels with at
// least one background face-neighbor (6-connectivity); the volume border
// counts as background. Distances are Euclidean in mm via the grid spacing.
// Both empty -> 1.0, exactly one empty -> 0.0.
double nsd(const LabelMap& a, const LabelMap& b, double tolerance_mm);

struct CaseMetrics {
    std::string case_id;
    double dsc = 0.0;
    double nsd = 0.0;
};

struct MetricsReport {
    std::vector<CaseMetrics> per_case; // sorted by case_id
    double mean_dsc = 0.0;
    double mean_nsd = 0.0;
    double tolerance_mm = 0.0;
};

// Per-case Dice/NSD of predictions against truths, matched by case_id.
// Missing prediction for a truth case is a hard error.
MetricsReport evaluate(const DatasetManifest& pred, const DatasetManifest& truth,
                       double tolerance_mm);

void save_metrics_json(const MetricsReport& r, const std::filesystem::path& path);
void save_metrics_csv(const MetricsReport& r, const std::filesystem::path& path);
MetricsReport load_metrics_json(const std::filesystem::path& path);

// Boundary extraction shared with the NSD oracle in tests.
std::vector<std::array<int, 3>> boundary_voxels(const LabelMap& m);

} // namespace petsyn

#endif
