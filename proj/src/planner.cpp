#include "petsyn/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace petsyn {

using nlohmann::json;

namespace {

// lower median: element at index (n-1)/2 of the sorted sample
template <typename T>
T median_of(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

// linear-interpolation percentile, p in [0,100]
double percentile(std::vector<float>& v, double p) {
    if (v.empty()) throw ValidationError("percentile of empty sample");
    std::sort(v.begin(), v.end());
    double rank = p / 100.0 * (static_cast<double>(v.size()) - 1.0);
    size_t lo = static_cast<size_t>(std::floor(rank));
    size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = rank - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
}

int largest_multiple(int value, int factor) { return (value / factor) * factor; }

} // namespace

void validate_plan(const Plan& p) {
    for (int a = 0; a < 3; ++a) {
        if (p.patch_size[a] < 8)
            throw ValidationError("plan patch dim must be >= 8");
        if (p.pool_depth[a] < 0)
            throw ValidationError("plan pool depth must be >= 0");
        if (p.patch_size[a] % (1 << p.pool_depth[a]) != 0)
            throw ValidationError("plan patch dim " + std::to_string(p.patch_size[a]) +
                                  " not divisible by 2^" + std::to_string(p.pool_depth[a]));
    }
    if (p.batch_size < 1) throw ValidationError("plan batch_size must be >= 1");
    if (p.epochs < 1) throw ValidationError("plan epochs must be >= 1");
    if (p.base_channels < 1) throw ValidationError("plan base_channels must be >= 1");
    if (p.ct_window[0] >= p.ct_window[1] || p.pet_window[0] >= p.pet_window[1])
        throw ValidationError("plan normalization windows must be ordered");
}

Fingerprint extract_fingerprint(const DatasetManifest& manifest) {
    auto train = manifest.split(CaseRecord::Split::train);
    if (train.empty()) throw ValidationError("extract_fingerprint: no train cases");

    std::vector<int> depths, heights, widths;
    std::vector<double> sx, sy, sz;
    std::vector<float> fg_ct, fg_pet;

    for (const CaseRecord* rec : train) {
        Volume v = load_case_volume(manifest, *rec);
        LabelMap lesion = load_case_lesion(manifest, *rec);
        auto organs = load_case_organs(manifest, *rec);

        depths.push_back(v.grid.shape[0]);
        heights.push_back(v.grid.shape[1]);
        widths.push_back(v.grid.shape[2]);
        sx.push_back(v.grid.spacing[0]);
        sy.push_back(v.grid.spacing[1]);
        sz.push_back(v.grid.spacing[2]);

        for (size_t i = 0; i < v.grid.voxels(); ++i) {
            bool fg = lesion.labels[i] > 0 || (organs && organs->labels[i] > 0);
            if (fg) {
                fg_ct.push_back(v.ct[i]);
                fg_pet.push_back(v.pet[i]);
            }
        }
    }
    if (fg_ct.empty())
        throw ValidationError("extract_fingerprint: no foreground voxels in train split");

    Fingerprint fp;
    fp.median_shape = {median_of(depths), median_of(heights), median_of(widths)};
    fp.median_spacing = {median_of(sx), median_of(sy), median_of(sz)};
    fp.ct_percentiles = {percentile(fg_ct, 0.5), percentile(fg_ct, 99.5)};
    fp.pet_percentiles = {percentile(fg_pet, 0.5), percentile(fg_pet, 99.5)};
    fp.case_count = static_cast<int>(train.size());
    return fp;
}

Plan make_plan(const Fingerprint& fp, PlanProfile profile) {
    if (fp.case_count < 1) throw ValidationError("make_plan: fingerprint has no cases");

    Plan p;
    // normalization windows from the foreground percentiles, clamped into the
    // core-volume defaults
    p.ct_window = {std::clamp(static_cast<float>(fp.ct_percentiles[0]), kCtWindowLo, kCtWindowHi),
                   std::clamp(static_cast<float>(fp.ct_percentiles[1]), kCtWindowLo, kCtWindowHi)};
    p.pet_window = {
        std::clamp(static_cast<float>(fp.pet_percentiles[0]), kPetWindowLo, kPetWindowHi),
        std::clamp(static_cast<float>(fp.pet_percentiles[1]), kPetWindowLo, kPetWindowHi)};
    if (p.ct_window[1] <= p.ct_window[0]) p.ct_window = {kCtWindowLo, kCtWindowHi};
    if (p.pet_window[1] <= p.pet_window[0]) p.pet_window = {kPetWindowLo, kPetWindowHi};

    if (profile == PlanProfile::paper) {
        p.patch_size = {128, 160, 112};
        p.pool_depth = {5, 5, 4};
        p.batch_size = 2;
        p.epochs = 581;
        p.base_channels = 32;
        validate_plan(p);
        return p;
    }

    for (int a = 0; a < 3; ++a) {
        int cap = std::min(fp.median_shape[a], 64);
        int depth = 3;
        int dim = largest_multiple(cap, 1 << depth);
        while (depth > 0 && dim < 8) {
            --depth;
            dim = largest_multiple(cap, 1 << depth);
        }
        if (dim < 8)
            throw ValidationError("make_plan: median dim " +
                                  std::to_string(fp.median_shape[a]) +
                                  " too small for a depth-1 network (< 8)");
        p.patch_size[a] = dim;
        p.pool_depth[a] = depth;
    }
    p.batch_size = 2;
    p.epochs = 20;
    p.base_channels = 8;
    validate_plan(p);
    return p;
}

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

void save_fingerprint(const Fingerprint& fp, const std::filesystem::path& path) {
    json j;
    j["median_shape"] = fp.median_shape;
    j["median_spacing"] = fp.median_spacing;
    j["ct_percentiles"] = fp.ct_percentiles;
    j["pet_percentiles"] = fp.pet_percentiles;
    j["case_count"] = fp.case_count;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write fingerprint: " + path.string());
    out << j.dump(2) << "\n";
}

Fingerprint load_fingerprint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fingerprint: " + path.string());
    json j;
    in >> j;
    Fingerprint fp;
    fp.median_shape = j.at("median_shape").get<std::array<int, 3>>();
    fp.median_spacing = j.at("median_spacing").get<std::array<double, 3>>();
    fp.ct_percentiles = j.at("ct_percentiles").get<std::array<double, 2>>();
    fp.pet_percentiles = j.at("pet_percentiles").get<std::array<double, 2>>();
    fp.case_count = j.at("case_count").get<int>();
    return fp;
}

void save_plan(const Plan& p, const std::filesystem::path& path) {
    json j;
    j["patch_size"] = p.patch_size;
    j["pool_depth"] = p.pool_depth;
    j["batch_size"] = p.batch_size;
    j["epochs"] = p.epochs;
    j["base_channels"] = p.base_channels;
    j["ct_window"] = p.ct_window;
    j["pet_window"] = p.pet_window;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write plan: " + path.string());
    out << j.dump(2) << "\n";
}

Plan load_plan(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open plan: " + path.string());
    json j;
    in >> j;
    Plan p;
    p.patch_size = j.at("patch_size").get<std::array<int, 3>>();
    p.pool_depth = j.at("pool_depth").get<std::array<int, 3>>();
    p.batch_size = j.at("batch_size").get<int>();
    p.epochs = j.at("epochs").get<int>();
    p.base_channels = j.at("base_channels").get<int>();
    p.ct_window = j.at("ct_window").get<std::array<float, 2>>();
    p.pet_window = j.at("pet_window").get<std::array<float, 2>>();
    validate_plan(p);
    return p;
}

} // namespace petsyn
