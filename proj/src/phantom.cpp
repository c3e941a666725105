#include "petsyn/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace petsyn {

namespace {

constexpr float kAirHu = -1000.0f;
constexpr float kBodyHu = 40.0f;
constexpr float kLesionHuContrast = 60.0f;
constexpr float kBodyHuThreshold = -200.0f; // pseudo-seg body rule
constexpr float kOrganHuThreshold = 80.0f;  // pseudo-seg organ rule
constexpr size_t kMinOrganComponent = 64;
constexpr double kCtNoiseSigma = 5.0;
constexpr double kPetNoiseSigma = 0.05;

struct Ellipsoid {
    std::array<double, 3> center_mm; // x (W), y (H), z (D)
    std::array<double, 3> semi_mm;

    bool contains(double x, double y, double z) const {
        double u = (x - center_mm[0]) / semi_mm[0];
        double v = (y - center_mm[1]) / semi_mm[1];
        double w = (z - center_mm[2]) / semi_mm[2];
        return u * u + v * v + w * w <= 1.0;
    }
};

struct OrganDraw {
    Ellipsoid shape;
    float hu;
    double background_suv;
};

std::array<double, 3> voxel_center_mm(const Grid& g, int i, int j, int k) {
    return {(k + 0.5) * g.spacing[0], (j + 0.5) * g.spacing[1], (i + 0.5) * g.spacing[2]};
}

} // namespace

void validate_phantom_spec(const PhantomSpec& spec) {
    validate_grid(spec.grid);
    if (spec.organ_count < 2 || spec.organ_count > 4)
        throw ValidationError("phantom organ_count must be in [2,4]");
    if (spec.lesion_count_range[0] < 0 || spec.lesion_count_range[1] < spec.lesion_count_range[0])
        throw ValidationError("phantom lesion_count_range invalid");
    if (spec.lesion_radius_range_mm[0] < 2.0)
        throw ValidationError("phantom lesion radius min must be >= 2mm");
    if (spec.lesion_radius_range_mm[1] < spec.lesion_radius_range_mm[0])
        throw ValidationError("phantom lesion radius range inverted");
    double min_extent = 1e300;
    for (int a = 0; a < 3; ++a) {
        double extent = spec.grid.shape[a] * spec.grid.spacing[2 - a];
        min_extent = std::min(min_extent, extent);
    }
    if (spec.lesion_radius_range_mm[1] > 0.25 * min_extent)
        throw ValidationError("phantom max lesion radius exceeds 1/4 of smallest grid extent");
    if (spec.hot_lesion_probability < 0.0 || spec.hot_lesion_probability > 1.0)
        throw ValidationError("phantom hot_lesion_probability must be in [0,1]");
}

PhantomCase generate_phantom(const PhantomSpec& spec) {
    validate_phantom_spec(spec);
    Rng rng(spec.seed);
    const Grid& g = spec.grid;
    int D = g.shape[0], H = g.shape[1], W = g.shape[2];
    std::array<double, 3> extent_mm = {W * g.spacing[0], H * g.spacing[1], D * g.spacing[2]};

    // Body: soft-tissue ellipsoid in air, lightly jittered.
    Ellipsoid body;
    for (int a = 0; a < 3; ++a) {
        body.center_mm[a] = extent_mm[a] * 0.5 + rng.uniform(-1.5, 1.5);
        body.semi_mm[a] = extent_mm[a] * rng.uniform(0.38, 0.43);
    }
    double body_min_semi = *std::min_element(body.semi_mm.begin(), body.semi_mm.end());

    // Organs: axis-aligned high-HU ellipsoids, non-touching, large enough to
    // host the configured lesions. Separation uses the support function along
    // the center line, which is a valid non-touch condition for ellipsoids.
    double r_max = spec.lesion_radius_range_mm[1];
    double organ_semi_lo = std::max(3.0, 0.7 * r_max);
    double organ_semi_hi = std::max(organ_semi_lo + 0.3,
                                    std::min(0.45 * body_min_semi, 1.4 * r_max));
    auto support = [](const Ellipsoid& e, const std::array<double, 3>& u) {
        double s = 0.0;
        for (int a = 0; a < 3; ++a) s += e.semi_mm[a] * e.semi_mm[a] * u[a] * u[a];
        return std::sqrt(s);
    };
    std::vector<OrganDraw> organs;
    for (int o = 0; o < spec.organ_count; ++o) {
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            Ellipsoid e;
            for (int a = 0; a < 3; ++a)
                e.semi_mm[a] = rng.uniform(organ_semi_lo, organ_semi_hi);
            bool inside = true;
            for (int a = 0; a < 3; ++a) {
                double u = rng.uniform(-0.68, 0.68);
                e.center_mm[a] = body.center_mm[a] + u * body.semi_mm[a];
                if (std::abs(u) * body.semi_mm[a] + e.semi_mm[a] > 0.95 * body.semi_mm[a])
                    inside = false;
            }
            if (!inside) continue;
            bool separated = true;
            for (const auto& other : organs) {
                std::array<double, 3> d;
                double norm = 0.0;
                for (int a = 0; a < 3; ++a) {
                    d[a] = e.center_mm[a] - other.shape.center_mm[a];
                    norm += d[a] * d[a];
                }
                norm = std::sqrt(norm);
                if (norm < 1e-9) {
                    separated = false;
                    break;
                }
                std::array<double, 3> u = {d[0] / norm, d[1] / norm, d[2] / norm};
                if (norm < support(e, u) + support(other.shape, u) + 2.5) separated = false;
            }
            if (!separated) continue;
            OrganDraw od;
            od.shape = e;
            od.hu = 120.0f + 45.0f * static_cast<float>(o);
            od.background_suv = rng.uniform(0.5, 2.5);
            organs.push_back(od);
            placed = true;
        }
        if (!placed)
            throw ValidationError("phantom: cannot place organ " + std::to_string(o) +
                                  " (grid too small for the configured lesions)");
    }

    // Rasterize body + organs.
    PhantomCase out;
    out.volume.grid = g;
    out.volume.ct.assign(g.voxels(), kAirHu);
    out.volume.pet.assign(g.voxels(), 0.0f);
    out.lesion_mask.grid = g;
    out.lesion_mask.labels.assign(g.voxels(), 0);
    out.organ_map_truth.grid = g;
    out.organ_map_truth.labels.assign(g.voxels(), 0);

    double body_suv = rng.uniform(0.8, 1.6);
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < H; ++j)
            for (int k = 0; k < W; ++k) {
                auto p = voxel_center_mm(g, i, j, k);
                if (!body.contains(p[0], p[1], p[2])) continue;
                size_t idx = g.index(i, j, k);
                out.organ_map_truth.labels[idx] = 1;
                out.volume.ct[idx] = kBodyHu;
                out.volume.pet[idx] = static_cast<float>(body_suv);
                for (size_t o = 0; o < organs.size(); ++o) {
                    if (organs[o].shape.contains(p[0], p[1], p[2])) {
                        out.organ_map_truth.labels[idx] = static_cast<uint8_t>(2 + o);
                        out.volume.ct[idx] = organs[o].hu;
                        out.volume.pet[idx] = static_cast<float>(organs[o].background_suv);
                        break;
                    }
                }
            }

    // Lesions: ellipsoids clipped to their host organ.
    int n_lesions = static_cast<int>(
        rng.uniform_int(spec.lesion_count_range[0], spec.lesion_count_range[1]));
    if (n_lesions > 0) {
        // organ voxel lists, in linear-index order
        std::vector<std::vector<size_t>> organ_voxels(organs.size());
        for (size_t idx = 0; idx < g.voxels(); ++idx) {
            uint8_t l = out.organ_map_truth.labels[idx];
            if (l >= 2) organ_voxels[l - 2].push_back(idx);
        }
        bool any = std::any_of(organ_voxels.begin(), organ_voxels.end(),
                               [](const auto& v) { return !v.empty(); });
        if (!any) throw ValidationError("phantom: lesions cannot fit inside any organ");

        for (int l = 0; l < n_lesions; ++l) {
            size_t o = static_cast<size_t>(rng.uniform_int(0, int64_t(organs.size()) - 1));
            while (organ_voxels[o].empty())
                o = (o + 1) % organs.size();
            size_t center_idx = organ_voxels[o][static_cast<size_t>(
                rng.uniform_int(0, int64_t(organ_voxels[o].size()) - 1))];
            int ci = static_cast<int>(center_idx / (size_t(H) * W));
            int cj = static_cast<int>((center_idx / W) % H);
            int ck = static_cast<int>(center_idx % W);
            Ellipsoid le;
            le.center_mm = voxel_center_mm(g, ci, cj, ck);
            for (int a = 0; a < 3; ++a)
                le.semi_mm[a] = rng.uniform(spec.lesion_radius_range_mm[0],
                                            spec.lesion_radius_range_mm[1]);
            bool hot = rng.bernoulli(spec.hot_lesion_probability);
            double hot_suv = rng.uniform(5.0, 15.0);

            uint8_t organ_label = static_cast<uint8_t>(2 + o);
            for (int i = 0; i < D; ++i)
                for (int j = 0; j < H; ++j)
                    for (int k = 0; k < W; ++k) {
                        size_t idx = g.index(i, j, k);
                        if (out.organ_map_truth.labels[idx] != organ_label) continue;
                        auto p = voxel_center_mm(g, i, j, k);
                        if (!le.contains(p[0], p[1], p[2])) continue;
                        out.lesion_mask.labels[idx] = 1;
                        out.volume.ct[idx] = organs[o].hu + kLesionHuContrast;
                        if (hot) out.volume.pet[idx] = static_cast<float>(hot_suv);
                    }
        }
    }

    // Tissue noise, drawn in voxel order after all structure parameters.
    for (size_t idx = 0; idx < g.voxels(); ++idx) {
        if (out.organ_map_truth.labels[idx] == 0) continue;
        out.volume.ct[idx] += static_cast<float>(kCtNoiseSigma * rng.normal());
        float pet = out.volume.pet[idx] + static_cast<float>(kPetNoiseSigma * rng.normal());
        out.volume.pet[idx] = std::max(0.0f, pet);
    }

    validate_volume(out.volume);
    return out;
}

std::optional<LabelMap> pseudo_organ_segment(const Volume& v) {
    validate_volume(v);
    const Grid& g = v.grid;
    int D = g.shape[0], H = g.shape[1], W = g.shape[2];

    LabelMap out;
    out.grid = g;
    out.labels.assign(g.voxels(), 0);
    for (size_t idx = 0; idx < g.voxels(); ++idx)
        if (v.ct[idx] > kBodyHuThreshold) out.labels[idx] = 1;

    // connected components of high-HU voxels, 6-connectivity
    std::vector<int32_t> comp(g.voxels(), -1);
    struct Component {
        int32_t id;
        size_t size;
        size_t first_idx;
    };
    std::vector<Component> comps;
    int32_t next_id = 0;
    std::deque<size_t> queue;
    for (size_t start = 0; start < g.voxels(); ++start) {
        if (comp[start] >= 0 || v.ct[start] <= kOrganHuThreshold) continue;
        int32_t id = next_id++;
        comps.push_back({id, 0, start});
        comp[start] = id;
        queue.push_back(start);
        while (!queue.empty()) {
            size_t idx = queue.front();
            queue.pop_front();
            ++comps[id].size;
            int i = static_cast<int>(idx / (size_t(H) * W));
            int j = static_cast<int>((idx / W) % H);
            int k = static_cast<int>(idx % W);
            const int di[6] = {-1, 1, 0, 0, 0, 0};
            const int dj[6] = {0, 0, -1, 1, 0, 0};
            const int dk[6] = {0, 0, 0, 0, -1, 1};
            for (int n = 0; n < 6; ++n) {
                int ni = i + di[n], nj = j + dj[n], nk = k + dk[n];
                if (ni < 0 || ni >= D || nj < 0 || nj >= H || nk < 0 || nk >= W) continue;
                size_t nidx = g.index(ni, nj, nk);
                if (comp[nidx] >= 0 || v.ct[nidx] <= kOrganHuThreshold) continue;
                comp[nidx] = id;
                queue.push_back(nidx);
            }
        }
    }

    std::vector<Component> kept;
    for (const auto& c : comps)
        if (c.size >= kMinOrganComponent) kept.push_back(c);
    if (kept.empty()) return std::nullopt;

    std::sort(kept.begin(), kept.end(), [](const Component& a, const Component& b) {
        if (a.size != b.size) return a.size > b.size;
        return a.first_idx < b.first_idx;
    });
    if (kept.size() > 253) kept.resize(253);

    std::vector<int32_t> relabel(next_id, 0);
    for (size_t r = 0; r < kept.size(); ++r) relabel[kept[r].id] = static_cast<int32_t>(2 + r);
    for (size_t idx = 0; idx < g.voxels(); ++idx)
        if (comp[idx] >= 0 && relabel[comp[idx]] > 0)
            out.labels[idx] = static_cast<uint8_t>(relabel[comp[idx]]);
    return out;
}

DatasetManifest generate_dataset(int n_train, int n_val, const PhantomSpec& spec,
                                 const std::filesystem::path& out_dir) {
    if (n_train < 1 || n_val < 1)
        throw ValidationError("generate_dataset: n_train and n_val must be >= 1");
    validate_phantom_spec(spec);

    std::filesystem::create_directories(out_dir / "cases");
    DatasetManifest m;
    m.root = out_dir;

    int total = n_train + n_val;
    for (int i = 0; i < total; ++i) {
        bool train = i < n_train;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s_%04d", train ? "train" : "val",
                      train ? i : i - n_train);
        std::string id = buf;

        PhantomSpec case_spec = spec;
        case_spec.seed = derive_seed(spec.seed, static_cast<uint64_t>(i));
        PhantomCase pc = generate_phantom(case_spec);

        CaseRecord rec;
        rec.case_id = id;
        rec.volume_path = "cases/" + id + "_ct.nii.gz";
        rec.lesion_mask_path = "cases/" + id + "_lesion.nii.gz";
        rec.organ_map_path = "cases/" + id + "_organs.nii.gz";
        rec.provenance = CaseRecord::Provenance::real;
        rec.split = train ? CaseRecord::Split::train : CaseRecord::Split::val;

        save_volume(pc.volume, m.resolve(rec.volume_path));
        save_label_map(pc.lesion_mask, m.resolve(rec.lesion_mask_path));
        save_label_map(pc.organ_map_truth, m.resolve(rec.organ_map_path));
        m.cases.push_back(std::move(rec));
    }
    save_manifest(m, out_dir / "manifest.json");
    return m;
}

} // namespace petsyn
