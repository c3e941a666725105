#include "petsyn/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "petsyn/nifti.hpp"

namespace petsyn {

using nlohmann::json;

void validate_grid(const Grid& g) {
    for (int i = 0; i < 3; ++i) {
        if (g.shape[i] < 4)
            throw ValidationError("grid shape dim " + std::to_string(i) +
                                  " must be >= 4, got " + std::to_string(g.shape[i]));
        if (!(g.spacing[i] > 0.0) || !std::isfinite(g.spacing[i]))
            throw ValidationError("grid spacing dim " + std::to_string(i) +
                                  " must be positive and finite");
    }
}

void validate_volume(const Volume& v) {
    validate_grid(v.grid);
    size_t n = v.grid.voxels();
    if (v.ct.size() != n)
        throw ValidationError("ct channel size " + std::to_string(v.ct.size()) +
                              " does not match grid voxel count " + std::to_string(n));
    if (v.pet.size() != n)
        throw ValidationError("pet channel size " + std::to_string(v.pet.size()) +
                              " does not match grid voxel count " + std::to_string(n));
    for (size_t i = 0; i < n; ++i) {
        if (!std::isfinite(v.ct[i]))
            throw ValidationError("ct channel contains non-finite value at voxel " +
                                  std::to_string(i));
        if (!std::isfinite(v.pet[i]))
            throw ValidationError("pet channel contains non-finite value at voxel " +
                                  std::to_string(i));
        if (v.pet[i] < 0.0f)
            throw ValidationError("pet channel contains negative value at voxel " +
                                  std::to_string(i));
    }
}

void validate_label_map(const LabelMap& m) {
    validate_grid(m.grid);
    if (m.labels.size() != m.grid.voxels())
        throw ValidationError("label map size does not match grid voxel count");
}

void validate_lesion_mask(const LabelMap& m) {
    validate_label_map(m);
    for (size_t i = 0; i < m.labels.size(); ++i)
        if (m.labels[i] > 1)
            throw ValidationError("lesion mask contains label " +
                                  std::to_string(int(m.labels[i])) + " at voxel " +
                                  std::to_string(i) + "; must be binary");
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

std::string provenance_name(CaseRecord::Provenance p) {
    return p == CaseRecord::Provenance::real ? "real" : "synthetic";
}

CaseRecord::Provenance provenance_from(const std::string& s) {
    if (s == "real") return CaseRecord::Provenance::real;
    if (s == "synthetic") return CaseRecord::Provenance::synthetic;
    throw IoError("manifest: unknown provenance '" + s + "'");
}

std::string split_name(CaseRecord::Split s) {
    return s == CaseRecord::Split::train ? "train" : "val";
}

CaseRecord::Split split_from(const std::string& s) {
    if (s == "train") return CaseRecord::Split::train;
    if (s == "val") return CaseRecord::Split::val;
    throw IoError("manifest: unknown split '" + s + "'");
}

} // namespace

std::vector<const CaseRecord*> DatasetManifest::split(CaseRecord::Split s) const {
    std::vector<const CaseRecord*> out;
    for (const auto& c : cases)
        if (c.split == s) out.push_back(&c);
    return out;
}

const CaseRecord* DatasetManifest::find(const std::string& case_id) const {
    for (const auto& c : cases)
        if (c.case_id == case_id) return &c;
    return nullptr;
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError("manifest parse error in " + manifest_path.string() + ": " + e.what());
    }
    if (!j.contains("format_version") || j["format_version"].get<int>() != DatasetManifest::kFormatVersion)
        throw IoError("manifest format_version mismatch in " + manifest_path.string());

    DatasetManifest m;
    m.root = manifest_path.parent_path();
    std::vector<std::string> seen;
    for (const auto& jc : j.at("cases")) {
        CaseRecord c;
        c.case_id = jc.at("case_id").get<std::string>();
        c.volume_path = jc.at("volume").get<std::string>();
        c.lesion_mask_path = jc.at("lesion_mask").get<std::string>();
        if (jc.contains("organ_map") && !jc["organ_map"].is_null())
            c.organ_map_path = jc["organ_map"].get<std::string>();
        c.provenance = provenance_from(jc.at("provenance").get<std::string>());
        c.split = split_from(jc.at("split").get<std::string>());
        if (jc.contains("source_case_id") && !jc["source_case_id"].is_null())
            c.source_case_id = jc["source_case_id"].get<std::string>();
        if (c.provenance == CaseRecord::Provenance::synthetic && c.source_case_id.empty())
            throw IoError("manifest: synthetic case '" + c.case_id + "' lacks source_case_id");
        if (std::find(seen.begin(), seen.end(), c.case_id) != seen.end())
            throw IoError("manifest: duplicate case_id '" + c.case_id + "'");
        seen.push_back(c.case_id);
        m.cases.push_back(std::move(c));
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& manifest_path) {
    json j;
    j["format_version"] = DatasetManifest::kFormatVersion;
    json jcases = json::array();
    for (const auto& c : m.cases) {
        json jc;
        jc["case_id"] = c.case_id;
        jc["volume"] = c.volume_path;
        jc["lesion_mask"] = c.lesion_mask_path;
        if (c.has_organ_map()) jc["organ_map"] = c.organ_map_path;
        else jc["organ_map"] = nullptr;
        jc["provenance"] = provenance_name(c.provenance);
        jc["split"] = split_name(c.split);
        if (!c.source_case_id.empty()) jc["source_case_id"] = c.source_case_id;
        else jc["source_case_id"] = nullptr;
        jcases.push_back(jc);
    }
    j["cases"] = jcases;
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw IoError("cannot write manifest: " + manifest_path.string());
    out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// Volume / label I/O
// ---------------------------------------------------------------------------

namespace {

// "case_ct.nii.gz" -> stem "case_ct", ext ".nii.gz"
std::pair<std::string, std::string> split_nifti_ext(const std::filesystem::path& path) {
    std::string name = path.filename().string();
    for (const char* ext : {".nii.gz", ".nii"}) {
        size_t elen = std::strlen(ext);
        if (name.size() > elen && name.compare(name.size() - elen, elen, ext) == 0)
            return {name.substr(0, name.size() - elen), ext};
    }
    throw IoError("not a NIfTI path (.nii / .nii.gz expected): " + path.string());
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Derive the per-modality pair from any of: base path, _ct path, _pet path.
std::pair<std::filesystem::path, std::filesystem::path>
modality_pair(const std::filesystem::path& path) {
    auto [stem, ext] = split_nifti_ext(path);
    std::string base = stem;
    if (ends_with(stem, "_ct") || ends_with(stem, "_pet"))
        base = stem.substr(0, stem.rfind('_'));
    auto dir = path.parent_path();
    return {dir / (base + "_ct" + ext), dir / (base + "_pet" + ext)};
}

} // namespace

Volume load_volume(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        // a bare base path is allowed when the _ct companion exists
        auto [ct_path, pet_path] = modality_pair(path);
        if (!std::filesystem::exists(ct_path))
            throw IoError("volume file not found: " + path.string());
    }

    // Single-file two-channel case
    if (std::filesystem::exists(path)) {
        nifti::Image img = nifti::read(path);
        if (img.channels == 2) {
            Volume v;
            v.grid = img.grid;
            size_t n = v.grid.voxels();
            v.ct.assign(img.data.begin(), img.data.begin() + n);
            v.pet.assign(img.data.begin() + n, img.data.begin() + 2 * n);
            validate_volume(v);
            return v;
        }
        if (img.channels != 1)
            throw IoError("expected 1 or 2 channels, got " +
                          std::to_string(img.channels) + ": " + path.string());
    }

    auto [ct_path, pet_path] = modality_pair(path);
    if (!std::filesystem::exists(ct_path))
        throw IoError("CT modality file not found: " + ct_path.string());
    if (!std::filesystem::exists(pet_path))
        throw IoError("PET modality file not found: " + pet_path.string());

    nifti::Image ct = nifti::read(ct_path);
    nifti::Image pet = nifti::read(pet_path);
    if (ct.channels != 1 || pet.channels != 1)
        throw IoError("modality files must be single-channel: " + path.string());
    if (ct.grid.shape != pet.grid.shape)
        throw IoError("shape mismatch between CT and PET: " + ct_path.string() + " is (" +
                      std::to_string(ct.grid.shape[0]) + "," + std::to_string(ct.grid.shape[1]) +
                      "," + std::to_string(ct.grid.shape[2]) + "), " + pet_path.string() +
                      " is (" + std::to_string(pet.grid.shape[0]) + "," +
                      std::to_string(pet.grid.shape[1]) + "," +
                      std::to_string(pet.grid.shape[2]) + ")");

    Volume v;
    v.grid = ct.grid;
    v.ct = std::move(ct.data);
    v.pet = std::move(pet.data);
    validate_volume(v);
    return v;
}

void save_volume(const Volume& v, const std::filesystem::path& path) {
    validate_volume(v);
    auto [ct_path, pet_path] = modality_pair(path);
    nifti::Image img;
    img.grid = v.grid;
    img.channels = 1;
    img.data = v.ct;
    nifti::write(ct_path, img, nifti::DataType::float32);
    img.data = v.pet;
    nifti::write(pet_path, img, nifti::DataType::float32);
}

LabelMap load_label_map(const std::filesystem::path& path) {
    nifti::Image img = nifti::read(path);
    if (img.channels != 1)
        throw IoError("label map must be single-channel: " + path.string());
    LabelMap m;
    m.grid = img.grid;
    m.labels.resize(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) {
        float f = img.data[i];
        if (f < 0.0f || f > 255.0f || f != std::floor(f))
            throw IoError("label map contains non-integer or out-of-range value at voxel " +
                          std::to_string(i) + ": " + path.string());
        m.labels[i] = static_cast<uint8_t>(f);
    }
    validate_label_map(m);
    return m;
}

void save_label_map(const LabelMap& m, const std::filesystem::path& path) {
    validate_label_map(m);
    nifti::Image img;
    img.grid = m.grid;
    img.channels = 1;
    img.data.assign(m.labels.begin(), m.labels.end());
    nifti::write(path, img, nifti::DataType::uint8);
}

Volume load_case_volume(const DatasetManifest& m, const CaseRecord& rec) {
    return load_volume(m.resolve(rec.volume_path));
}

LabelMap load_case_lesion(const DatasetManifest& m, const CaseRecord& rec) {
    return load_label_map(m.resolve(rec.lesion_mask_path));
}

std::optional<LabelMap> load_case_organs(const DatasetManifest& m, const CaseRecord& rec) {
    if (!rec.has_organ_map()) return std::nullopt;
    return load_label_map(m.resolve(rec.organ_map_path));
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

namespace {

std::vector<float> map_window(const std::vector<float>& x, float lo, float hi, bool forward) {
    std::vector<float> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i]))
            throw ValidationError("non-finite value at voxel " + std::to_string(i));
        out[i] = forward ? normalize_value(x[i], lo, hi) : denormalize_value(x[i], lo, hi);
    }
    return out;
}

} // namespace

std::vector<float> normalize_ct(const std::vector<float>& hu, float lo, float hi) {
    return map_window(hu, lo, hi, true);
}

std::vector<float> normalize_pet(const std::vector<float>& suv, float lo, float hi) {
    for (size_t i = 0; i < suv.size(); ++i)
        if (suv[i] < 0.0f)
            throw ValidationError("pet channel contains negative value at voxel " +
                                  std::to_string(i));
    return map_window(suv, lo, hi, true);
}

std::vector<float> denormalize_ct(const std::vector<float>& v, float lo, float hi) {
    return map_window(v, lo, hi, false);
}

std::vector<float> denormalize_pet(const std::vector<float>& v, float lo, float hi) {
    return map_window(v, lo, hi, false);
}

// ---------------------------------------------------------------------------
// Patching / downsampling
// ---------------------------------------------------------------------------

std::pair<Volume, LabelMap> extract_patch(const Volume& v, const LabelMap& m,
                                          std::array<int, 3> center,
                                          std::array<int, 3> size) {
    if (v.grid.shape != m.grid.shape)
        throw ValidationError("extract_patch: volume and mask grids differ");
    for (int a = 0; a < 3; ++a)
        if (size[a] <= 0)
            throw ValidationError("extract_patch: non-positive patch size");

    Grid pg;
    pg.shape = size;
    pg.spacing = v.grid.spacing;

    Volume pv;
    pv.grid = pg;
    pv.ct.assign(pg.voxels(), kCtWindowLo);
    pv.pet.assign(pg.voxels(), 0.0f);
    LabelMap pm;
    pm.grid = pg;
    pm.labels.assign(pg.voxels(), 0);

    std::array<int, 3> start;
    for (int a = 0; a < 3; ++a) start[a] = center[a] - size[a] / 2;

    const auto& src = v.grid;
    for (int i = 0; i < size[0]; ++i) {
        int si = start[0] + i;
        if (si < 0 || si >= src.shape[0]) continue;
        for (int j = 0; j < size[1]; ++j) {
            int sj = start[1] + j;
            if (sj < 0 || sj >= src.shape[1]) continue;
            int k0 = std::max(0, -start[2]);
            int k1 = std::min(size[2], src.shape[2] - start[2]);
            if (k0 >= k1) continue;
            size_t dst = pg.index(i, j, k0);
            size_t s = src.index(si, sj, start[2] + k0);
            std::copy_n(v.ct.begin() + s, k1 - k0, pv.ct.begin() + dst);
            std::copy_n(v.pet.begin() + s, k1 - k0, pv.pet.begin() + dst);
            std::copy_n(m.labels.begin() + s, k1 - k0, pm.labels.begin() + dst);
        }
    }
    return {std::move(pv), std::move(pm)};
}

LabelMap downsample_mask(const LabelMap& m, std::array<int, 3> factor) {
    validate_label_map(m);
    for (int a = 0; a < 3; ++a) {
        if (factor[a] <= 0)
            throw ValidationError("downsample_mask: non-positive factor");
        if (m.grid.shape[a] % factor[a] != 0)
            throw ValidationError("downsample_mask: dim " + std::to_string(a) + " (" +
                                  std::to_string(m.grid.shape[a]) +
                                  ") not divisible by factor " + std::to_string(factor[a]));
    }
    LabelMap out;
    out.grid.shape = {m.grid.shape[0] / factor[0], m.grid.shape[1] / factor[1],
                      m.grid.shape[2] / factor[2]};
    // spacing order is (sx,sy,sz) i.e. (W,H,D) while factor order is (fd,fh,fw)
    out.grid.spacing = {m.grid.spacing[0] * factor[2], m.grid.spacing[1] * factor[1],
                        m.grid.spacing[2] * factor[0]};
    out.labels.resize(out.grid.voxels());
    for (int i = 0; i < out.grid.shape[0]; ++i)
        for (int j = 0; j < out.grid.shape[1]; ++j)
            for (int k = 0; k < out.grid.shape[2]; ++k)
                out.labels[out.grid.index(i, j, k)] =
                    m.labels[m.grid.index(i * factor[0], j * factor[1], k * factor[2])];
    return out;
}

} // namespace petsyn
