#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "petsyn/common.hpp"
#include "petsyn/phantom.hpp"
#include "petsyn/planner.hpp"

using namespace petsyn;
namespace fs = std::filesystem;

namespace {

DatasetManifest tiny_dataset(std::array<int, 3> shape, const std::string& tag,
                             int n_train = 1) {
    fs::path dir = fs::temp_directory_path() / ("petsyn_test_plan_" + tag);
    fs::remove_all(dir);
    PhantomSpec s;
    s.grid.shape = shape;
    s.seed = hash_string(tag);
    return generate_dataset(n_train, 1, s, dir);
}

Fingerprint fp_of_shape(std::array<int, 3> shape) {
    Fingerprint fp;
    fp.median_shape = shape;
    fp.median_spacing = {1, 1, 1};
    fp.ct_percentiles = {-800, 300};
    fp.pet_percentiles = {0.1, 12.0};
    fp.case_count = 5;
    return fp;
}

} // namespace

TEST_CASE("fingerprint of a single case is that case") {
    auto m = tiny_dataset({48, 48, 48}, "single");
    Fingerprint fp = extract_fingerprint(m);
    CHECK(fp.median_shape == std::array<int, 3>{48, 48, 48});
    CHECK(fp.median_spacing[0] == doctest::Approx(1.0));
    CHECK(fp.case_count == 1);
    CHECK(fp.ct_percentiles[0] < fp.ct_percentiles[1]);
    CHECK(fp.pet_percentiles[0] < fp.pet_percentiles[1]);
    // foreground-restricted CT percentiles sit in tissue range, far from air
    CHECK(fp.ct_percentiles[0] > -500.0);

    Fingerprint fp2 = extract_fingerprint(m);
    CHECK(fp.median_shape == fp2.median_shape);
    CHECK(fp.ct_percentiles == fp2.ct_percentiles);
    CHECK(fp.pet_percentiles == fp2.pet_percentiles);
}

TEST_CASE("median of three depths 40/48/60 is 48") {
    fs::path dir = fs::temp_directory_path() / "petsyn_test_plan_median3";
    fs::remove_all(dir);
    fs::create_directories(dir / "cases");
    DatasetManifest m;
    m.root = dir;
    int depths[3] = {60, 40, 48};
    for (int i = 0; i < 3; ++i) {
        PhantomSpec s;
        s.grid.shape = {depths[i], 44, 44};
        s.seed = 100 + i;
        PhantomCase pc = generate_phantom(s);
        CaseRecord rec;
        rec.case_id = "train_" + std::to_string(i);
        rec.volume_path = "cases/c" + std::to_string(i) + "_ct.nii.gz";
        rec.lesion_mask_path = "cases/c" + std::to_string(i) + "_lesion.nii.gz";
        rec.organ_map_path = "cases/c" + std::to_string(i) + "_organs.nii.gz";
        save_volume(pc.volume, m.resolve(rec.volume_path));
        save_label_map(pc.lesion_mask, m.resolve(rec.lesion_mask_path));
        save_label_map(pc.organ_map_truth, m.resolve(rec.organ_map_path));
        m.cases.push_back(rec);
    }
    Fingerprint fp = extract_fingerprint(m);
    CHECK(fp.median_shape[0] == 48);

    // empty manifest is an error
    DatasetManifest empty;
    CHECK_THROWS_AS(extract_fingerprint(empty), ValidationError);
}

TEST_CASE("paper profile is the pinned configuration") {
    for (auto shape : {std::array<int, 3>{48, 48, 48}, std::array<int, 3>{200, 160, 140}}) {
        Plan p = make_plan(fp_of_shape(shape), PlanProfile::paper);
        CHECK(p.patch_size == std::array<int, 3>{128, 160, 112});
        CHECK(p.batch_size == 2);
        CHECK(p.epochs == 581);
        validate_plan(p);
    }
}

TEST_CASE("desk profile patch rule") {
    Plan p = make_plan(fp_of_shape({40, 48, 36}), PlanProfile::desk);
    CHECK(p.patch_size == std::array<int, 3>{40, 48, 32});
    CHECK(p.pool_depth == std::array<int, 3>{3, 3, 3});
    CHECK(p.batch_size == 2);
    CHECK(p.epochs == 20);
    CHECK(p.base_channels == 8);

    Plan q = make_plan(fp_of_shape({48, 48, 48}), PlanProfile::desk);
    CHECK(q.patch_size == std::array<int, 3>{48, 48, 48});

    // 64-cap
    Plan big = make_plan(fp_of_shape({200, 100, 64}), PlanProfile::desk);
    CHECK(big.patch_size == std::array<int, 3>{64, 64, 64});

    // too small
    CHECK_THROWS_AS(make_plan(fp_of_shape({7, 48, 48}), PlanProfile::desk), ValidationError);
}

TEST_CASE("divisibility invariant holds for randomized fingerprints") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<int, 3> shape = {int(rng.uniform_int(8, 200)), int(rng.uniform_int(8, 200)),
                                    int(rng.uniform_int(8, 200))};
        Plan p = make_plan(fp_of_shape(shape), PlanProfile::desk);
        for (int a = 0; a < 3; ++a) {
            CHECK(p.patch_size[a] % (1 << p.pool_depth[a]) == 0);
            CHECK(p.patch_size[a] >= 8);
        }
    }
}

TEST_CASE("make_plan is monotone in median shape") {
    Rng rng(2025);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<int, 3> a = {int(rng.uniform_int(8, 100)), int(rng.uniform_int(8, 100)),
                                int(rng.uniform_int(8, 100))};
        std::array<int, 3> b = {a[0] + int(rng.uniform_int(0, 40)),
                                a[1] + int(rng.uniform_int(0, 40)),
                                a[2] + int(rng.uniform_int(0, 40))};
        Plan pa = make_plan(fp_of_shape(a), PlanProfile::desk);
        Plan pb = make_plan(fp_of_shape(b), PlanProfile::desk);
        for (int ax = 0; ax < 3; ++ax) CHECK(pb.patch_size[ax] >= pa.patch_size[ax]);
    }
}

TEST_CASE("plan and fingerprint serialize to JSON and back") {
    fs::path dir = fs::temp_directory_path() / "petsyn_test_plan_io";
    fs::remove_all(dir);
    fs::create_directories(dir);
    Fingerprint fp = fp_of_shape({40, 44, 48});
    save_fingerprint(fp, dir / "fingerprint.json");
    Fingerprint fl = load_fingerprint(dir / "fingerprint.json");
    CHECK(fl.median_shape == fp.median_shape);
    CHECK(fl.ct_percentiles == fp.ct_percentiles);

    Plan p = make_plan(fp, PlanProfile::desk);
    save_plan(p, dir / "plan.json");
    Plan pl = load_plan(dir / "plan.json");
    CHECK(pl.patch_size == p.patch_size);
    CHECK(pl.pool_depth == p.pool_depth);
    CHECK(pl.ct_window == p.ct_window);

    // windows come from percentiles, clamped into core defaults
    CHECK(p.ct_window[0] == doctest::Approx(-800.0f));
    CHECK(p.ct_window[1] == doctest::Approx(300.0f));
    CHECK(p.pet_window[1] == doctest::Approx(12.0f));
}
