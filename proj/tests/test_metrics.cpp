#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "petsyn/common.hpp"
#include "petsyn/metrics.hpp"

using namespace petsyn;

namespace {

LabelMap make_mask(std::array<int, 3> shape, std::array<double, 3> spacing = {1, 1, 1}) {
    LabelMap m;
    m.grid.shape = shape;
    m.grid.spacing = spacing;
    m.labels.assign(m.grid.voxels(), 0);
    return m;
}

LabelMap random_mask(uint64_t seed, std::array<int, 3> shape, double p,
                     std::array<double, 3> spacing = {1, 1, 1}) {
    Rng rng(seed);
    LabelMap m = make_mask(shape, spacing);
    for (auto& l : m.labels) l = rng.bernoulli(p) ? 1 : 0;
    return m;
}

void fill_box(LabelMap& m, std::array<int, 3> lo, std::array<int, 3> hi) {
    for (int i = lo[0]; i < hi[0]; ++i)
        for (int j = lo[1]; j < hi[1]; ++j)
            for (int k = lo[2]; k < hi[2]; ++k) m.labels[m.grid.index(i, j, k)] = 1;
}

// brute-force set-counting dice
double dice_oracle(const LabelMap& a, const LabelMap& b) {
    size_t na = 0, nb = 0, ni = 0;
    for (size_t i = 0; i < a.labels.size(); ++i) {
        if (a.labels[i]) ++na;
        if (b.labels[i]) ++nb;
        if (a.labels[i] && b.labels[i]) ++ni;
    }
    if (na + nb == 0) return 1.0;
    if (na == 0 || nb == 0) return 0.0;
    return 2.0 * double(ni) / double(na + nb);
}

// all-pairs boundary-distance NSD
double nsd_oracle(const LabelMap& a, const LabelMap& b, double tol) {
    auto ba = boundary_voxels(a);
    auto bb = boundary_voxels(b);
    bool ea = std::none_of(a.labels.begin(), a.labels.end(), [](uint8_t v) { return v > 0; });
    bool eb = std::none_of(b.labels.begin(), b.labels.end(), [](uint8_t v) { return v > 0; });
    if (ea && eb) return 1.0;
    if (ea || eb) return 0.0;
    auto sp = a.grid.spacing;
    auto mind2 = [&](const std::array<int, 3>& p, const std::vector<std::array<int, 3>>& set) {
        double best = 1e300;
        for (const auto& q : set) {
            double dz = (p[0] - q[0]) * sp[2];
            double dy = (p[1] - q[1]) * sp[1];
            double dx = (p[2] - q[2]) * sp[0];
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        return best;
    };
    size_t hits = 0;
    for (const auto& p : ba)
        if (mind2(p, bb) <= tol * tol) ++hits;
    for (const auto& p : bb)
        if (mind2(p, ba) <= tol * tol) ++hits;
    return double(hits) / double(ba.size() + bb.size());
}

} // namespace

TEST_CASE("dice basics") {
    auto a = make_mask({6, 6, 6});
    auto b = make_mask({6, 6, 6});
    CHECK(dice(a, b) == 1.0); // both empty

    fill_box(a, {0, 0, 0}, {2, 2, 2});
    CHECK(dice(a, b) == 0.0); // one empty
    CHECK(dice(a, a) == 1.0);

    fill_box(b, {4, 4, 4}, {6, 6, 6});
    CHECK(dice(a, b) == 0.0); // disjoint

    // |A|=2, |B|=4, overlap 2 -> 2*2/6
    auto x = make_mask({4, 4, 4});
    auto y = make_mask({4, 4, 4});
    x.labels[0] = x.labels[1] = 1;
    y.labels[0] = y.labels[1] = y.labels[2] = y.labels[3] = 1;
    CHECK(dice(x, y) == doctest::Approx(2.0 * 2.0 / 6.0));

    auto wrong = make_mask({5, 5, 5});
    CHECK_THROWS_AS(dice(a, wrong), ValidationError);
}

TEST_CASE("dice matches brute-force oracle on random masks") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        std::array<int, 3> shape = {int(rng.uniform_int(4, 8)), int(rng.uniform_int(4, 8)),
                                    int(rng.uniform_int(4, 8))};
        auto a = random_mask(1000 + trial, shape, rng.uniform(0.0, 0.6));
        auto b = random_mask(2000 + trial, shape, rng.uniform(0.0, 0.6));
        CHECK(std::abs(dice(a, b) - dice_oracle(a, b)) < 1e-12);
        // symmetry
        CHECK(dice(a, b) == dice(b, a));
    }
}

TEST_CASE("dice invariant under shared voxel permutation (flips)") {
    auto flip_d = [](const LabelMap& m) {
        LabelMap out = m;
        for (int i = 0; i < m.grid.shape[0]; ++i)
            for (int j = 0; j < m.grid.shape[1]; ++j)
                for (int k = 0; k < m.grid.shape[2]; ++k)
                    out.labels[out.grid.index(m.grid.shape[0] - 1 - i, j, k)] =
                        m.labels[m.grid.index(i, j, k)];
        return out;
    };
    for (int trial = 0; trial < 20; ++trial) {
        auto a = random_mask(3000 + trial, {6, 5, 7}, 0.3);
        auto b = random_mask(4000 + trial, {6, 5, 7}, 0.3);
        CHECK(dice(flip_d(a), flip_d(b)) == doctest::Approx(dice(a, b)).epsilon(1e-15));
    }
}

TEST_CASE("nsd basics") {
    auto a = make_mask({8, 8, 8});
    auto b = make_mask({8, 8, 8});
    CHECK(nsd(a, b, 1.0) == 1.0); // both empty
    fill_box(a, {1, 1, 1}, {4, 4, 4});
    CHECK(nsd(a, b, 1.0) == 0.0); // one empty
    CHECK(nsd(a, a, 0.0) == 1.0); // identical, any tolerance

    fill_box(b, {1, 1, 2}, {4, 4, 5}); // offset by 1 voxel along W
    CHECK(nsd(a, b, 1.0) == doctest::Approx(nsd_oracle(a, b, 1.0)));

    // tolerance = grid diagonal -> 1.0 for any two non-empty masks
    double diag = std::sqrt(3.0) * 8.0;
    CHECK(nsd(a, b, diag) == 1.0);

    CHECK_THROWS_AS(nsd(a, b, -0.5), ValidationError);
}

TEST_CASE("nsd matches all-pairs oracle on random masks (anisotropic spacing)") {
    Rng rng(77);
    for (int trial = 0; trial < 60; ++trial) {
        std::array<int, 3> shape = {int(rng.uniform_int(4, 16)), int(rng.uniform_int(4, 12)),
                                    int(rng.uniform_int(4, 12))};
        std::array<double, 3> spacing = {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0),
                                         rng.uniform(0.5, 2.0)};
        auto a = random_mask(5000 + trial, shape, 0.25, spacing);
        auto b = random_mask(6000 + trial, shape, 0.25, spacing);
        double tol = rng.uniform(0.0, 4.0);
        CHECK(std::abs(nsd(a, b, tol) - nsd_oracle(a, b, tol)) < 1e-9);
        CHECK(nsd(a, b, tol) == doctest::Approx(nsd(b, a, tol)).epsilon(1e-15));
    }
}

TEST_CASE("nsd monotone non-decreasing in tolerance") {
    auto a = random_mask(81, {10, 10, 10}, 0.2);
    auto b = random_mask(82, {10, 10, 10}, 0.2);
    double prev = -1.0;
    for (double tol : {0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0}) {
        double v = nsd(a, b, tol);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("evaluate produces per-case metrics, means, and sorted order") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "petsyn_test_evaluate";
    fs::remove_all(dir);
    fs::create_directories(dir / "truth");
    fs::create_directories(dir / "pred");

    DatasetManifest truth, pred;
    truth.root = dir / "truth";
    pred.root = dir / "pred";
    for (const char* id : {"case_b", "case_a", "case_c"}) {
        auto m = random_mask(hash_string(id), {6, 6, 6}, 0.3);
        save_label_map(m, truth.root / (std::string(id) + "_lesion.nii.gz"));
        save_label_map(m, pred.root / (std::string(id) + "_lesion.nii.gz"));
        CaseRecord rec;
        rec.case_id = id;
        rec.volume_path = "";
        rec.volume_path = std::string(id) + "_ct.nii.gz";
        rec.lesion_mask_path = std::string(id) + "_lesion.nii.gz";
        rec.split = CaseRecord::Split::val;
        truth.cases.push_back(rec);
        pred.cases.push_back(rec);
    }

    MetricsReport r = evaluate(pred, truth, 1.0);
    REQUIRE(r.per_case.size() == 3);
    CHECK(r.per_case[0].case_id == "case_a");
    CHECK(r.per_case[2].case_id == "case_c");
    CHECK(r.mean_dsc == doctest::Approx(1.0));
    CHECK(r.mean_nsd == doctest::Approx(1.0));

    // all-background predictions on lesioned truths -> mean dsc 0
    for (const auto& c : pred.cases) {
        auto empty = make_mask({6, 6, 6});
        save_label_map(empty, pred.root / c.lesion_mask_path);
    }
    MetricsReport r0 = evaluate(pred, truth, 1.0);
    CHECK(r0.mean_dsc == 0.0);

    // self-consistency of means
    double s = 0;
    for (const auto& c : r0.per_case) s += c.dsc;
    CHECK(r0.mean_dsc == doctest::Approx(s / 3.0));

    // missing prediction is a hard error
    pred.cases.pop_back();
    CHECK_THROWS_AS(evaluate(pred, truth, 1.0), ValidationError);

    // serialization round trip
    save_metrics_json(r, dir / "m.json");
    save_metrics_csv(r, dir / "m.csv");
    MetricsReport rl = load_metrics_json(dir / "m.json");
    CHECK(rl.mean_dsc == doctest::Approx(r.mean_dsc));
    CHECK(rl.per_case.size() == r.per_case.size());
}
