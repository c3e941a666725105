#include "petsyn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace petsyn {

using nlohmann::json;

namespace {

void check_same_grid(const LabelMap& a, const LabelMap& b) {
    if (a.grid.shape != b.grid.shape)
        throw ValidationError("metric inputs are on different grids");
}

bool any_foreground(const LabelMap& m) {
    return std::any_of(m.labels.begin(), m.labels.end(), [](uint8_t v) { return v > 0; });
}

// Large finite sentinel for "no seed yet": keeps the envelope intersection
// formula below free of inf-inf NaNs on seedless scan lines.
constexpr double kFar = 1e15;

// 1D lower-envelope squared distance transform (Felzenszwalb & Huttenlocher),
// with an anisotropic step so distances come out in mm.
void edt_1d(const double* f, double* d, int n, double step) {
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    double step2 = step * step;
    for (int q = 1; q < n; ++q) {
        double s;
        while (true) {
            int p = v[k];
            s = ((f[q] + step2 * q * q) - (f[p] + step2 * p * p)) / (2.0 * step2 * (q - p));
            if (s > z[k]) break;
            --k;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        int p = v[k];
        d[q] = step2 * (q - p) * (q - p) + f[p];
    }
}

// Exact squared Euclidean distance (mm^2) to the nearest seed voxel.
std::vector<double> edt_sq(const Grid& g, const std::vector<uint8_t>& seed) {
    int D = g.shape[0], H = g.shape[1], W = g.shape[2];
    std::vector<double> dist(g.voxels());
    for (size_t i = 0; i < dist.size(); ++i) dist[i] = seed[i] ? 0.0 : kFar;

    // pass along W (spacing sx), then H (sy), then D (sz)
    std::vector<double> f(std::max({D, H, W})), d(std::max({D, H, W}));
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < H; ++j) {
            size_t base = g.index(i, j, 0);
            for (int k = 0; k < W; ++k) f[k] = dist[base + k];
            edt_1d(f.data(), d.data(), W, g.spacing[0]);
            for (int k = 0; k < W; ++k) dist[base + k] = d[k];
        }
    for (int i = 0; i < D; ++i)
        for (int k = 0; k < W; ++k) {
            for (int j = 0; j < H; ++j) f[j] = dist[g.index(i, j, k)];
            edt_1d(f.data(), d.data(), H, g.spacing[1]);
            for (int j = 0; j < H; ++j) dist[g.index(i, j, k)] = d[j];
        }
    for (int j = 0; j < H; ++j)
        for (int k = 0; k < W; ++k) {
            for (int i = 0; i < D; ++i) f[i] = dist[g.index(i, j, k)];
            edt_1d(f.data(), d.data(), D, g.spacing[2]);
            for (int i = 0; i < D; ++i) dist[g.index(i, j, k)] = d[i];
        }
    return dist;
}

} // namespace

std::vector<std::array<int, 3>> boundary_voxels(const LabelMap& m) {
    std::vector<std::array<int, 3>> out;
    int D = m.grid.shape[0], H = m.grid.shape[1], W = m.grid.shape[2];
    auto fg = [&](int i, int j, int k) {
        if (i < 0 || i >= D || j < 0 || j >= H || k < 0 || k >= W) return false;
        return m.labels[m.grid.index(i, j, k)] > 0;
    };
    for (int i = 0; i < D; ++i)
        for (int j = 0; j < H; ++j)
            for (int k = 0; k < W; ++k) {
                if (!fg(i, j, k)) continue;
                if (!fg(i - 1, j, k) || !fg(i + 1, j, k) || !fg(i, j - 1, k) ||
                    !fg(i, j + 1, k) || !fg(i, j, k - 1) || !fg(i, j, k + 1))
                    out.push_back({i, j, k});
            }
    return out;
}

double dice(const LabelMap& a, const LabelMap& b) {
    check_same_grid(a, b);
    size_t na = 0, nb = 0, ni = 0;
    for (size_t i = 0; i < a.labels.size(); ++i) {
        bool fa = a.labels[i] > 0, fb = b.labels[i] > 0;
        na += fa;
        nb += fb;
        ni += fa && fb;
    }
    if (na == 0 && nb == 0) return 1.0;
    if (na == 0 || nb == 0) return 0.0;
    return 2.0 * static_cast<double>(ni) / static_cast<double>(na + nb);
}

double nsd(const LabelMap& a, const LabelMap& b, double tolerance_mm) {
    check_same_grid(a, b);
    if (tolerance_mm < 0.0) throw ValidationError("nsd: negative tolerance");

    bool ea = !any_foreground(a), eb = !any_foreground(b);
    if (ea && eb) return 1.0;
    if (ea || eb) return 0.0;

    auto ba = boundary_voxels(a);
    auto bb = boundary_voxels(b);

    const Grid& g = a.grid;
    std::vector<uint8_t> seed_a(g.voxels(), 0), seed_b(g.voxels(), 0);
    for (const auto& p : ba) seed_a[g.index(p[0], p[1], p[2])] = 1;
    for (const auto& p : bb) seed_b[g.index(p[0], p[1], p[2])] = 1;
    std::vector<double> dist_to_b = edt_sq(g, seed_b);
    std::vector<double> dist_to_a = edt_sq(g, seed_a);

    double tol2 = tolerance_mm * tolerance_mm;
    size_t hits = 0;
    for (const auto& p : ba)
        if (dist_to_b[g.index(p[0], p[1], p[2])] <= tol2) ++hits;
    for (const auto& p : bb)
        if (dist_to_a[g.index(p[0], p[1], p[2])] <= tol2) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ba.size() + bb.size());
}

MetricsReport evaluate(const DatasetManifest& pred, const DatasetManifest& truth,
                       double tolerance_mm) {
    MetricsReport r;
    r.tolerance_mm = tolerance_mm;
    std::vector<const CaseRecord*> truth_cases;
    for (const auto& c : truth.cases) truth_cases.push_back(&c);
    std::sort(truth_cases.begin(), truth_cases.end(),
              [](const CaseRecord* x, const CaseRecord* y) { return x->case_id < y->case_id; });

    for (const CaseRecord* tc : truth_cases) {
        const CaseRecord* pc = pred.find(tc->case_id);
        if (!pc)
            throw ValidationError("missing prediction for truth case '" + tc->case_id + "'");
        LabelMap t = load_case_lesion(truth, *tc);
        LabelMap p = load_case_lesion(pred, *pc);
        CaseMetrics cm;
        cm.case_id = tc->case_id;
        cm.dsc = dice(p, t);
        cm.nsd = nsd(p, t, tolerance_mm);
        r.per_case.push_back(cm);
    }
    if (!r.per_case.empty()) {
        for (const auto& cm : r.per_case) {
            r.mean_dsc += cm.dsc;
            r.mean_nsd += cm.nsd;
        }
        r.mean_dsc /= static_cast<double>(r.per_case.size());
        r.mean_nsd /= static_cast<double>(r.per_case.size());
    }
    return r;
}

void save_metrics_json(const MetricsReport& r, const std::filesystem::path& path) {
    json j;
    j["tolerance_mm"] = r.tolerance_mm;
    j["mean_dsc"] = r.mean_dsc;
    j["mean_nsd"] = r.mean_nsd;
    json jc = json::array();
    for (const auto& cm : r.per_case)
        jc.push_back({{"case_id", cm.case_id}, {"dsc", cm.dsc}, {"nsd", cm.nsd}});
    j["per_case"] = jc;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write metrics: " + path.string());
    out << j.dump(2) << "\n";
}

void save_metrics_csv(const MetricsReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write metrics: " + path.string());
    out << "case_id,dsc,nsd\n";
    out.precision(10);
    for (const auto& cm : r.per_case)
        out << cm.case_id << "," << cm.dsc << "," << cm.nsd << "\n";
}

MetricsReport load_metrics_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics: " + path.string());
    json j;
    in >> j;
    MetricsReport r;
    r.tolerance_mm = j.at("tolerance_mm").get<double>();
    r.mean_dsc = j.at("mean_dsc").get<double>();
    r.mean_nsd = j.at("mean_nsd").get<double>();
    for (const auto& jc : j.at("per_case")) {
        CaseMetrics cm;
        cm.case_id = jc.at("case_id").get<std::string>();
        cm.dsc = jc.at("dsc").get<double>();
        cm.nsd = jc.at("nsd").get<double>();
        r.per_case.push_back(cm);
    }
    return r;
}

} // namespace petsyn
