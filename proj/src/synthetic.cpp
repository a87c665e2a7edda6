#include "nob/synthetic.hpp"

#include <cmath>

#include "nob/errors.hpp"
#include "nob/rng.hpp"

namespace nob::data {

namespace {

// 7-point Laplacian applied to interior unknowns (m = n-2 per axis).
void apply_laplacian(const std::vector<double>& u, std::vector<double>& out, int m, double ax,
                     double ay, double az) {
    const double diag = 2.0 * (ax + ay + az);
    auto at = [&](int i, int j, int k) -> double {
        if (i < 0 || j < 0 || k < 0 || i >= m || j >= m || k >= m) return 0.0;
        return u[static_cast<std::size_t>((i * m + j) * m + k)];
    };
    std::size_t idx = 0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k, ++idx)
                out[idx] = diag * u[idx] - ax * (at(i - 1, j, k) + at(i + 1, j, k)) -
                           ay * (at(i, j - 1, k) + at(i, j + 1, k)) - az * (at(i, j, k - 1) + at(i, j, k + 1));
}

}  // namespace

std::vector<double> solve_poisson_box(int n, double f0, double h) {
    if (n < 9) throw ConfigError("solve_poisson_box: need at least 9 nodes per axis");
    if (h <= 0.0) throw ConfigError("solve_poisson_box: box height must be positive");
    const int m = n - 2;
    const double hx = 1.0 / (n - 1), hz = h / (n - 1);
    const double ax = 1.0 / (hx * hx), ay = ax, az = 1.0 / (hz * hz);
    const std::size_t nn = static_cast<std::size_t>(m) * m * m;

    std::vector<double> u(nn, 0.0), r(nn, f0), p(nn, f0), ap(nn);
    double rr = 0.0;
    for (double v : r) rr += v * v;
    const long long max_iter = 10LL * n * n * n;
    long long iter = 0;
    while (std::sqrt(rr) >= 1e-8) {
        if (iter++ >= max_iter)
            throw NumericError("synthetic generation: conjugate gradient did not converge");
        apply_laplacian(p, ap, m, ax, ay, az);
        double pap = 0.0;
        for (std::size_t i = 0; i < nn; ++i) pap += p[i] * ap[i];
        const double alpha = rr / pap;
        double rr_new = 0.0;
        for (std::size_t i = 0; i < nn; ++i) {
            u[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            rr_new += r[i] * r[i];
        }
        const double beta = rr_new / rr;
        for (std::size_t i = 0; i < nn; ++i) p[i] = r[i] + beta * p[i];
        rr = rr_new;
    }

    // embed interior solution into the full node grid (boundary zeros)
    std::vector<double> full(static_cast<std::size_t>(n) * n * n, 0.0);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                full[static_cast<std::size_t>(((i + 1) * n + j + 1) * n + k + 1)] =
                    u[static_cast<std::size_t>((i * m + j) * m + k)];
    return full;
}

double poisson_residual_inf(const std::vector<double>& full, int n, double f0, double h) {
    const int m = n - 2;
    const double hx = 1.0 / (n - 1), hz = h / (n - 1);
    const double ax = 1.0 / (hx * hx), ay = ax, az = 1.0 / (hz * hz);
    std::vector<double> u(static_cast<std::size_t>(m) * m * m), au(u.size());
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            for (int k = 0; k < m; ++k)
                u[static_cast<std::size_t>((i * m + j) * m + k)] =
                    full[static_cast<std::size_t>(((i + 1) * n + j + 1) * n + k + 1)];
    apply_laplacian(u, au, m, ax, ay, az);
    double worst = 0.0;
    for (double v : au) worst = std::max(worst, std::abs(v - f0));
    return worst;
}

void gen_synthetic(const GenConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.grid_n < 9) throw ConfigError("gen_synthetic: grid_n must be >= 9");
    if (cfg.n_samples < 1) throw ConfigError("gen_synthetic: n_samples must be >= 1");
    Rng rng(cfg.seed);
    const int n = cfg.grid_n, m = n - 2;

    Manifest mf;
    mf.name = cfg.name;
    mf.n_samples = cfg.n_samples;
    mf.geo_dim = 2;
    mf.load_dim = cfg.loads_T;
    mf.field_channels = 1;
    mf.grid_shape = {8, 8, 8};
    mf.grid_lo = {0.0, 0.0, 0.0};
    mf.grid_hi = {1.0, 1.0, cfg.h_max};
    mf.normalized_outputs = true;
    write_manifest(out_dir, mf);

    for (int s = 0; s < cfg.n_samples; ++s) {
        const double f0 = rng.uniform(cfg.f0_min, cfg.f0_max);
        const double h = rng.uniform(cfg.h_min, cfg.h_max);
        std::vector<double> wiggle(3);
        for (auto& c : wiggle) c = rng.uniform(-0.2, 0.2);

        const std::vector<double> full = solve_poisson_box(n, f0, h);
        Sample sample;
        sample.n = m * m * m;
        sample.coords.reserve(static_cast<std::size_t>(sample.n) * 3);
        sample.field.reserve(static_cast<std::size_t>(sample.n));
        const double hx = 1.0 / (n - 1), hz = h / (n - 1);
        for (int i = 1; i < n - 1; ++i)
            for (int j = 1; j < n - 1; ++j)
                for (int k = 1; k < n - 1; ++k) {
                    sample.coords.push_back(i * hx);
                    sample.coords.push_back(j * hx);
                    sample.coords.push_back(k * hz);
                    sample.field.push_back(full[static_cast<std::size_t>((i * n + j) * n + k)]);
                }
        sample.params = {f0, h};
        if (cfg.loads_T > 0) {
            // smooth ramp ending exactly at f0 (the sin terms vanish at the end)
            sample.loads.resize(static_cast<std::size_t>(cfg.loads_T));
            for (int t = 0; t < cfg.loads_T; ++t) {
                const double s01 = static_cast<double>(t) / (cfg.loads_T - 1);
                double w = 0.0;
                for (int kk = 0; kk < 3; ++kk) w += wiggle[static_cast<std::size_t>(kk)] * std::sin((kk + 1) * M_PI * s01);
                sample.loads[static_cast<std::size_t>(t)] = f0 * (s01 + w);
            }
        }
        if (cfg.knn_k > 0) {
            geom::PointCloud cloud{sample.points()};
            geom::Graph g = geom::knn_neighbors(cloud, cfg.knn_k);
            for (int i = 0; i < g.n; ++i)
                for (int t = g.offsets[i]; t < g.offsets[i + 1]; ++t)
                    sample.edges.emplace_back(static_cast<std::uint32_t>(g.targets[static_cast<std::size_t>(t)]),
                                              static_cast<std::uint32_t>(i));
            sample.has_edges = true;
        }
        write_sample(sample_dir(out_dir, s), sample);
    }
}

}  // namespace nob::data
