#pragma once

#include <filesystem>

#include "nob/data.hpp"

namespace nob::data {

// Parametric heat-conduction generator: for each sample draws
// p = (source strength f0 in [0.5,2], box height h in [0.5,1.5]), solves
// -lap u = f0 on [0,1]^2 x [0,h] with zero Dirichlet boundary by
// second-order finite differences and conjugate gradients, and stores the
// interior nodes as the point cloud with u as the field.
struct GenConfig {
    int n_samples = 200;
    int grid_n = 17;  // nodes per axis, including boundary
    double f0_min = 0.5, f0_max = 2.0;
    double h_min = 0.5, h_max = 1.5;
    std::uint64_t seed = 0;
    int loads_T = 0;  // when > 0, emit a T-step smooth load sequence ending at f0
    int knn_k = 6;    // precomputed graph connectivity (0 disables edges)
    std::string name = "synthetic-heat";
};

// Dense FD Poisson solve used by the generator; returns the full n^3 node
// field (boundary zeros included). Exposed for oracle tests.
std::vector<double> solve_poisson_box(int n, double f0, double h);

// Residual ||A u - f||_inf of a solution on its own grid.
double poisson_residual_inf(const std::vector<double>& u, int n, double f0, double h);

void gen_synthetic(const GenConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace nob::data
