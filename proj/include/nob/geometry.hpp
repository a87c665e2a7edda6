#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace nob::geom {

using Vec3 = std::array<double, 3>;

struct PointCloud {
    std::vector<Vec3> pts;

    int size() const { return static_cast<int>(pts.size()); }
};

// Compressed neighbor lists: neighbors of node i are
// targets[offsets[i] .. offsets[i+1]).
struct Graph {
    int n = 0;
    std::vector<int> offsets;
    std::vector<int> targets;

    int degree(int i) const { return offsets[i + 1] - offsets[i]; }
    long long edge_count() const { return static_cast<long long>(targets.size()); }
};

struct RegularGrid {
    std::array<int, 3> extents{2, 2, 2};
    Vec3 lo{0.0, 0.0, 0.0};
    Vec3 hi{1.0, 1.0, 1.0};

    void validate() const;
    long long node_count() const { return static_cast<long long>(extents[0]) * extents[1] * extents[2]; }
    long long cell_count() const {
        return static_cast<long long>(extents[0] - 1) * (extents[1] - 1) * (extents[2] - 1);
    }
    Vec3 node_coord(int i, int j, int k) const;
    std::vector<Vec3> node_coords() const;
    Vec3 cell_size() const;
};

struct GeoDescriptor {
    Vec3 centroid{};
    Vec3 bbox{};                          // max - min per axis
    std::array<std::array<double, 3>, 3> axes{};  // rows: PCA axes, descending eigenvalue
    Vec3 eigenvalues{};                   // descending, non-negative

    // fixed ordering: centroid, bbox, row-major axes, eigenvalues (18 values)
    std::vector<double> to_vector() const;
};

// Neighbors of each query among the cloud points within Euclidean distance r
// (inclusive). Hash-grid accelerated, result identical to a brute-force scan;
// neighbor lists are sorted by point index.
Graph radius_neighbors(const PointCloud& cloud, const std::vector<Vec3>& queries, double r);

// k nearest distinct points of each cloud point, ties broken by lower index.
Graph knn_neighbors(const PointCloud& cloud, int k);

Graph add_self_loops(const Graph& g);

// Occupancy over grid cells ((nx-1)*(ny-1)*(nz-1) values, row-major); a point
// on a max bound clamps into the last cell.
std::vector<std::uint8_t> voxelize(const PointCloud& cloud, const RegularGrid& grid);

GeoDescriptor descriptors(const PointCloud& cloud);

struct BoxTransform {
    Vec3 scale{1.0, 1.0, 1.0};
    Vec3 offset{0.0, 0.0, 0.0};
    std::array<bool, 3> degenerate{false, false, false};  // zero-extent source axis mapped to midpoint
    Vec3 degenerate_src{0.0, 0.0, 0.0};                   // original coordinate on degenerate axes

    Vec3 apply(const Vec3& p) const;
    Vec3 invert(const Vec3& p) const;
};

// Per-axis affine map of the cloud's bounding box onto the target box.
std::pair<PointCloud, BoxTransform> normalize_box(const PointCloud& cloud, const Vec3& target_lo,
                                                  const Vec3& target_hi);

}  // namespace nob::geom
