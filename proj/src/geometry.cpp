#include "nob/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "nob/errors.hpp"

namespace nob::geom {

void RegularGrid::validate() const {
    for (int a = 0; a < 3; ++a) {
        if (extents[a] < 2) throw ConfigError("grid extents must be >= 2 per axis");
        if (!(lo[a] < hi[a])) throw ConfigError("grid bounds must satisfy min < max");
    }
}

Vec3 RegularGrid::node_coord(int i, int j, int k) const {
    Vec3 p;
    const int idx[3] = {i, j, k};
    for (int a = 0; a < 3; ++a)
        p[a] = lo[a] + (hi[a] - lo[a]) * static_cast<double>(idx[a]) / static_cast<double>(extents[a] - 1);
    return p;
}

std::vector<Vec3> RegularGrid::node_coords() const {
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(node_count()));
    for (int i = 0; i < extents[0]; ++i)
        for (int j = 0; j < extents[1]; ++j)
            for (int k = 0; k < extents[2]; ++k) out.push_back(node_coord(i, j, k));
    return out;
}

Vec3 RegularGrid::cell_size() const {
    Vec3 s;
    for (int a = 0; a < 3; ++a) s[a] = (hi[a] - lo[a]) / static_cast<double>(extents[a] - 1);
    return s;
}

std::vector<double> GeoDescriptor::to_vector() const {
    std::vector<double> v;
    v.reserve(18);
    for (double x : centroid) v.push_back(x);
    for (double x : bbox) v.push_back(x);
    for (const auto& row : axes)
        for (double x : row) v.push_back(x);
    for (double x : eigenvalues) v.push_back(x);
    return v;
}

namespace {

double dist2(const Vec3& a, const Vec3& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return dx * dx + dy * dy + dz * dz;
}

struct CellKey {
    long long x, y, z;
    bool operator==(const CellKey&) const = default;
};
struct CellHash {
    std::size_t operator()(const CellKey& k) const {
        std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
        h ^= static_cast<std::size_t>(k.y) * 19349663u;
        h ^= static_cast<std::size_t>(k.z) * 83492791u;
        return h;
    }
};

}  // namespace

Graph radius_neighbors(const PointCloud& cloud, const std::vector<Vec3>& queries, double r) {
    if (r <= 0.0) throw ConfigError("radius_neighbors: r must be positive");
    if (cloud.pts.empty()) throw ConfigError("radius_neighbors: empty cloud");

    // uniform hash grid with cell size r
    std::unordered_map<CellKey, std::vector<int>, CellHash> cells;
    auto key_of = [r](const Vec3& p) {
        return CellKey{static_cast<long long>(std::floor(p[0] / r)), static_cast<long long>(std::floor(p[1] / r)),
                       static_cast<long long>(std::floor(p[2] / r))};
    };
    for (int i = 0; i < cloud.size(); ++i) cells[key_of(cloud.pts[static_cast<std::size_t>(i)])].push_back(i);

    Graph g;
    g.n = static_cast<int>(queries.size());
    g.offsets.assign(static_cast<std::size_t>(g.n) + 1, 0);
    const double r2 = r * r;
    std::vector<int> hits;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        hits.clear();
        const CellKey c = key_of(queries[q]);
        for (long long dx = -1; dx <= 1; ++dx)
            for (long long dy = -1; dy <= 1; ++dy)
                for (long long dz = -1; dz <= 1; ++dz) {
                    auto it = cells.find(CellKey{c.x + dx, c.y + dy, c.z + dz});
                    if (it == cells.end()) continue;
                    for (int i : it->second)
                        if (dist2(queries[q], cloud.pts[static_cast<std::size_t>(i)]) <= r2) hits.push_back(i);
                }
        std::sort(hits.begin(), hits.end());
        g.targets.insert(g.targets.end(), hits.begin(), hits.end());
        g.offsets[q + 1] = static_cast<int>(g.targets.size());
    }
    return g;
}

Graph knn_neighbors(const PointCloud& cloud, int k) {
    const int n = cloud.size();
    if (n < 1) throw ConfigError("knn_neighbors: empty cloud");
    if (k < 1 || k >= n) throw ConfigError("knn_neighbors: k must satisfy 1 <= k < N");
    Graph g;
    g.n = n;
    g.offsets.assign(static_cast<std::size_t>(n) + 1, 0);
    g.targets.reserve(static_cast<std::size_t>(n) * k);
    std::vector<std::pair<double, int>> cand(static_cast<std::size_t>(n - 1));
    for (int i = 0; i < n; ++i) {
        std::size_t m = 0;
        for (int j = 0; j < n; ++j)
            if (j != i) cand[m++] = {dist2(cloud.pts[static_cast<std::size_t>(i)], cloud.pts[static_cast<std::size_t>(j)]), j};
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());  // ties fall to lower index via pair order
        std::vector<int> sel(static_cast<std::size_t>(k));
        for (int t = 0; t < k; ++t) sel[static_cast<std::size_t>(t)] = cand[static_cast<std::size_t>(t)].second;
        std::sort(sel.begin(), sel.end());
        g.targets.insert(g.targets.end(), sel.begin(), sel.end());
        g.offsets[i + 1] = static_cast<int>(g.targets.size());
    }
    return g;
}

Graph add_self_loops(const Graph& g) {
    Graph out;
    out.n = g.n;
    out.offsets.assign(static_cast<std::size_t>(g.n) + 1, 0);
    out.targets.reserve(g.targets.size() + static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i) {
        bool has_self = false;
        std::vector<int> nbrs(g.targets.begin() + g.offsets[i], g.targets.begin() + g.offsets[i + 1]);
        for (int t : nbrs)
            if (t == i) has_self = true;
        if (!has_self) nbrs.push_back(i);
        std::sort(nbrs.begin(), nbrs.end());
        out.targets.insert(out.targets.end(), nbrs.begin(), nbrs.end());
        out.offsets[i + 1] = static_cast<int>(out.targets.size());
    }
    return out;
}

std::vector<std::uint8_t> voxelize(const PointCloud& cloud, const RegularGrid& grid) {
    grid.validate();
    const int nc[3] = {grid.extents[0] - 1, grid.extents[1] - 1, grid.extents[2] - 1};
    std::vector<std::uint8_t> occ(static_cast<std::size_t>(grid.cell_count()), 0);
    for (const auto& p : cloud.pts) {
        int idx[3];
        for (int a = 0; a < 3; ++a) {
            const double cell = (grid.hi[a] - grid.lo[a]) / static_cast<double>(nc[a]);
            int i = static_cast<int>(std::floor((p[a] - grid.lo[a]) / cell));
            // clamp: points on the max bound land in the last cell
            idx[a] = std::clamp(i, 0, nc[a] - 1);
        }
        occ[static_cast<std::size_t>((idx[0] * nc[1] + idx[1]) * nc[2] + idx[2])] = 1;
    }
    return occ;
}

GeoDescriptor descriptors(const PointCloud& cloud) {
    const int n = cloud.size();
    if (n < 1) throw ConfigError("descriptors: empty cloud");
    GeoDescriptor d;
    Vec3 mn{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 mx{-mn[0], -mn[1], -mn[2]};
    for (const auto& p : cloud.pts)
        for (int a = 0; a < 3; ++a) {
            d.centroid[a] += p[a];
            mn[a] = std::min(mn[a], p[a]);
            mx[a] = std::max(mx[a], p[a]);
        }
    for (int a = 0; a < 3; ++a) {
        d.centroid[a] /= static_cast<double>(n);
        d.bbox[a] = mx[a] - mn[a];
    }
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : cloud.pts) {
        Eigen::Vector3d q(p[0] - d.centroid[0], p[1] - d.centroid[1], p[2] - d.centroid[2]);
        cov += q * q.transpose();
    }
    cov /= static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    // eigenvalues ascending from Eigen; reorder descending
    for (int r = 0; r < 3; ++r) {
        const int src = 2 - r;
        d.eigenvalues[static_cast<std::size_t>(r)] = std::max(0.0, es.eigenvalues()(src));
        Eigen::Vector3d axis = es.eigenvectors().col(src);
        // sign convention: largest-magnitude component positive
        int big = 0;
        for (int a = 1; a < 3; ++a)
            if (std::abs(axis(a)) > std::abs(axis(big))) big = a;
        if (axis(big) < 0.0) axis = -axis;
        for (int a = 0; a < 3; ++a) d.axes[static_cast<std::size_t>(r)][static_cast<std::size_t>(a)] = axis(a);
    }
    return d;
}

Vec3 BoxTransform::apply(const Vec3& p) const {
    return {p[0] * scale[0] + offset[0], p[1] * scale[1] + offset[1], p[2] * scale[2] + offset[2]};
}

Vec3 BoxTransform::invert(const Vec3& p) const {
    Vec3 out;
    for (int a = 0; a < 3; ++a)
        out[a] = degenerate[a] ? degenerate_src[a] : (p[a] - offset[a]) / scale[a];
    return out;
}

std::pair<PointCloud, BoxTransform> normalize_box(const PointCloud& cloud, const Vec3& target_lo,
                                                  const Vec3& target_hi) {
    if (cloud.pts.empty()) throw ConfigError("normalize_box: empty cloud");
    Vec3 mn = cloud.pts[0], mx = cloud.pts[0];
    for (const auto& p : cloud.pts)
        for (int a = 0; a < 3; ++a) {
            mn[a] = std::min(mn[a], p[a]);
            mx[a] = std::max(mx[a], p[a]);
        }
    BoxTransform t;
    for (int a = 0; a < 3; ++a) {
        const double src = mx[a] - mn[a];
        if (src == 0.0) {
            // zero-extent axis: map to target midpoint, recorded
            t.degenerate[a] = true;
            t.scale[a] = 0.0;
            t.offset[a] = 0.5 * (target_lo[a] + target_hi[a]);
            t.degenerate_src[a] = mn[a];
        } else {
            t.scale[a] = (target_hi[a] - target_lo[a]) / src;
            t.offset[a] = target_lo[a] - mn[a] * t.scale[a];
        }
    }
    PointCloud out;
    out.pts.reserve(cloud.pts.size());
    for (const auto& p : cloud.pts) {
        Vec3 q = t.apply(p);
        for (int a = 0; a < 3; ++a)
            if (t.degenerate[a]) q[a] = 0.5 * (target_lo[a] + target_hi[a]);
        out.pts.push_back(q);
    }
    return {out, t};
}

}  // namespace nob::geom
