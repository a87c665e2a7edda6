#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "nob/errors.hpp"
#include "nob/geometry.hpp"
#include "nob/rng.hpp"
#include "nob/transfer.hpp"

using namespace nob;
using nn::Act;
using geom::Graph;
using geom::PointCloud;
using geom::Vec3;

namespace {

double dist(const Vec3& a, const Vec3& b) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::vector<int> neighbors_of(const Graph& g, int i) {
    return {g.targets.begin() + g.offsets[static_cast<std::size_t>(i)],
            g.targets.begin() + g.offsets[static_cast<std::size_t>(i) + 1]};
}

PointCloud random_cloud(Rng& rng, int n, double lo = 0.0, double hi = 1.0) {
    PointCloud c;
    c.pts.resize(static_cast<std::size_t>(n));
    for (auto& p : c.pts)
        for (auto& x : p) x = rng.uniform(lo, hi);
    return c;
}

}  // namespace

TEST_CASE("radius search trivial cases") {
    PointCloud one{{{0.2, 0.3, 0.4}}};
    Graph g = geom::radius_neighbors(one, one.pts, 0.5);
    CHECK(neighbors_of(g, 0) == std::vector<int>{0});

    PointCloud two{{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}}};
    Graph g2 = geom::radius_neighbors(two, two.pts, 0.5);
    CHECK(neighbors_of(g2, 0) == std::vector<int>{0});
    CHECK(neighbors_of(g2, 1) == std::vector<int>{1});

    CHECK_THROWS_AS(geom::radius_neighbors(two, two.pts, 0.0), ConfigError);
}

TEST_CASE("radius search equals the brute-force scan") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 20 + static_cast<int>(rng.below(480));
        const double r = rng.uniform(0.05, 0.4);
        PointCloud cloud = random_cloud(rng, n);
        Graph g = geom::radius_neighbors(cloud, cloud.pts, r);
        for (int i = 0; i < n; ++i) {
            std::vector<int> brute;
            for (int j = 0; j < n; ++j)
                if (dist(cloud.pts[static_cast<std::size_t>(i)], cloud.pts[static_cast<std::size_t>(j)]) <= r)
                    brute.push_back(j);
            CHECK(neighbors_of(g, i) == brute);
        }
    }
}

TEST_CASE("knn trivial cases") {
    PointCloud line{{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {3.0, 0.0, 0.0}}};
    Graph g = geom::knn_neighbors(line, 1);
    CHECK(neighbors_of(g, 0) == std::vector<int>{1});
    CHECK(neighbors_of(g, 1) == std::vector<int>{0});
    CHECK(neighbors_of(g, 2) == std::vector<int>{1});

    Rng rng(3);
    PointCloud c = random_cloud(rng, 6);
    Graph full = geom::knn_neighbors(c, 5);
    for (int i = 0; i < 6; ++i) {
        auto nb = neighbors_of(full, i);
        CHECK(static_cast<int>(nb.size()) == 5);
        CHECK(std::find(nb.begin(), nb.end(), i) == nb.end());
    }
    CHECK_THROWS_AS(geom::knn_neighbors(c, 6), ConfigError);
}

TEST_CASE("knn equals the brute-force sort oracle") {
    Rng rng(22);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 100;
        const int k = 8;
        PointCloud cloud = random_cloud(rng, n);
        Graph g = geom::knn_neighbors(cloud, k);
        for (int i = 0; i < n; ++i) {
            std::vector<std::pair<double, int>> cand;
            for (int j = 0; j < n; ++j)
                if (j != i)
                    cand.emplace_back(dist(cloud.pts[static_cast<std::size_t>(i)], cloud.pts[static_cast<std::size_t>(j)]), j);
            std::sort(cand.begin(), cand.end());
            std::vector<int> brute;
            for (int j = 0; j < k; ++j) brute.push_back(cand[static_cast<std::size_t>(j)].second);
            std::sort(brute.begin(), brute.end());
            auto got = neighbors_of(g, i);
            std::sort(got.begin(), got.end());
            CHECK(got == brute);
        }
    }
}

TEST_CASE("voxelize corner, empty region, and floor-map oracle") {
    geom::RegularGrid grid;
    grid.extents = {3, 3, 3};  // 2x2x2 cells
    PointCloud corner{{{0.0, 0.0, 0.0}}};
    auto occ = geom::voxelize(corner, grid);
    CHECK(occ[0] == 1);
    CHECK(std::count(occ.begin(), occ.end(), 1) == 1);

    Rng rng(31);
    PointCloud lower = random_cloud(rng, 50, 0.0, 0.45);
    geom::RegularGrid g10;
    g10.extents = {11, 11, 11};
    auto occ10 = geom::voxelize(lower, g10);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j)
            for (int k = 5; k < 10; ++k)
                CHECK(occ10[static_cast<std::size_t>((i * 10 + j) * 10 + k)] == 0);

    PointCloud big = random_cloud(rng, 1000);
    auto occ_big = geom::voxelize(big, g10);
    std::vector<std::uint8_t> oracle(1000, 0);
    for (const auto& p : big.pts) {
        int idx[3];
        for (int a = 0; a < 3; ++a) idx[a] = std::min(static_cast<int>(std::floor(p[a] / 0.1)), 9);
        oracle[static_cast<std::size_t>((idx[0] * 10 + idx[1]) * 10 + idx[2])] = 1;
    }
    CHECK(occ_big == oracle);
}

TEST_CASE("descriptors of the unit cube corners") {
    PointCloud cube;
    for (int i = 0; i < 8; ++i)
        cube.pts.push_back({static_cast<double>(i & 1), static_cast<double>((i >> 1) & 1), static_cast<double>((i >> 2) & 1)});
    auto d = geom::descriptors(cube);
    for (int a = 0; a < 3; ++a) {
        CHECK(d.centroid[a] == doctest::Approx(0.5));
        CHECK(d.bbox[a] == doctest::Approx(1.0));
        CHECK(d.eigenvalues[a] == doctest::Approx(0.25));
    }
    auto v = d.to_vector();
    REQUIRE(v.size() == 18);
    CHECK(v[0] == doctest::Approx(0.5));
    CHECK(v[3] == doctest::Approx(1.0));
}

TEST_CASE("descriptors degenerate and axis-scaled clouds") {
    PointCloud same{{{1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}, {1.0, 2.0, 3.0}}};
    auto d = geom::descriptors(same);
    for (int a = 0; a < 3; ++a) {
        CHECK(d.bbox[a] == doctest::Approx(0.0));
        CHECK(d.eigenvalues[a] == doctest::Approx(0.0));
    }

    Rng rng(8);
    PointCloud c = random_cloud(rng, 60);
    for (auto& p : c.pts) p[0] *= 10.0;  // stretch x
    auto ds = geom::descriptors(c);
    CHECK(std::abs(ds.axes[0][0]) > 0.99);
    CHECK(ds.axes[0][0] > 0.0);  // sign convention: largest component positive
    CHECK(ds.eigenvalues[0] >= ds.eigenvalues[1]);
    CHECK(ds.eigenvalues[1] >= ds.eigenvalues[2]);

    // orthonormality
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double dot = 0.0;
            for (int a = 0; a < 3; ++a) dot += ds.axes[i][a] * ds.axes[j][a];
            CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
        }

    // permutation invariance
    PointCloud shuffled = c;
    std::reverse(shuffled.pts.begin(), shuffled.pts.end());
    auto dp = geom::descriptors(shuffled);
    auto va = ds.to_vector(), vb = dp.to_vector();
    for (std::size_t i = 0; i < va.size(); ++i) CHECK(std::abs(va[i] - vb[i]) < 1e-9);

    // translation equivariance
    PointCloud moved = c;
    for (auto& p : moved.pts) {
        p[0] += 2.0;
        p[1] -= 1.0;
        p[2] += 0.5;
    }
    auto dm = geom::descriptors(moved);
    CHECK(dm.centroid[0] == doctest::Approx(ds.centroid[0] + 2.0));
    CHECK(dm.centroid[1] == doctest::Approx(ds.centroid[1] - 1.0));
    CHECK(dm.bbox[0] == doctest::Approx(ds.bbox[0]));
}

TEST_CASE("normalize_box identity, halving, and round trip") {
    PointCloud inbox{{{0.0, 0.0, 0.0}, {1.0, 1.0, 1.0}, {0.3, 0.6, 0.9}}};
    auto [mapped, xf] = geom::normalize_box(inbox, {0, 0, 0}, {1, 1, 1});
    for (std::size_t i = 0; i < inbox.pts.size(); ++i)
        for (int a = 0; a < 3; ++a)
            CHECK(mapped.pts[i][a] == doctest::Approx(inbox.pts[i][a]));

    PointCloud two{{{0.0, 0.0, 0.0}, {2.0, 2.0, 2.0}}};
    auto [half, xf2] = geom::normalize_box(two, {0, 0, 0}, {1, 1, 1});
    CHECK(half.pts[1][0] == doctest::Approx(1.0));
    CHECK(xf2.apply({1.0, 1.0, 1.0})[0] == doctest::Approx(0.5));

    Rng rng(17);
    PointCloud c = random_cloud(rng, 40, -3.0, 5.0);
    auto [norm, xf3] = geom::normalize_box(c, {0, 0, 0}, {1, 1, 1});
    for (std::size_t i = 0; i < c.pts.size(); ++i) {
        Vec3 back = xf3.invert(norm.pts[i]);
        for (int a = 0; a < 3; ++a) CHECK(std::abs(back[a] - c.pts[i][a]) < 1e-12);
    }
}

TEST_CASE("self loops are added exactly once") {
    PointCloud line{{{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {3.0, 0.0, 0.0}}};
    Graph g = geom::add_self_loops(geom::knn_neighbors(line, 1));
    for (int i = 0; i < 3; ++i) {
        auto nb = neighbors_of(g, i);
        CHECK(std::count(nb.begin(), nb.end(), i) == 1);
    }
}

namespace {

// dense reference for the radius-limited transfer: loops every (dst, src) pair
std::vector<double> dense_transfer_oracle(const std::vector<Vec3>& src_pts, const std::vector<double>& src_feats,
                                          int fdim, const std::vector<Vec3>& dst_pts,
                                          const std::vector<double>& dst_ctx, int cdim, double r,
                                          nn::ParamStore& store, const std::vector<nn::LayerSpec>& mp_layers,
                                          const std::string& mp_prefix, const std::vector<nn::LayerSpec>& f_layers,
                                          const std::string& f_prefix) {
    const int out_dim = f_layers.back().out_dim;
    std::vector<double> out(dst_pts.size() * static_cast<std::size_t>(out_dim), 0.0);
    for (std::size_t d = 0; d < dst_pts.size(); ++d)
        for (std::size_t s = 0; s < src_pts.size(); ++s) {
            if (dist(dst_pts[d], src_pts[s]) > r) continue;
            std::vector<double> cat(src_feats.begin() + static_cast<std::ptrdiff_t>(s * static_cast<std::size_t>(fdim)),
                                    src_feats.begin() + static_cast<std::ptrdiff_t>((s + 1) * static_cast<std::size_t>(fdim)));
            cat.insert(cat.end(), dst_ctx.begin() + static_cast<std::ptrdiff_t>(d * static_cast<std::size_t>(cdim)),
                       dst_ctx.begin() + static_cast<std::ptrdiff_t>((d + 1) * static_cast<std::size_t>(cdim)));
            ad::Value m = nn::mlp_forward(ad::constant({1, fdim + cdim}, cat), mp_layers, store, mp_prefix);
            ad::Value f = nn::mlp_forward(
                ad::constant({1, fdim},
                             std::vector<double>(src_feats.begin() + static_cast<std::ptrdiff_t>(s * static_cast<std::size_t>(fdim)),
                                                 src_feats.begin() + static_cast<std::ptrdiff_t>((s + 1) * static_cast<std::size_t>(fdim)))),
                f_layers, store, f_prefix);
            for (int o = 0; o < out_dim; ++o)
                out[d * static_cast<std::size_t>(out_dim) + static_cast<std::size_t>(o)] +=
                    m->val[0] * f->val[static_cast<std::size_t>(o)];
        }
    return out;
}

}  // namespace

TEST_CASE("points_to_grid single coincident pair with unit maps") {
    // mp constant 1 (zero weight, bias 1 through identity act), f identity
    nn::ParamStore store;
    store.add("mp.L0.W", {5, 1}, std::vector<double>(5, 0.0));
    store.add("mp.L0.b", {1, 1}, {1.0});
    store.add("f.L0.W", {2, 2}, {1.0, 0.0, 0.0, 1.0});
    store.add("f.L0.b", {1, 2}, {0.0, 0.0});
    auto mp_layers = nn::mlp_spec(5, {1}, Act::Identity, Act::Identity);
    auto f_layers = nn::mlp_spec(2, {2}, Act::Identity, Act::Identity);

    geom::RegularGrid grid;
    grid.extents = {2, 2, 2};
    std::vector<Vec3> pts = {{0.0, 0.0, 0.0}};
    ad::Value feats = ad::constant({1, 2}, {3.5, -1.25});
    ad::Value g = geom::points_to_grid(feats, pts, grid, 1e-6, store, mp_layers, "mp", f_layers, "f");
    CHECK(g->val[0] == doctest::Approx(3.5));
    CHECK(g->val[1] == doctest::Approx(-1.25));
    for (std::size_t i = 2; i < g->val.size(); ++i) CHECK(g->val[i] == doctest::Approx(0.0));

    // no points within reach of any node
    std::vector<Vec3> far = {{10.0, 10.0, 10.0}};
    ad::Value none = geom::points_to_grid(feats, far, grid, 1e-6, store, mp_layers, "mp", f_layers, "f");
    for (double v : none->val) CHECK(v == doctest::Approx(0.0));

    // round trip through grid_to_points on the coincident node
    ad::Value ctx = ad::constant({1, 2}, {0.0, 0.0});
    auto mp_back = nn::mlp_spec(4, {1}, Act::Identity, Act::Identity);
    store.add("mpb.L0.W", {4, 1}, std::vector<double>(4, 0.0));
    store.add("mpb.L0.b", {1, 1}, {1.0});
    ad::Value back = geom::grid_to_points(g, grid, pts, ctx, 1e-6, store, mp_back, "mpb", f_layers, "f");
    CHECK(back->val[0] == doctest::Approx(3.5));
    CHECK(back->val[1] == doctest::Approx(-1.25));
}

TEST_CASE("points_to_grid matches the dense-pair oracle") {
    Rng rng(5);
    nn::ParamStore store;
    const int fdim = 3, hidden = 4;
    auto mp_layers = nn::mlp_spec(fdim + 3, {hidden, 1}, Act::Gelu, Act::Identity);
    auto f_layers = nn::mlp_spec(fdim, {hidden}, Act::Identity, Act::Identity);
    nn::init_mlp(store, "mp", mp_layers, rng);
    nn::init_mlp(store, "f", f_layers, rng);

    geom::RegularGrid grid;
    grid.extents = {3, 3, 3};
    std::vector<Vec3> pts;
    std::vector<double> feats;
    for (int i = 0; i < 20; ++i) {
        pts.push_back({rng.uniform01(), rng.uniform01(), rng.uniform01()});
        for (int j = 0; j < fdim; ++j) feats.push_back(rng.uniform(-1, 1));
    }
    const double r = 0.45;
    ad::Value g = geom::points_to_grid(ad::constant({20, fdim}, feats), pts, grid, r, store, mp_layers, "mp",
                                       f_layers, "f");
    auto nodes = grid.node_coords();
    std::vector<double> node_ctx;
    for (const auto& n : nodes) node_ctx.insert(node_ctx.end(), n.begin(), n.end());
    auto oracle = dense_transfer_oracle(pts, feats, fdim, nodes, node_ctx, 3, r, store, mp_layers, "mp",
                                        f_layers, "f");
    REQUIRE(g->val.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(g->val[i] - oracle[i]) < 1e-10);
}

TEST_CASE("grid_to_points matches the dense-pair oracle") {
    Rng rng(6);
    nn::ParamStore store;
    const int gdim = 2, cdim = 2, hidden = 4;
    auto mp_layers = nn::mlp_spec(gdim + cdim, {hidden, 1}, Act::Gelu, Act::Identity);
    auto f_layers = nn::mlp_spec(gdim, {hidden}, Act::Identity, Act::Identity);
    nn::init_mlp(store, "mp", mp_layers, rng);
    nn::init_mlp(store, "f", f_layers, rng);

    geom::RegularGrid grid;
    grid.extents = {3, 3, 3};
    auto nodes = grid.node_coords();
    std::vector<double> gfeats;
    for (std::size_t i = 0; i < nodes.size() * gdim; ++i) gfeats.push_back(rng.uniform(-1, 1));
    std::vector<Vec3> queries;
    std::vector<double> ctx;
    for (int i = 0; i < 7; ++i) {
        queries.push_back({rng.uniform01(), rng.uniform01(), rng.uniform01()});
        for (int j = 0; j < cdim; ++j) ctx.push_back(rng.uniform(-1, 1));
    }
    const double r = 0.6;
    ad::Value out = geom::grid_to_points(ad::constant({static_cast<int>(nodes.size()), gdim}, gfeats), grid,
                                         queries, ad::constant({7, cdim}, ctx), r, store, mp_layers, "mp",
                                         f_layers, "f");
    auto oracle = dense_transfer_oracle(nodes, gfeats, gdim, queries, ctx, cdim, r, store, mp_layers, "mp",
                                        f_layers, "f");
    for (std::size_t i = 0; i < oracle.size(); ++i) CHECK(std::abs(out->val[i] - oracle[i]) < 1e-10);
}

TEST_CASE("voxelize is order independent") {
    Rng rng(41);
    PointCloud c = random_cloud(rng, 200);
    geom::RegularGrid grid;
    grid.extents = {6, 6, 6};
    auto a = geom::voxelize(c, grid);
    PointCloud rev = c;
    std::reverse(rev.pts.begin(), rev.pts.end());
    CHECK(geom::voxelize(rev, grid) == a);
}
