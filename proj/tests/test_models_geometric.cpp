#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <queue>

#include "nob/errors.hpp"
#include "nob/models.hpp"
#include "ref_models.hpp"

using namespace nob;
using namespace refnet;
using namespace refmodel;
using models::ModelConfig;
using nn::Act;

namespace {

ModelConfig geo_cfg(const std::string& name) {
    ModelConfig cfg;
    cfg.name = name;
    cfg.geo_dim = 0;
    cfg.load_dim = 0;
    cfg.field_channels = 1;
    cfg.hidden_graph = 4;
    cfg.hidden_grid = 3;
    cfg.hidden_point = 5;
    cfg.layers = 2;
    cfg.slices = 2;
    cfg.grid_extents = {4, 4, 4};
    cfg.modes = {2, 2, 2};
    cfg.knn_k = 2;
    cfg.extra_edges = 2;
    cfg.seed = 13;
    return cfg;
}

std::vector<double> row(const data::Sample& s, int i) { return query_row(s, i); }

int bfs_diameter(const geom::Graph& g) {
    int best = 0;
    for (int s = 0; s < g.n; ++s) {
        std::vector<int> dist(static_cast<std::size_t>(g.n), -1);
        std::queue<int> q;
        q.push(s);
        dist[static_cast<std::size_t>(s)] = 0;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int t = g.offsets[u]; t < g.offsets[u + 1]; ++t) {
                const int v = g.targets[static_cast<std::size_t>(t)];
                if (dist[static_cast<std::size_t>(v)] < 0) {
                    dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
                    q.push(v);
                }
            }
        }
        for (int d : dist) {
            REQUIRE(d >= 0);
            best = std::max(best, d);
        }
    }
    return best;
}

geom::Graph path_graph(int n) {
    geom::Graph g;
    g.n = n;
    g.offsets.assign(1, 0);
    for (int i = 0; i < n; ++i) {
        if (i > 0) g.targets.push_back(i - 1);
        if (i + 1 < n) g.targets.push_back(i + 1);
        g.offsets.push_back(static_cast<int>(g.targets.size()));
    }
    return g;
}

}  // namespace

TEST_CASE("edge augmentation basics") {
    geom::Graph g = path_graph(10);
    geom::Graph same = models::augment_edges(g, 0, 1);
    CHECK(same.targets == g.targets);
    CHECK(same.offsets == g.offsets);

    CHECK(bfs_diameter(g) == 9);
    geom::Graph aug = models::augment_edges(g, 3, 1);
    CHECK(aug.edge_count() == g.edge_count() + 6);  // three undirected shortcuts
    CHECK(bfs_diameter(aug) < 9);

    geom::Graph again = models::augment_edges(g, 3, 1);
    CHECK(again.targets == aug.targets);
    geom::Graph other = models::augment_edges(g, 3, 2);
    CHECK(other.targets != aug.targets);

    // existing adjacency survives
    for (int i = 0; i + 1 < 10; ++i) {
        bool found = false;
        for (int t = aug.offsets[i]; t < aug.offsets[i + 1]; ++t)
            if (aug.targets[static_cast<std::size_t>(t)] == i + 1) found = true;
        CHECK(found);
    }

    // requests beyond the available pair count clamp to the complete graph
    geom::Graph full = models::augment_edges(g, 1000, 5);
    CHECK(full.edge_count() == 10LL * 9);

    // self loops survive augmentation exactly once
    geom::Graph with_self = geom::add_self_loops(g);
    geom::Graph aug_self = models::augment_edges(with_self, 2, 3);
    for (int i = 0; i < 10; ++i) {
        int selfs = 0;
        for (int t = aug_self.offsets[i]; t < aug_self.offsets[i + 1]; ++t)
            if (aug_self.targets[static_cast<std::size_t>(t)] == i) ++selfs;
        CHECK(selfs == 1);
    }
}

TEST_CASE("unit messages with identity features pass node values through") {
    ModelConfig cfg = geo_cfg("gno");
    cfg.layers = 1;
    cfg.hidden_graph = 3;
    auto model = models::make_model(cfg);
    auto& ps = model->params();
    // mp ignores its input and emits 1; f is the identity on the 3 coords
    for (const std::string n : {"gc0.mp.L0.W", "gc0.mp.L0.b", "gc0.mp.L1.W", "gc0.f.L0.b"})
        std::fill(ps.get(n)->val.begin(), ps.get(n)->val.end(), 0.0);
    ps.get("gc0.mp.L1.b")->val = {1.0};
    ps.get("gc0.f.L0.W")->val = {1, 0, 0, 0, 1, 0, 0, 0, 1};

    data::Sample s = models::toy_sample(4, 0, 0, 1, 21);
    s.has_edges = true;  // self-edges only, so the sweep must reproduce each node
    for (int i = 0; i < s.n; ++i) s.edges.emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i));
    ad::Value y = model->forward(s);
    auto head = nn::mlp_spec(3, {3, 1}, Act::Gelu, Act::Identity);
    for (int i = 0; i < s.n; ++i) {
        const double ref = mlp_ref(row(s, i), head, ps, "head")[0];
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - ref) < 1e-12);
    }
}

TEST_CASE("graph convolution matches the dense double-loop replay") {
    ModelConfig cfg = geo_cfg("gno");
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(5, 0, 0, 1, 22);
    ad::Value y = model->forward(s);
    auto ref = gno_ref(s, sample_graph(s, cfg.knn_k), model->params(), cfg);
    REQUIRE(y->val.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y->val[i] - ref[i]) < 1e-10);
}

TEST_CASE("graph convolution is equivariant to point reordering") {
    ModelConfig cfg = geo_cfg("gno");
    auto model = models::make_model(cfg);
    data::Sample a = models::toy_sample(7, 0, 0, 1, 23);
    data::Sample b = a;
    for (int i = 0; i < a.n; ++i)
        for (int c = 0; c < 3; ++c)
            b.coords[static_cast<std::size_t>(i) * 3 + c] = a.coords[static_cast<std::size_t>(a.n - 1 - i) * 3 + c];
    ad::Value ya = model->forward(a);
    ad::Value yb = model->forward(b);
    for (int i = 0; i < a.n; ++i)
        CHECK(std::abs(ya->val[static_cast<std::size_t>(i)] - yb->val[static_cast<std::size_t>(a.n - 1 - i)]) < 1e-9);
}

TEST_CASE("augmented variant reduces to the plain one without extra edges") {
    ModelConfig cfg = geo_cfg("gno");
    cfg.extra_edges = 0;
    auto plain = models::make_model(cfg);
    ModelConfig acfg = cfg;
    acfg.name = "eagno";
    auto aug = models::make_model(acfg);
    data::Sample s = models::toy_sample(6, 0, 0, 1, 24);
    ad::Value ya = plain->forward(s);
    ad::Value yb = aug->forward(s);
    CHECK(std::memcmp(ya->val.data(), yb->val.data(), ya->val.size() * sizeof(double)) == 0);
}

TEST_CASE("augmented graph convolution matches the replay on the augmented graph") {
    ModelConfig cfg = geo_cfg("eagno");
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(6, 0, 0, 1, 25);
    ad::Value y = model->forward(s);

    geom::PointCloud cloud{s.points()};
    geom::Graph g = geom::knn_neighbors(cloud, std::min(cfg.knn_k, s.n - 1));
    g = geom::add_self_loops(models::augment_edges(g, cfg.extra_edges, cfg.seed));
    auto ref = gno_ref(s, g, model->params(), cfg);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(y->val[i] - ref[i]) < 1e-10);

    // and differs from the unaugmented sweep
    auto plain_ref = gno_ref(s, sample_graph(s, cfg.knn_k), model->params(), cfg);
    double diff = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) diff = std::max(diff, std::abs(ref[i] - plain_ref[i]));
    CHECK(diff > 1e-8);
}

TEST_CASE("spectral layer with identity filters on all modes is the identity") {
    const std::array<int, 3> e{4, 4, 4};
    auto ms = std::make_shared<ad::ModeSet>(ad::make_mode_set(e, {3, 3, 3}));
    REQUIRE(ms->kept.size() == 64);  // every mode retained
    const int c = 2;
    nn::ParamStore ps;
    std::vector<double> rre(ms->kept.size() * c * c, 0.0), rim(rre.size(), 0.0);
    for (std::size_t k = 0; k < ms->kept.size(); ++k)
        for (int i = 0; i < c; ++i) rre[k * c * c + static_cast<std::size_t>(i) * c + i] = 1.0;
    ps.add("f.Rre", {static_cast<int>(ms->kept.size()), c, c}, rre);
    ps.add("f.Rim", {static_cast<int>(ms->kept.size()), c, c}, rim);
    ps.add("f.W", {c, c}, std::vector<double>(4, 0.0));
    ps.add("f.b", {1, c}, std::vector<double>(2, 0.0));

    Rng rng(31);
    std::vector<double> xv(64 * c);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    ad::Value x = ad::constant({64, c}, xv);
    ad::Value y = nn::fourier_layer(x, ps, "f", ms, Act::Identity, true);
    for (std::size_t i = 0; i < xv.size(); ++i) CHECK(std::abs(y->val[i] - xv[i]) < 1e-9);
}

TEST_CASE("keeping only the constant mode yields the spatial mean") {
    const std::array<int, 3> e{4, 4, 4};
    auto ms = std::make_shared<ad::ModeSet>(ad::make_mode_set(e, {1, 1, 1}));
    REQUIRE(ms->kept.size() == 1);
    const int c = 2;
    nn::ParamStore ps;
    ps.add("f.Rre", {1, c, c}, {1.0, 0.0, 0.0, 1.0});
    ps.add("f.Rim", {1, c, c}, std::vector<double>(4, 0.0));
    ps.add("f.W", {c, c}, std::vector<double>(4, 0.0));
    ps.add("f.b", {1, c}, std::vector<double>(2, 0.0));

    Rng rng(32);
    std::vector<double> xv(64 * c);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    double mean0 = 0.0, mean1 = 0.0;
    for (int i = 0; i < 64; ++i) {
        mean0 += xv[static_cast<std::size_t>(i) * 2];
        mean1 += xv[static_cast<std::size_t>(i) * 2 + 1];
    }
    mean0 /= 64.0;
    mean1 /= 64.0;
    ad::Value y = nn::fourier_layer(ad::constant({64, c}, xv), ps, "f", ms, Act::Identity, true);
    for (int i = 0; i < 64; ++i) {
        CHECK(std::abs(y->val[static_cast<std::size_t>(i) * 2] - mean0) < 1e-9);
        CHECK(std::abs(y->val[static_cast<std::size_t>(i) * 2 + 1] - mean1) < 1e-9);
    }
}

TEST_CASE("spectral layer matches the naive transform replay") {
    const std::array<int, 3> e{4, 4, 4};
    auto ms = std::make_shared<ad::ModeSet>(ad::make_mode_set(e, {2, 2, 2}));
    const int c = 2;
    nn::ParamStore ps;
    Rng rng(33);
    nn::init_fourier(ps, "f", c, *ms, rng);
    std::vector<double> xv(64 * c);
    for (auto& v : xv) v = rng.uniform(-1, 1);
    ad::Value y = nn::fourier_layer(ad::constant({64, c}, xv), ps, "f", ms, Act::Gelu, false);

    std::vector<std::vector<double>> x(64, std::vector<double>(c));
    for (int i = 0; i < 64; ++i)
        for (int ch = 0; ch < c; ++ch) x[static_cast<std::size_t>(i)][static_cast<std::size_t>(ch)] = xv[static_cast<std::size_t>(i) * c + ch];
    auto spec = spectral_ref(x, *ms, vals(ps, "f.Rre"), vals(ps, "f.Rim"));
    auto bypass = matmul_ref(x, vals(ps, "f.W"), c);
    for (int i = 0; i < 64; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const double ref = act_ref(Act::Gelu, spec[static_cast<std::size_t>(i)][static_cast<std::size_t>(ch)] +
                                                      bypass[static_cast<std::size_t>(i)][static_cast<std::size_t>(ch)] +
                                                      vals(ps, "f.b")[static_cast<std::size_t>(ch)]);
            CHECK(std::abs(y->val[static_cast<std::size_t>(i) * c + ch] - ref) < 1e-8);
        }
}

TEST_CASE("grid operator matches the chained encode-mix-decode replay") {
    ModelConfig cfg = geo_cfg("gino");
    cfg.layers = 1;
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(6, 0, 0, 1, 26);
    CHECK(gino_replay_dev(*model, s) < 1e-8);
}

TEST_CASE("points outside the transfer radius decode the zero feature") {
    ModelConfig cfg = geo_cfg("gino");
    cfg.layers = 1;
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(3, 0, 0, 1, 27);
    for (auto& v : s.coords) v += 50.0;  // far outside the unit grid box
    ad::Value y = model->forward(s);
    const double ref = mlp_ref(std::vector<double>(3, 0.0),
                               nn::mlp_spec(3, {3, 1}, Act::Gelu, Act::Identity), model->params(), "head")[0];
    for (double v : y->val) CHECK(v == doctest::Approx(ref).epsilon(1e-12));
}

TEST_CASE("plane-factorized operator matches the assembled replay") {
    ModelConfig cfg = geo_cfg("figconv");
    cfg.hidden_grid = 2;
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(5, 0, 0, 1, 28);
    CHECK(figconv_replay_dev(*model, s) < 1e-8);
}

TEST_CASE("coincident points receive identical plane predictions") {
    ModelConfig cfg = geo_cfg("figconv");
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(4, 0, 0, 1, 29);
    for (int c = 0; c < 3; ++c) s.coords[3 + c] = s.coords[c];  // point 1 == point 0
    ad::Value y = model->forward(s);
    CHECK(y->val[0] == doctest::Approx(y->val[1]).epsilon(1e-14));
}

TEST_CASE("point network pools a global maximum per feature") {
    ModelConfig cfg = geo_cfg("pointnet");
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(6, 0, 0, 1, 30);
    ad::Value y = model->forward(s);

    const auto& ps = model->params();
    const int h = cfg.hidden_point;
    std::vector<int> widths{h, h};
    auto stack = nn::mlp_spec(3, widths, Act::Gelu, Act::Identity);
    std::vector<double> global(static_cast<std::size_t>(h), -1e300);
    for (int i = 0; i < s.n; ++i) {
        auto e = mlp_ref(row(s, i), stack, ps, "shared");
        for (int a = 0; a < h; ++a) global[static_cast<std::size_t>(a)] = std::max(global[static_cast<std::size_t>(a)], e[static_cast<std::size_t>(a)]);
    }
    auto head = nn::mlp_spec(2 * h, {h, 1}, Act::Gelu, Act::Identity);
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> cat = mlp_ref(row(s, i), stack, ps, "qenc");
        cat.insert(cat.end(), global.begin(), global.end());
        const double ref = mlp_ref(cat, head, ps, "head")[0];
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - ref) < 1e-10);
    }

    // reordering the cloud reorders predictions and nothing else
    data::Sample rev = s;
    for (int i = 0; i < s.n; ++i)
        for (int c = 0; c < 3; ++c)
            rev.coords[static_cast<std::size_t>(i) * 3 + c] = s.coords[static_cast<std::size_t>(s.n - 1 - i) * 3 + c];
    ad::Value yr = model->forward(rev);
    for (int i = 0; i < s.n; ++i)
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - yr->val[static_cast<std::size_t>(s.n - 1 - i)]) < 1e-12);

    // a single point is its own global context
    data::Sample one = models::toy_sample(1, 0, 0, 1, 31);
    ad::Value y1 = model->forward(one);
    std::vector<double> cat = mlp_ref(row(one, 0), stack, ps, "qenc");
    auto g1 = mlp_ref(row(one, 0), stack, ps, "shared");
    cat.insert(cat.end(), g1.begin(), g1.end());
    CHECK(std::abs(y1->val[0] - mlp_ref(cat, head, ps, "head")[0]) < 1e-10);
}

TEST_CASE("full attention operator matches the replay") {
    ModelConfig cfg = geo_cfg("gnot");
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(4, 0, 0, 1, 34);
    ad::Value y = model->forward(s);

    const auto& ps = model->params();
    const int h = cfg.hidden_graph;
    auto enc = nn::mlp_spec(3, {h}, Act::Gelu, Act::Gelu);
    std::vector<std::vector<double>> v;
    for (int i = 0; i < s.n; ++i) v.push_back(mlp_ref(row(s, i), enc, ps, "enc"));
    const double tau = std::sqrt(static_cast<double>(h));
    for (int l = 0; l < cfg.layers; ++l) v = self_attention_ref(v, ps, "attn" + std::to_string(l), tau);
    auto head = nn::mlp_spec(h, {h, 1}, Act::Gelu, Act::Identity);
    for (int i = 0; i < s.n; ++i)
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - mlp_ref(v[static_cast<std::size_t>(i)], head, ps, "head")[0]) < 1e-10);
}

TEST_CASE("attention over one point is its value projection") {
    ModelConfig cfg = geo_cfg("gnot");
    cfg.layers = 1;
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(1, 0, 0, 1, 35);
    ad::Value y = model->forward(s);
    const auto& ps = model->params();
    const int h = cfg.hidden_graph;
    std::vector<double> v = mlp_ref(row(s, 0), nn::mlp_spec(3, {h}, Act::Gelu, Act::Gelu), ps, "enc");
    v = matmul_ref({v}, vals(ps, "attn0.Wv"), h)[0];
    CHECK(std::abs(y->val[0] - mlp_ref(v, nn::mlp_spec(h, {h, 1}, Act::Gelu, Act::Identity), ps, "head")[0]) < 1e-10);
}

TEST_CASE("identical points get identical attention predictions") {
    ModelConfig cfg = geo_cfg("gnot");
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(5, 0, 0, 1, 36);
    for (int i = 1; i < s.n; ++i)
        for (int c = 0; c < 3; ++c) s.coords[static_cast<std::size_t>(i) * 3 + c] = s.coords[static_cast<std::size_t>(c)];
    ad::Value y = model->forward(s);
    for (int i = 1; i < s.n; ++i) CHECK(y->val[static_cast<std::size_t>(i)] == doctest::Approx(y->val[0]).epsilon(1e-13));
}

TEST_CASE("slice tokenization matches the replay") {
    ModelConfig cfg = geo_cfg("transolver");
    cfg.layers = 1;
    cfg.slices = 2;
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(5, 0, 0, 1, 37);
    ad::Value y = model->forward(s);

    const auto& ps = model->params();
    const int h = cfg.hidden_point;
    auto enc = nn::mlp_spec(3, {h}, Act::Gelu, Act::Gelu);
    std::vector<std::vector<double>> v;
    for (int i = 0; i < s.n; ++i) v.push_back(mlp_ref(row(s, i), enc, ps, "enc"));
    // softmax slice weights per point
    auto slice = nn::mlp_spec(h, {cfg.slices}, Act::Identity);
    std::vector<std::vector<double>> w;
    for (int i = 0; i < s.n; ++i) {
        auto logits = mlp_ref(v[static_cast<std::size_t>(i)], slice, ps, "slice");
        const double mx = *std::max_element(logits.begin(), logits.end());
        double den = 0.0;
        for (auto& l : logits) {
            l = std::exp(l - mx);
            den += l;
        }
        for (auto& l : logits) l /= den;
        double sum = 0.0;
        for (double l : logits) sum += l;
        CHECK(std::abs(sum - 1.0) < 1e-12);
        w.push_back(logits);
    }
    // weighted token pooling
    std::vector<std::vector<double>> tokens(static_cast<std::size_t>(cfg.slices), std::vector<double>(static_cast<std::size_t>(h), 0.0));
    std::vector<double> wsum(static_cast<std::size_t>(cfg.slices), 0.0);
    for (int i = 0; i < s.n; ++i)
        for (int m = 0; m < cfg.slices; ++m) {
            wsum[static_cast<std::size_t>(m)] += w[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)];
            for (int a = 0; a < h; ++a)
                tokens[static_cast<std::size_t>(m)][static_cast<std::size_t>(a)] +=
                    w[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] * v[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
        }
    for (int m = 0; m < cfg.slices; ++m)
        for (int a = 0; a < h; ++a) tokens[static_cast<std::size_t>(m)][static_cast<std::size_t>(a)] /= wsum[static_cast<std::size_t>(m)];
    const double tau = std::sqrt(static_cast<double>(h));
    tokens = self_attention_ref(tokens, ps, "attn0", tau);
    auto ffn = nn::mlp_spec(h, {h}, Act::Gelu, Act::Gelu);
    for (auto& t : tokens) t = mlp_ref(t, ffn, ps, "ffn0");
    auto head = nn::mlp_spec(h, {h, 1}, Act::Gelu, Act::Identity);
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> back(static_cast<std::size_t>(h), 0.0);
        for (int m = 0; m < cfg.slices; ++m)
            for (int a = 0; a < h; ++a)
                back[static_cast<std::size_t>(a)] += w[static_cast<std::size_t>(i)][static_cast<std::size_t>(m)] * tokens[static_cast<std::size_t>(m)][static_cast<std::size_t>(a)];
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - mlp_ref(back, head, ps, "head")[0]) < 1e-10);
    }
}

TEST_CASE("a single slice predicts one shared value") {
    ModelConfig cfg = geo_cfg("transolver");
    cfg.slices = 1;
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(6, 0, 0, 1, 38);
    ad::Value y = model->forward(s);
    for (int i = 1; i < s.n; ++i) CHECK(y->val[static_cast<std::size_t>(i)] == doctest::Approx(y->val[0]).epsilon(1e-13));
}

TEST_CASE("geometric models are deterministic per configuration") {
    for (const std::string name : {"gno", "eagno", "gino", "figconv", "pointnet", "gnot", "transolver"}) {
        ModelConfig cfg = models::toy_config(name);
        auto a = models::make_model(cfg);
        auto b = models::make_model(cfg);
        data::Sample s = models::toy_sample(6, cfg.geo_dim, cfg.load_dim, cfg.field_channels, 39);
        ad::Value ya = a->forward(s);
        ad::Value yb = b->forward(s);
        REQUIRE(ya->val.size() == yb->val.size());
        CHECK(std::memcmp(ya->val.data(), yb->val.data(), ya->val.size() * sizeof(double)) == 0);
    }
}
