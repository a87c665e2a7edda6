#include <algorithm>
#include <cmath>
#include <set>

#include "nob/errors.hpp"
#include "nob/models.hpp"
#include "nob/rng.hpp"

namespace nob::models {

using ad::Act;
using ad::Value;

geom::Graph augment_edges(const geom::Graph& g, int extra, std::uint64_t seed) {
    if (extra < 0) throw ConfigError("augment_edges: extra must be >= 0");
    if (extra == 0) return g;
    const int n = g.n;
    std::vector<std::set<int>> adj(static_cast<std::size_t>(n));
    long long undirected = 0;
    for (int i = 0; i < n; ++i)
        for (int t = g.offsets[i]; t < g.offsets[i + 1]; ++t) {
            const int j = g.targets[static_cast<std::size_t>(t)];
            if (i == j) continue;
            if (adj[static_cast<std::size_t>(i)].insert(j).second &&
                !adj[static_cast<std::size_t>(j)].count(i))
                ++undirected;
            adj[static_cast<std::size_t>(j)].insert(i);
        }
    const long long avail = static_cast<long long>(n) * (n - 1) / 2 - undirected;
    const long long want = std::min<long long>(extra, avail);
    Rng rng(seed);
    long long added = 0;
    if (want == avail) {
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (!adj[static_cast<std::size_t>(i)].count(j)) {
                    adj[static_cast<std::size_t>(i)].insert(j);
                    adj[static_cast<std::size_t>(j)].insert(i);
                }
        added = avail;
    } else {
        while (added < want) {
            const int i = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            const int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
            if (i == j || adj[static_cast<std::size_t>(i)].count(j)) continue;
            adj[static_cast<std::size_t>(i)].insert(j);
            adj[static_cast<std::size_t>(j)].insert(i);
            ++added;
        }
    }
    geom::Graph out;
    out.n = n;
    out.offsets.assign(1, 0);
    // rebuild neighbor lists, keeping any self-loops from the input
    std::vector<std::vector<int>> lists(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        lists[static_cast<std::size_t>(i)].assign(adj[static_cast<std::size_t>(i)].begin(),
                                                  adj[static_cast<std::size_t>(i)].end());
    for (int i = 0; i < n; ++i)
        for (int t = g.offsets[i]; t < g.offsets[i + 1]; ++t)
            if (g.targets[static_cast<std::size_t>(t)] == i) {
                auto& l = lists[static_cast<std::size_t>(i)];
                l.insert(std::lower_bound(l.begin(), l.end(), i), i);
                break;
            }
    for (int i = 0; i < n; ++i) {
        const auto& l = lists[static_cast<std::size_t>(i)];
        out.targets.insert(out.targets.end(), l.begin(), l.end());
        out.offsets.push_back(static_cast<int>(out.targets.size()));
    }
    return out;
}

namespace {

double attn_tau(const ModelConfig& cfg, int dim) {
    return cfg.tau > 0.0 ? cfg.tau : std::sqrt(static_cast<double>(dim));
}

// Geometric operators consume per-point coordinates, optionally widened with
// the parametric vector (direct concatenation) or a learned embedding of it.
class GeometricModel : public Model {
  public:
    explicit GeometricModel(ModelConfig cfg) : Model(std::move(cfg)) {
        p_dim_ = cfg_.geo_dim + cfg_.load_dim;
        rng_ = std::make_unique<Rng>(cfg_.seed);
        if (cfg_.fuse.mode != fusion::Mode::None && p_dim_ == 0)
            throw ConfigError(cfg_.name + ": parameter fusion requested but the dataset has no parameters");
    }

  protected:
    int p_dim_ = 0;
    std::unique_ptr<Rng> rng_;

    int in_dim() const {
        switch (cfg_.fuse.mode) {
            case fusion::Mode::Concat: return 3 + p_dim_;
            case fusion::Mode::Branch: return 3 + cfg_.fuse.branch_embed;
            default: return 3;
        }
    }

    void init_fusion() {
        if (cfg_.fuse.mode == fusion::Mode::Branch)
            fusion::init_branch_fuse(store_, "pfuse", p_dim_, cfg_.fuse.branch_embed, *rng_);
    }

    Value input_features(const data::Sample& s) {
        Value x = query_matrix(s);
        switch (cfg_.fuse.mode) {
            case fusion::Mode::Concat: return fusion::concat_params(x, param_vec(s));
            case fusion::Mode::Branch:
                return fusion::branch_fuse(x, param_vec(s), store_, "pfuse", p_dim_, cfg_.fuse.branch_embed);
            default: return x;
        }
    }
};

struct EdgeList {
    std::vector<int> src, dst;
    std::vector<double> disp;  // per edge x_src - x_dst, row-major
};

EdgeList edge_list(const data::Sample& s, int knn_k, bool augmented, int extra, std::uint64_t seed) {
    geom::Graph g;
    if (s.has_edges) {
        // precomputed pairs are (source, destination); rebuild neighbor lists
        std::vector<std::vector<int>> lists(static_cast<std::size_t>(s.n));
        for (const auto& [a, b] : s.edges) lists[b].push_back(static_cast<int>(a));
        g.n = s.n;
        g.offsets.assign(1, 0);
        for (auto& l : lists) {
            std::sort(l.begin(), l.end());
            g.targets.insert(g.targets.end(), l.begin(), l.end());
            g.offsets.push_back(static_cast<int>(g.targets.size()));
        }
    } else {
        geom::PointCloud cloud{s.points()};
        g = geom::knn_neighbors(cloud, std::min(knn_k, s.n - 1));
    }
    if (augmented) g = augment_edges(g, extra, seed);
    g = geom::add_self_loops(g);
    EdgeList e;
    for (int i = 0; i < g.n; ++i)
        for (int t = g.offsets[i]; t < g.offsets[i + 1]; ++t) {
            const int j = g.targets[static_cast<std::size_t>(t)];
            e.src.push_back(j);
            e.dst.push_back(i);
            for (int a = 0; a < 3; ++a)
                e.disp.push_back(s.coords[static_cast<std::size_t>(j) * 3 + a] -
                                 s.coords[static_cast<std::size_t>(i) * 3 + a]);
        }
    return e;
}

// Graph convolution v'_i = sum_j mp(v_j, v_i [, x_j - x_i]) * f(v_j); the
// nonlinearity lives inside the message-passing net.
class Gno : public GeometricModel {
  public:
    explicit Gno(ModelConfig cfg, bool augmented) : GeometricModel(std::move(cfg)), augmented_(augmented) {
        init_fusion();
        int d = in_dim();
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string p = "gc" + std::to_string(l);
            nn::init_mlp(store_, p + ".mp", mp_spec(d), *rng_);
            nn::init_mlp(store_, p + ".f", nn::mlp_spec(d, {cfg_.hidden_graph}, Act::Identity), *rng_);
            d = cfg_.hidden_graph;
        }
        nn::init_mlp(store_, "head", head_spec(), *rng_);
    }

    Value forward(const data::Sample& s) override {
        const EdgeList& e = cache_.get(&s, [&] {
            return edge_list(s, cfg_.knn_k, augmented_, cfg_.extra_edges, cfg_.seed);
        });
        Value v = input_features(s);
        Value disp = ad::constant({static_cast<int>(e.src.size()), 3}, e.disp);
        int d = in_dim();
        for (int l = 0; l < cfg_.layers; ++l) {
            const std::string p = "gc" + std::to_string(l);
            Value vj = ad::gather_rows(v, e.src);
            Value vi = ad::gather_rows(v, e.dst);
            Value mp_in = ad::concat_cols(vj, vi);
            if (cfg_.rel_disp) mp_in = ad::concat_cols(mp_in, disp);
            Value m = nn::mlp_forward(mp_in, mp_spec(d), store_, p + ".mp");
            Value f = nn::mlp_forward(vj, nn::mlp_spec(d, {cfg_.hidden_graph}, Act::Identity), store_, p + ".f");
            v = ad::scatter_add_rows(ad::scale_rows(f, m), e.dst, s.n);
            d = cfg_.hidden_graph;
        }
        return output_act(nn::mlp_forward(v, head_spec(), store_, "head"));
    }

  private:
    bool augmented_;
    SampleCache<EdgeList> cache_;

    std::vector<nn::LayerSpec> mp_spec(int d) const {
        return nn::mlp_spec(2 * d + (cfg_.rel_disp ? 3 : 0), {cfg_.hidden_graph, 1}, Act::Gelu, Act::Identity);
    }
    std::vector<nn::LayerSpec> head_spec() const {
        return nn::mlp_spec(cfg_.hidden_graph, {cfg_.hidden_graph, cfg_.field_channels}, Act::Gelu, Act::Identity);
    }
};

struct GinoCache {
    geom::TransferEdges enc, dec;
};

class Gino : public GeometricModel {
  public:
    explicit Gino(ModelConfig cfg) : GeometricModel(std::move(cfg)) {
        init_fusion();
        grid_.extents = cfg_.grid_extents;
        grid_.lo = cfg_.grid_lo;
        grid_.hi = cfg_.grid_hi;
        grid_.validate();
        const auto cs = grid_.cell_size();
        radius_ = cfg_.radius > 0.0
                      ? cfg_.radius
                      : 1.01 * std::sqrt(cs[0] * cs[0] + cs[1] * cs[1] + cs[2] * cs[2]);
        modes_ = std::make_shared<ad::ModeSet>(ad::make_mode_set(grid_.extents, cfg_.modes));
        const int h = cfg_.hidden_grid;
        nn::init_mlp(store_, "enc", nn::mlp_spec(in_dim(), {h}, Act::Gelu, Act::Gelu), *rng_);
        nn::init_mlp(store_, "p2g.mp", nn::mlp_spec(h + 3, {h, 1}, Act::Gelu, Act::Identity), *rng_);
        nn::init_mlp(store_, "p2g.f", nn::mlp_spec(h, {h}, Act::Identity), *rng_);
        for (int l = 0; l < cfg_.layers; ++l)
            nn::init_fourier(store_, "f" + std::to_string(l), h, *modes_, *rng_);
        nn::init_mlp(store_, "g2p.mp", nn::mlp_spec(h + h, {h, 1}, Act::Gelu, Act::Identity), *rng_);
        nn::init_mlp(store_, "g2p.f", nn::mlp_spec(h, {h}, Act::Identity), *rng_);
        nn::init_mlp(store_, "head", nn::mlp_spec(h, {h, cfg_.field_channels}, Act::Gelu, Act::Identity), *rng_);
        node_ctx_ = grid_ctx();
    }

    Value forward(const data::Sample& s) override {
        const GinoCache& c = cache_.get(&s, [&] {
            GinoCache gc;
            auto pts = s.points();
            gc.enc = geom::make_transfer_edges(pts, grid_.node_coords(), radius_);
            gc.dec = geom::make_transfer_edges(grid_.node_coords(), pts, radius_);
            return gc;
        });
        const int h = cfg_.hidden_grid;
        Value v0 = nn::mlp_forward(input_features(s), nn::mlp_spec(in_dim(), {h}, Act::Gelu, Act::Gelu),
                                   store_, "enc");
        Value g = geom::transfer_aggregate(v0, node_ctx_, c.enc, store_,
                                           nn::mlp_spec(h + 3, {h, 1}, Act::Gelu, Act::Identity), "p2g.mp",
                                           nn::mlp_spec(h, {h}, Act::Identity), "p2g.f");
        for (int l = 0; l < cfg_.layers; ++l)
            g = nn::fourier_layer(g, store_, "f" + std::to_string(l), modes_, Act::Gelu, cfg_.pure_spectral);
        Value back = geom::transfer_aggregate(g, v0, c.dec, store_,
                                              nn::mlp_spec(h + h, {h, 1}, Act::Gelu, Act::Identity), "g2p.mp",
                                              nn::mlp_spec(h, {h}, Act::Identity), "g2p.f");
        return output_act(nn::mlp_forward(back, nn::mlp_spec(h, {h, cfg_.field_channels}, Act::Gelu, Act::Identity),
                                          store_, "head"));
    }

  private:
    geom::RegularGrid grid_;
    double radius_ = 0.0;
    std::shared_ptr<ad::ModeSet> modes_;
    Value node_ctx_;
    SampleCache<GinoCache> cache_;

    Value grid_ctx() const {
        auto nodes = grid_.node_coords();
        std::vector<double> ctx;
        ctx.reserve(nodes.size() * 3);
        for (const auto& p : nodes) ctx.insert(ctx.end(), p.begin(), p.end());
        return ad::constant({static_cast<int>(nodes.size()), 3}, std::move(ctx));
    }
};

// Axis-factorized grids: points are splatted onto the xy, yz and xz planes,
// each plane runs through a shared two-level conv U-Net, and plane features
// are read back at the query projections and summed. A reconstruction; the
// source describes the idea without equations.
struct PlaneMaps {
    std::array<std::shared_ptr<const ad::SparseMap>, 3> splat, interp;
};

class FigConv : public GeometricModel {
  public:
    explicit FigConv(ModelConfig cfg) : GeometricModel(std::move(cfg)) {
        init_fusion();
        for (int p = 0; p < 3; ++p) {
            pa_[p] = cfg_.grid_extents[axes_[p][0]];
            pb_[p] = cfg_.grid_extents[axes_[p][1]];
            if (pa_[p] < 4 || pb_[p] < 4)
                throw ConfigError("figconv: plane extents must be at least 4 for the two-level net");
        }
        const int h = cfg_.hidden_grid;
        nn::init_mlp(store_, "enc", nn::mlp_spec(in_dim(), {h}, Act::Gelu, Act::Gelu), *rng_);
        nn::init_conv3(store_, "u.enc", h, h, {3, 3, 1}, *rng_);
        nn::init_conv3(store_, "u.down", h, 2 * h, {3, 3, 1}, *rng_);
        nn::init_conv3(store_, "u.bott", 2 * h, 2 * h, {3, 3, 1}, *rng_);
        nn::init_conv3(store_, "u.up", 2 * h, h, {3, 3, 1}, *rng_);
        nn::init_conv3(store_, "u.out", h, h, {3, 3, 1}, *rng_);
        nn::init_mlp(store_, "head", nn::mlp_spec(h, {h, cfg_.field_channels}, Act::Gelu, Act::Identity), *rng_);
        for (int p = 0; p < 3; ++p) up_[p] = upsample_map(pa_[p], pb_[p]);
    }

    Value forward(const data::Sample& s) override {
        const PlaneMaps& maps = cache_.get(&s, [&] { return plane_maps(s); });
        const int h = cfg_.hidden_grid;
        Value v0 = nn::mlp_forward(input_features(s), nn::mlp_spec(in_dim(), {h}, Act::Gelu, Act::Gelu),
                                   store_, "enc");
        Value acc;
        for (int p = 0; p < 3; ++p) {
            Value plane = ad::sparse_apply(v0, maps.splat[p]);  // [Pa*Pb, h]
            Value out = unet(plane, pa_[p], pb_[p], up_[p]);
            Value at_pts = ad::sparse_apply(out, maps.interp[p]);
            acc = acc ? ad::add(acc, at_pts) : at_pts;
        }
        return output_act(nn::mlp_forward(acc, nn::mlp_spec(h, {h, cfg_.field_channels}, Act::Gelu, Act::Identity),
                                          store_, "head"));
    }

  private:
    static constexpr std::array<std::array<int, 2>, 3> axes_{{{0, 1}, {1, 2}, {0, 2}}};
    std::array<int, 3> pa_{}, pb_{};
    std::array<std::shared_ptr<const ad::SparseMap>, 3> up_{};
    SampleCache<PlaneMaps> cache_;

    static Value to_conv(const Value& rows, int c, int a, int b) {
        return ad::reshape(ad::transpose2d(rows), {c, a, b, 1});
    }
    static Value to_rows(const Value& x, int c) {
        const int cells = static_cast<int>(x->size()) / c;
        return ad::transpose2d(ad::reshape(x, {c, cells}));
    }

    Value unet(const Value& plane_rows, int a, int b, const std::shared_ptr<const ad::SparseMap>& up) {
        const int h = cfg_.hidden_grid;
        Value e = nn::conv3_layer(to_conv(plane_rows, h, a, b), store_, "u.enc", 1, ad::Padding::Same, Act::Gelu);
        Value d = nn::conv3_layer(e, store_, "u.down", 2, ad::Padding::Same, Act::Gelu);
        d = nn::conv3_layer(d, store_, "u.bott", 1, ad::Padding::Same, Act::Gelu);
        Value up_rows = ad::sparse_apply(to_rows(d, 2 * h), up);  // [a*b, 2h]
        Value u = nn::conv3_layer(to_conv(up_rows, 2 * h, a, b), store_, "u.up", 1, ad::Padding::Same, Act::Gelu);
        Value fused = ad::add(u, e);
        Value out = nn::conv3_layer(fused, store_, "u.out", 1, ad::Padding::Same, Act::Identity);
        return to_rows(out, h);
    }

    static std::shared_ptr<const ad::SparseMap> upsample_map(int a, int b) {
        const int qa = (a + 1) / 2, qb = (b + 1) / 2;
        auto m = std::make_shared<ad::SparseMap>();
        m->in_rows = qa * qb;
        m->out_rows = a * b;
        for (int x = 0; x < a; ++x)
            for (int y = 0; y < b; ++y) {
                m->out_idx.push_back(x * b + y);
                m->in_idx.push_back((x / 2) * qb + y / 2);
                m->w.push_back(1.0);
            }
        return m;
    }

    PlaneMaps plane_maps(const data::Sample& s) const {
        PlaneMaps maps;
        for (int p = 0; p < 3; ++p) {
            const int a = pa_[p], b = pb_[p];
            const int ax0 = axes_[p][0], ax1 = axes_[p][1];
            auto interp = std::make_shared<ad::SparseMap>();
            interp->in_rows = a * b;
            interp->out_rows = s.n;
            std::vector<double> node_mass(static_cast<std::size_t>(a) * b, 0.0);
            struct Entry { int node, pt; double w; };
            std::vector<Entry> entries;
            for (int i = 0; i < s.n; ++i) {
                auto cellpos = [&](int axis, int extent) {
                    const double lo = cfg_.grid_lo[static_cast<std::size_t>(axis)];
                    const double hi = cfg_.grid_hi[static_cast<std::size_t>(axis)];
                    double u = (s.coords[static_cast<std::size_t>(i) * 3 + axis] - lo) / (hi - lo) * (extent - 1);
                    u = std::clamp(u, 0.0, static_cast<double>(extent - 1));
                    int i0 = std::min(static_cast<int>(u), extent - 2);
                    return std::pair{i0, u - i0};
                };
                auto [ia, fa] = cellpos(ax0, a);
                auto [ib, fb] = cellpos(ax1, b);
                const double w4[4] = {(1 - fa) * (1 - fb), (1 - fa) * fb, fa * (1 - fb), fa * fb};
                const int n4[4] = {ia * b + ib, ia * b + ib + 1, (ia + 1) * b + ib, (ia + 1) * b + ib + 1};
                for (int q = 0; q < 4; ++q) {
                    interp->out_idx.push_back(i);
                    interp->in_idx.push_back(n4[q]);
                    interp->w.push_back(w4[q]);
                    entries.push_back({n4[q], i, w4[q]});
                    node_mass[static_cast<std::size_t>(n4[q])] += w4[q];
                }
            }
            auto splat = std::make_shared<ad::SparseMap>();
            splat->in_rows = s.n;
            splat->out_rows = a * b;
            for (const auto& e : entries) {
                if (node_mass[static_cast<std::size_t>(e.node)] <= 0.0 || e.w == 0.0) continue;
                splat->out_idx.push_back(e.node);
                splat->in_idx.push_back(e.pt);
                splat->w.push_back(e.w / node_mass[static_cast<std::size_t>(e.node)]);
            }
            maps.interp[p] = interp;
            maps.splat[p] = splat;
        }
        return maps;
    }
};

class PointNet : public GeometricModel {
  public:
    explicit PointNet(ModelConfig cfg) : GeometricModel(std::move(cfg)) {
        init_fusion();
        nn::init_mlp(store_, "shared", stack(in_dim()), *rng_);
        nn::init_mlp(store_, "qenc", stack(in_dim()), *rng_);
        nn::init_mlp(store_, "head", head_spec(), *rng_);
    }

    Value forward(const data::Sample& s) override {
        if (s.n < 1) throw ConfigError("pointnet: empty point cloud");
        Value x = input_features(s);
        Value emb = nn::mlp_forward(x, stack(in_dim()), store_, "shared");
        Value global = ad::max_rows(emb);
        Value q = nn::mlp_forward(x, stack(in_dim()), store_, "qenc");
        Value cat = ad::concat_cols(q, ad::repeat_row(global, s.n));
        return output_act(nn::mlp_forward(cat, head_spec(), store_, "head"));
    }

  private:
    std::vector<nn::LayerSpec> stack(int in) const {
        std::vector<int> widths(static_cast<std::size_t>(cfg_.layers), cfg_.hidden_point);
        return nn::mlp_spec(in, widths, Act::Gelu, Act::Identity);
    }
    std::vector<nn::LayerSpec> head_spec() const {
        return nn::mlp_spec(2 * cfg_.hidden_point, {cfg_.hidden_point, cfg_.field_channels}, Act::Gelu, Act::Identity);
    }
};

// Stacked full self-attention over all points (Eq. 17 form).
class Gnot : public GeometricModel {
  public:
    explicit Gnot(ModelConfig cfg) : GeometricModel(std::move(cfg)) {
        init_fusion();
        const int h = cfg_.hidden_graph;
        nn::init_mlp(store_, "enc", nn::mlp_spec(in_dim(), {h}, Act::Gelu, Act::Gelu), *rng_);
        for (int l = 0; l < cfg_.layers; ++l)
            nn::init_attention(store_, "attn" + std::to_string(l), h, *rng_);
        nn::init_mlp(store_, "head", nn::mlp_spec(h, {h, cfg_.field_channels}, Act::Gelu, Act::Identity), *rng_);
    }

    Value forward(const data::Sample& s) override {
        const int h = cfg_.hidden_graph;
        Value v = nn::mlp_forward(input_features(s), nn::mlp_spec(in_dim(), {h}, Act::Gelu, Act::Gelu),
                                  store_, "enc");
        const double tau = attn_tau(cfg_, h);
        for (int l = 0; l < cfg_.layers; ++l) v = nn::self_attention(v, store_, "attn" + std::to_string(l), tau);
        return output_act(nn::mlp_forward(v, nn::mlp_spec(h, {h, cfg_.field_channels}, Act::Gelu, Act::Identity),
                                          store_, "head"));
    }
};

// Slice tokens: per-point softmax weights pool features into M tokens, the
// tokens run through attention with a feed-forward sublayer, and predictions
// are redistributed through the same weights.
class Transolver : public GeometricModel {
  public:
    explicit Transolver(ModelConfig cfg) : GeometricModel(std::move(cfg)) {
        init_fusion();
        const int h = cfg_.hidden_point;
        nn::init_mlp(store_, "enc", nn::mlp_spec(in_dim(), {h}, Act::Gelu, Act::Gelu), *rng_);
        nn::init_mlp(store_, "slice", nn::mlp_spec(h, {cfg_.slices}, Act::Identity), *rng_);
        for (int l = 0; l < cfg_.layers; ++l) {
            nn::init_attention(store_, "attn" + std::to_string(l), h, *rng_);
            nn::init_mlp(store_, "ffn" + std::to_string(l), nn::mlp_spec(h, {h}, Act::Gelu, Act::Gelu), *rng_);
        }
        nn::init_mlp(store_, "head", nn::mlp_spec(h, {h, cfg_.field_channels}, Act::Gelu, Act::Identity), *rng_);
    }

    Value forward(const data::Sample& s) override {
        const int h = cfg_.hidden_point;
        Value v = nn::mlp_forward(input_features(s), nn::mlp_spec(in_dim(), {h}, Act::Gelu, Act::Gelu),
                                  store_, "enc");
        Value w = ad::softmax(nn::mlp_forward(v, nn::mlp_spec(h, {cfg_.slices}, Act::Identity), store_, "slice"), 1);
        Value num = ad::matmul_tn_stable(w, v);                                     // [M, h]
        Value den = ad::matmul_tn_stable(w, ad::constant({s.n, 1}, std::vector<double>(static_cast<std::size_t>(s.n), 1.0)));
        Value tokens = ad::div_rows(num, den);
        const double tau = attn_tau(cfg_, h);
        for (int l = 0; l < cfg_.layers; ++l) {
            tokens = nn::self_attention(tokens, store_, "attn" + std::to_string(l), tau);
            tokens = nn::mlp_forward(tokens, nn::mlp_spec(h, {h}, Act::Gelu, Act::Gelu), store_,
                                     "ffn" + std::to_string(l));
        }
        Value back = ad::matmul(w, tokens);  // [N, h]
        return output_act(nn::mlp_forward(back, nn::mlp_spec(h, {h, cfg_.field_channels}, Act::Gelu, Act::Identity),
                                          store_, "head"));
    }
};

}  // namespace

std::unique_ptr<Model> make_geometric(const ModelConfig& cfg) {
    if (cfg.name == "gno") return std::make_unique<Gno>(cfg, false);
    if (cfg.name == "eagno") return std::make_unique<Gno>(cfg, true);
    if (cfg.name == "gino") return std::make_unique<Gino>(cfg);
    if (cfg.name == "figconv") return std::make_unique<FigConv>(cfg);
    if (cfg.name == "pointnet") return std::make_unique<PointNet>(cfg);
    if (cfg.name == "gnot") return std::make_unique<Gnot>(cfg);
    if (cfg.name == "transolver") return std::make_unique<Transolver>(cfg);
    throw ConfigError("unknown model '" + cfg.name + "'");
}

}  // namespace nob::models
