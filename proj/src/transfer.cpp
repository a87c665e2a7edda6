#include "nob/transfer.hpp"

#include "nob/errors.hpp"

namespace nob::geom {

TransferEdges make_transfer_edges(const std::vector<Vec3>& src_coords,
                                  const std::vector<Vec3>& dst_coords, double r) {
    PointCloud cloud{src_coords};
    Graph g = radius_neighbors(cloud, dst_coords, r);
    TransferEdges e;
    e.n_src = static_cast<int>(src_coords.size());
    e.n_dst = static_cast<int>(dst_coords.size());
    for (int d = 0; d < g.n; ++d)
        for (int t = g.offsets[d]; t < g.offsets[d + 1]; ++t) {
            e.src.push_back(g.targets[static_cast<std::size_t>(t)]);
            e.dst.push_back(d);
        }
    return e;
}

ad::Value transfer_aggregate(const ad::Value& src_feats, const ad::Value& dst_ctx,
                             const TransferEdges& edges, nn::ParamStore& store,
                             const std::vector<nn::LayerSpec>& mp_layers, const std::string& mp_prefix,
                             const std::vector<nn::LayerSpec>& f_layers, const std::string& f_prefix) {
    if (src_feats->shape[0] != edges.n_src)
        throw ShapeError("transfer_aggregate: source features have " + std::to_string(src_feats->shape[0]) +
                         " rows, edges expect " + std::to_string(edges.n_src));
    if (dst_ctx->shape[0] != edges.n_dst)
        throw ShapeError("transfer_aggregate: destination context has " + std::to_string(dst_ctx->shape[0]) +
                         " rows, edges expect " + std::to_string(edges.n_dst));
    const int out_dim = f_layers.back().out_dim;
    if (mp_layers.back().out_dim != 1) throw ShapeError("transfer_aggregate: mp network must output a scalar");
    if (edges.src.empty()) return ad::zeros({edges.n_dst, out_dim});
    ad::Value gs = ad::gather_rows(src_feats, edges.src);
    ad::Value gd = ad::gather_rows(dst_ctx, edges.dst);
    ad::Value m = nn::mlp_forward(ad::concat_cols(gs, gd), mp_layers, store, mp_prefix);
    ad::Value f = nn::mlp_forward(gs, f_layers, store, f_prefix);
    return ad::scatter_add_rows(ad::scale_rows(f, m), edges.dst, edges.n_dst);
}

ad::Value points_to_grid(const ad::Value& point_feats, const std::vector<Vec3>& point_coords,
                         const RegularGrid& grid, double r, nn::ParamStore& store,
                         const std::vector<nn::LayerSpec>& mp_layers, const std::string& mp_prefix,
                         const std::vector<nn::LayerSpec>& f_layers, const std::string& f_prefix) {
    if (r <= 0.0) throw ConfigError("points_to_grid: r must be positive");
    grid.validate();
    auto nodes = grid.node_coords();
    TransferEdges edges = make_transfer_edges(point_coords, nodes, r);
    std::vector<double> ctx;
    ctx.reserve(nodes.size() * 3);
    for (const auto& p : nodes) ctx.insert(ctx.end(), p.begin(), p.end());
    ad::Value dst_ctx = ad::constant({static_cast<int>(nodes.size()), 3}, std::move(ctx));
    return transfer_aggregate(point_feats, dst_ctx, edges, store, mp_layers, mp_prefix, f_layers, f_prefix);
}

ad::Value grid_to_points(const ad::Value& grid_feats, const RegularGrid& grid,
                         const std::vector<Vec3>& queries, const ad::Value& query_ctx, double r,
                         nn::ParamStore& store, const std::vector<nn::LayerSpec>& mp_layers,
                         const std::string& mp_prefix, const std::vector<nn::LayerSpec>& f_layers,
                         const std::string& f_prefix) {
    if (r <= 0.0) throw ConfigError("grid_to_points: r must be positive");
    grid.validate();
    TransferEdges edges = make_transfer_edges(grid.node_coords(), queries, r);
    return transfer_aggregate(grid_feats, query_ctx, edges, store, mp_layers, mp_prefix, f_layers, f_prefix);
}

}  // namespace nob::geom
