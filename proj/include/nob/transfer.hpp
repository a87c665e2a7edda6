#pragma once

#include "nob/geometry.hpp"
#include "nob/nn.hpp"

namespace nob::geom {

// Directed aggregation edges source -> destination within radius r.
struct TransferEdges {
    int n_src = 0;
    int n_dst = 0;
    std::vector<int> src;
    std::vector<int> dst;
};

TransferEdges make_transfer_edges(const std::vector<Vec3>& src_coords,
                                  const std::vector<Vec3>& dst_coords, double r);

// Radius-limited kernel aggregation:
//   out[g] = sum over edges (i -> g) of mp([v_src[i], v_dst_ctx[g]]) * f(v_src[i])
// where mp is an MLP to a scalar and f maps source features to the output
// width. Destinations with empty neighborhoods receive the zero feature.
ad::Value transfer_aggregate(const ad::Value& src_feats, const ad::Value& dst_ctx,
                             const TransferEdges& edges, nn::ParamStore& store,
                             const std::vector<nn::LayerSpec>& mp_layers, const std::string& mp_prefix,
                             const std::vector<nn::LayerSpec>& f_layers, const std::string& f_prefix);

// Eq-style encode: point features onto grid nodes (context = node coordinates).
ad::Value points_to_grid(const ad::Value& point_feats, const std::vector<Vec3>& point_coords,
                         const RegularGrid& grid, double r, nn::ParamStore& store,
                         const std::vector<nn::LayerSpec>& mp_layers, const std::string& mp_prefix,
                         const std::vector<nn::LayerSpec>& f_layers, const std::string& f_prefix);

// Mirror decode: grid features onto query points (context = query features).
ad::Value grid_to_points(const ad::Value& grid_feats, const RegularGrid& grid,
                         const std::vector<Vec3>& queries, const ad::Value& query_ctx, double r,
                         nn::ParamStore& store, const std::vector<nn::LayerSpec>& mp_layers,
                         const std::string& mp_prefix, const std::vector<nn::LayerSpec>& f_layers,
                         const std::string& f_prefix);

}  // namespace nob::geom
