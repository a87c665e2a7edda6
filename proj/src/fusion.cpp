#include "nob/fusion.hpp"

#include "nob/errors.hpp"

namespace nob::fusion {

using ad::Value;

void FusionConfig::validate() const {
    if (voxel_res < 2 || voxel_res > 100)
        throw ConfigError("fusion: voxel resolution must be in [2, 100] per axis");
    if (branch_embed < 1) throw ConfigError("fusion: branch embedding width must be positive");
}

Mode mode_from_string(const std::string& tag) {
    if (tag == "none") return Mode::None;
    if (tag == "concat") return Mode::Concat;
    if (tag == "branch") return Mode::Branch;
    throw ConfigError("fusion: unknown mode '" + tag + "'");
}

GeoEnc geoenc_from_string(const std::string& tag) {
    if (tag == "none") return GeoEnc::None;
    if (tag == "desc") return GeoEnc::Descriptors;
    if (tag == "voxel10" || tag == "voxel50" || tag == "voxel100") return GeoEnc::Voxel;
    throw ConfigError("fusion: unknown geometry encoding '" + tag + "'");
}

std::string mode_to_string(Mode m) {
    switch (m) {
        case Mode::None: return "none";
        case Mode::Concat: return "concat";
        case Mode::Branch: return "branch";
    }
    return "none";
}

std::string geoenc_to_string(GeoEnc g) {
    switch (g) {
        case GeoEnc::None: return "none";
        case GeoEnc::Descriptors: return "desc";
        case GeoEnc::Voxel: return "voxel";
    }
    return "none";
}

Value concat_params(const Value& x, const std::vector<double>& p) {
    if (p.empty()) return x;
    const int n = x->rows();
    Value prow = ad::constant({1, static_cast<int>(p.size())}, p);
    return ad::concat_cols(x, ad::repeat_row(prow, n));
}

void init_branch_fuse(nn::ParamStore& store, const std::string& prefix, int p_dim, int embed,
                      Rng& rng) {
    if (p_dim < 1) throw ConfigError("branch_fuse: no parametric inputs to fuse");
    nn::init_mlp(store, prefix, nn::mlp_spec(p_dim, {embed, embed}, ad::Act::Gelu), rng);
}

Value branch_fuse(const Value& feats, const std::vector<double>& p, nn::ParamStore& store,
                  const std::string& prefix, int p_dim, int embed) {
    if (static_cast<int>(p.size()) != p_dim)
        throw ConfigError("branch_fuse: parameter vector length mismatch");
    Value prow = ad::constant({1, p_dim}, p);
    Value emb = nn::mlp_forward(prow, nn::mlp_spec(p_dim, {embed, embed}, ad::Act::Gelu), store, prefix);
    return ad::concat_cols(feats, ad::repeat_row(emb, feats->rows()));
}

void init_voxel_branch(nn::ParamStore& store, const std::string& prefix, int latent, Rng& rng) {
    nn::init_conv3(store, prefix + ".c0", 1, 8, {3, 3, 3}, rng);
    nn::init_conv3(store, prefix + ".c1", 8, 16, {3, 3, 3}, rng);
    nn::init_conv3(store, prefix + ".c2", 16, 32, {3, 3, 3}, rng);
    nn::init_mlp(store, prefix + ".head", nn::mlp_spec(32, {latent}, ad::Act::Identity), rng);
}

Value voxel_branch(const std::vector<geom::Vec3>& cloud, const geom::RegularGrid& grid,
                   nn::ParamStore& store, const std::string& prefix) {
    const int nx = grid.extents[0] - 1, ny = grid.extents[1] - 1, nz = grid.extents[2] - 1;
    if (nx > 100 || ny > 100 || nz > 100)
        throw ConfigError("voxel_branch: resolution exceeds 100 cells per axis");
    geom::PointCloud pc{cloud};
    std::vector<std::uint8_t> occ = geom::voxelize(pc, grid);
    std::vector<double> vals(occ.begin(), occ.end());
    Value x = ad::constant({1, nx, ny, nz}, std::move(vals));
    x = nn::conv3_layer(x, store, prefix + ".c0", 2, ad::Padding::Same, ad::Act::Gelu);
    x = nn::conv3_layer(x, store, prefix + ".c1", 2, ad::Padding::Same, ad::Act::Gelu);
    x = nn::conv3_layer(x, store, prefix + ".c2", 2, ad::Padding::Same, ad::Act::Gelu);
    const int cells = static_cast<int>(x->size()) / 32;
    Value flat = ad::reshape(x, {32, cells});
    Value pooled = ad::mean_rows(ad::transpose2d(flat));  // [1, 32]
    const int latent = store.get(prefix + ".head.L0.W")->shape[1];
    return nn::mlp_forward(pooled, nn::mlp_spec(32, {latent}, ad::Act::Identity), store, prefix + ".head");
}

void init_descriptor_branch(nn::ParamStore& store, const std::string& prefix, int latent, Rng& rng) {
    nn::init_mlp(store, prefix, nn::mlp_spec(18, {latent, latent}, ad::Act::Gelu), rng);
}

Value descriptor_branch(const std::vector<geom::Vec3>& cloud, nn::ParamStore& store,
                        const std::string& prefix, int latent) {
    geom::PointCloud pc{cloud};
    std::vector<double> d = geom::descriptors(pc).to_vector();
    Value row = ad::constant({1, 18}, std::move(d));
    return nn::mlp_forward(row, nn::mlp_spec(18, {latent, latent}, ad::Act::Gelu), store, prefix);
}

}  // namespace nob::fusion
