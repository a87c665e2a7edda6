#pragma once

#include <string>

#include "nob/geometry.hpp"
#include "nob/nn.hpp"

namespace nob::fusion {

// How parametric inputs reach geometric operators, and how freeform geometry
// reaches branch-trunk models.
enum class Mode { None, Concat, Branch };
enum class GeoEnc { None, Descriptors, Voxel };

struct FusionConfig {
    Mode mode = Mode::None;
    GeoEnc geoenc = GeoEnc::None;
    int voxel_res = 10;      // cells per axis, capped at 100
    int branch_embed = 16;   // width of the branch_fuse embedding

    void validate() const;
};

Mode mode_from_string(const std::string& tag);
GeoEnc geoenc_from_string(const std::string& tag);
std::string mode_to_string(Mode m);
std::string geoenc_to_string(GeoEnc g);

// Appends the parameter vector to every row of x.
ad::Value concat_params(const ad::Value& x, const std::vector<double>& p);

// Embeds p with a small MLP and concatenates the embedding onto every row.
void init_branch_fuse(nn::ParamStore& store, const std::string& prefix, int p_dim, int embed,
                      Rng& rng);
ad::Value branch_fuse(const ad::Value& feats, const std::vector<double>& p, nn::ParamStore& store,
                      const std::string& prefix, int p_dim, int embed);

// Occupancy voxelization followed by a strided conv encoder to a latent row.
void init_voxel_branch(nn::ParamStore& store, const std::string& prefix, int latent, Rng& rng);
ad::Value voxel_branch(const std::vector<geom::Vec3>& cloud, const geom::RegularGrid& grid,
                       nn::ParamStore& store, const std::string& prefix);

// 18-value geometric descriptor vector through an MLP to a latent row.
void init_descriptor_branch(nn::ParamStore& store, const std::string& prefix, int latent, Rng& rng);
ad::Value descriptor_branch(const std::vector<geom::Vec3>& cloud, nn::ParamStore& store,
                            const std::string& prefix, int latent);

}  // namespace nob::fusion
