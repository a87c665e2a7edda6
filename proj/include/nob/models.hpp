#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "nob/data.hpp"
#include "nob/fusion.hpp"
#include "nob/geometry.hpp"
#include "nob/nn.hpp"
#include "nob/transfer.hpp"

namespace nob::models {

struct ModelConfig {
    std::string name;
    // dataset dims
    int geo_dim = 0;
    int load_dim = 0;
    int field_channels = 1;
    bool sigmoid_output = false;
    // family widths
    int latent = 128;        // branch-trunk
    int hidden_graph = 32;   // graph operators
    int hidden_grid = 16;    // grid operators
    int hidden_point = 128;  // point operators
    int layers = 3;
    int dcon_layers = 3;
    // attention / slices
    int slices = 16;     // transolver token count
    double tau = 0.0;    // 0 -> sqrt(dim)
    // grid operators
    std::array<int, 3> grid_extents{8, 8, 8};
    geom::Vec3 grid_lo{0.0, 0.0, 0.0};
    geom::Vec3 grid_hi{1.0, 1.0, 1.0};
    std::array<int, 3> modes{4, 4, 4};
    bool pure_spectral = false;  // drop the pointwise bypass in Fourier layers
    double radius = 0.0;         // point/grid transfer radius; 0 -> cell diagonal heuristic
    // graph operators
    int knn_k = 6;        // fallback connectivity when a sample carries no edges
    bool rel_disp = true; // message-passing net sees x_j - x_i
    int extra_edges = 32; // random long-range edges (eagno)
    // misc
    std::uint64_t seed = 0;
    fusion::FusionConfig fuse;

    void validate() const;
};

// Populate dataset-dependent fields (dims, grid box, output activation).
ModelConfig config_for(const std::string& name, const data::Manifest& m);

// Random undirected long-range edges over non-adjacent pairs; deterministic
// per seed. Requests beyond the available non-edges are clamped.
geom::Graph augment_edges(const geom::Graph& g, int extra, std::uint64_t seed);

// Per-sample derived geometry (graphs, transfer edges) cached across epochs.
// Keyed by sample address; safe under concurrent read-mostly evaluation.
template <typename T>
class SampleCache {
  public:
    template <typename F>
    const T& get(const data::Sample* key, F&& build) {
        {
            std::lock_guard<std::mutex> lk(mu_);
            auto it = map_.find(key);
            if (it != map_.end()) return *it->second;
        }
        auto built = std::make_unique<T>(build());
        std::lock_guard<std::mutex> lk(mu_);
        auto [it, inserted] = map_.emplace(key, std::move(built));
        return *it->second;
    }

  private:
    std::mutex mu_;
    std::unordered_map<const data::Sample*, std::unique_ptr<T>> map_;
};

class Model {
  public:
    explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) {}
    virtual ~Model() = default;

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }

    // Predictions at the sample's own points, [N, channels], in the dataset's
    // (possibly normalized) field units.
    virtual ad::Value forward(const data::Sample& s) = 0;

  protected:
    // parameter vector as the model sees it: params then loads
    std::vector<double> param_vec(const data::Sample& s) const;
    ad::Value query_matrix(const data::Sample& s) const;
    ad::Value output_act(const ad::Value& y) const;

    ModelConfig cfg_;
    nn::ParamStore store_;
};

const std::vector<std::string>& model_names();
std::unique_ptr<Model> make_model(const ModelConfig& cfg);

// Small deterministic fixtures for gradient checks and smoke tests.
data::Sample toy_sample(int n, int geo_dim, int load_dim, int channels, std::uint64_t seed);
ModelConfig toy_config(const std::string& name);

}  // namespace nob::models
