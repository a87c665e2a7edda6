#include <cmath>

#include "nob/errors.hpp"
#include "nob/models.hpp"

namespace nob::models {

using ad::Act;
using ad::Value;

void ModelConfig::validate() const {
    if (name.empty()) throw ConfigError("model: empty name");
    if (latent < 1 || hidden_graph < 1 || hidden_grid < 1 || hidden_point < 1)
        throw ConfigError("model: hidden dims must be positive");
    if (layers < 1) throw ConfigError("model: layer count must be >= 1");
    if (dcon_layers < 1) throw ConfigError("model: operator layer count must be >= 1");
    if (slices < 1) throw ConfigError("model: slice count must be >= 1");
    if (field_channels < 1) throw ConfigError("model: field channels must be >= 1");
    if (latent % field_channels != 0)
        throw ConfigError("model: latent dim must be divisible by field channels");
    if (extra_edges < 0) throw ConfigError("model: extra edge count must be >= 0");
    fuse.validate();
}

ModelConfig config_for(const std::string& name, const data::Manifest& m) {
    ModelConfig cfg;
    cfg.name = name;
    cfg.geo_dim = m.geo_dim;
    cfg.load_dim = m.load_dim;
    cfg.field_channels = m.field_channels;
    cfg.sigmoid_output = m.normalized_outputs;
    cfg.grid_extents = m.grid_shape;
    cfg.grid_lo = m.grid_lo;
    cfg.grid_hi = m.grid_hi;
    return cfg;
}

std::vector<double> Model::param_vec(const data::Sample& s) const {
    std::vector<double> p = s.params;
    p.insert(p.end(), s.loads.begin(), s.loads.end());
    return p;
}

Value Model::query_matrix(const data::Sample& s) const {
    if (s.n < 1) throw ConfigError("model: sample has no points");
    return ad::constant({s.n, 3}, s.coords);
}

Value Model::output_act(const Value& y) const {
    return cfg_.sigmoid_output ? ad::activation(y, Act::Sigmoid) : y;
}

namespace {

double attn_tau(const ModelConfig& cfg, int dim) {
    return cfg.tau > 0.0 ? cfg.tau : std::sqrt(static_cast<double>(dim));
}

// Chunked Eq.-5 reduction: latent split into `c` equal blocks, each summed to
// one output channel, plus a per-channel bias.
Value chunk_reduce(const Value& prod, int channels, const Value& bias) {
    const int latent = prod->shape[1];
    const int chunk = latent / channels;
    std::vector<double> sel(static_cast<std::size_t>(latent) * channels, 0.0);
    for (int i = 0; i < latent; ++i) sel[static_cast<std::size_t>(i) * channels + i / chunk] = 1.0;
    Value s = ad::constant({latent, channels}, std::move(sel));
    return ad::add_rowvec(ad::matmul(prod, s), bias);
}

// Shared plumbing for the Eq.-5 family: a branch latent (model-specific), a
// trunk on query coordinates, optional geometry encoding fused into the
// branch, and the chunked reduction head.
class BranchTrunkModel : public Model {
  public:
    explicit BranchTrunkModel(ModelConfig cfg) : Model(std::move(cfg)) {
        p_dim_ = cfg_.geo_dim + cfg_.load_dim;
        rng_ = std::make_unique<Rng>(cfg_.seed);
    }

  protected:
    int p_dim_ = 0;
    std::unique_ptr<Rng> rng_;

    void init_geo_fusion() {
        if (cfg_.fuse.geoenc == fusion::GeoEnc::None) {
            if (branch_in_dim() == 0)
                throw ConfigError(cfg_.name + ": dataset has no parametric inputs; enable a geometry encoding");
            return;
        }
        if (cfg_.fuse.geoenc == fusion::GeoEnc::Voxel)
            fusion::init_voxel_branch(store_, "geo", cfg_.latent, *rng_);
        else
            fusion::init_descriptor_branch(store_, "geo", cfg_.latent, *rng_);
        if (branch_in_dim() > 0)
            nn::init_mlp(store_, "bfuse", nn::mlp_spec(2 * cfg_.latent, {cfg_.latent}, Act::Identity), *rng_);
    }

    virtual int branch_in_dim() const { return p_dim_; }

    Value geo_latent(const data::Sample& s) {
        if (cfg_.fuse.geoenc == fusion::GeoEnc::Voxel) {
            geom::RegularGrid g;
            g.extents = {cfg_.fuse.voxel_res + 1, cfg_.fuse.voxel_res + 1, cfg_.fuse.voxel_res + 1};
            g.lo = cfg_.grid_lo;
            g.hi = cfg_.grid_hi;
            return fusion::voxel_branch(s.points(), g, store_, "geo");
        }
        return fusion::descriptor_branch(s.points(), store_, "geo", cfg_.latent);
    }

    // combine the model's own branch latent with the geometry encoding
    Value fuse_branch(const Value& b_core, const data::Sample& s) {
        if (cfg_.fuse.geoenc == fusion::GeoEnc::None) return b_core;
        Value g = geo_latent(s);
        if (!b_core) return g;
        return nn::mlp_forward(ad::concat_cols(b_core, g),
                               nn::mlp_spec(2 * cfg_.latent, {cfg_.latent}, Act::Identity), store_, "bfuse");
    }

    std::vector<nn::LayerSpec> trunk_spec(int out_dim) const {
        std::vector<int> widths(static_cast<std::size_t>(cfg_.layers), cfg_.latent);
        widths.back() = out_dim;
        return nn::mlp_spec(3, widths, Act::Gelu, Act::Identity);
    }

    std::vector<nn::LayerSpec> branch_spec(int in_dim) const {
        std::vector<int> widths(static_cast<std::size_t>(cfg_.layers), cfg_.latent);
        return nn::mlp_spec(in_dim, widths, Act::Gelu, Act::Identity);
    }
};

class DeepONet : public BranchTrunkModel {
  public:
    explicit DeepONet(ModelConfig cfg, bool siren) : BranchTrunkModel(std::move(cfg)), siren_(siren) {
        init_geo_fusion();
        if (branch_in_dim() > 0) {
            auto spec = branch_spec(p_dim_);
            if (siren_) {
                for (std::size_t i = 0; i + 1 < spec.size(); ++i) spec[i].act = Act::Sin;
                spec.back().act = Act::Identity;
                nn::init_siren(store_, "branch", spec, *rng_);
            } else {
                nn::init_mlp(store_, "branch", spec, *rng_);
            }
        }
        nn::init_mlp(store_, "trunk", trunk_spec(cfg_.latent), *rng_);
        store_.add("out.b", {1, cfg_.field_channels},
                   std::vector<double>(static_cast<std::size_t>(cfg_.field_channels), 0.0));
    }

    Value forward(const data::Sample& s) override {
        Value b;
        if (branch_in_dim() > 0) {
            Value p = ad::constant({1, p_dim_}, param_vec(s));
            auto spec = branch_spec(p_dim_);
            if (siren_) {
                for (std::size_t i = 0; i + 1 < spec.size(); ++i) spec[i].act = Act::Sin;
                spec.back().act = Act::Identity;
                b = nn::siren_forward(p, spec, store_, "branch", omega0_);
            } else {
                b = nn::mlp_forward(p, spec, store_, "branch");
            }
        }
        b = fuse_branch(b, s);
        Value t = nn::mlp_forward(query_matrix(s), trunk_spec(cfg_.latent), store_, "trunk");
        Value prod = ad::mul(t, ad::repeat_row(b, s.n));
        return output_act(chunk_reduce(prod, cfg_.field_channels, store_.get("out.b")));
    }

  private:
    bool siren_;
    double omega0_ = 30.0;
};

class SDeepONet : public BranchTrunkModel {
  public:
    explicit SDeepONet(ModelConfig cfg) : BranchTrunkModel(std::move(cfg)) {
        if (cfg_.load_dim < 1) throw ConfigError(cfg_.name + ": dataset has no load sequence");
        init_geo_fusion();
        nn::init_gru(store_, "branch", 1 + cfg_.geo_dim, cfg_.latent, *rng_);
        nn::init_mlp(store_, "trunk", trunk_spec(cfg_.latent), *rng_);
        store_.add("out.b", {1, cfg_.field_channels},
                   std::vector<double>(static_cast<std::size_t>(cfg_.field_channels), 0.0));
    }

    Value forward(const data::Sample& s) override {
        const int t_steps = cfg_.load_dim;
        const int d = 1 + cfg_.geo_dim;
        std::vector<double> seq(static_cast<std::size_t>(t_steps) * d);
        for (int t = 0; t < t_steps; ++t) {
            seq[static_cast<std::size_t>(t) * d] = s.loads[static_cast<std::size_t>(t)];
            for (int j = 0; j < cfg_.geo_dim; ++j)
                seq[static_cast<std::size_t>(t) * d + 1 + j] = s.params[static_cast<std::size_t>(j)];
        }
        Value b = nn::gru_forward(ad::constant({t_steps, d}, std::move(seq)), store_, "branch", cfg_.latent);
        b = fuse_branch(b, s);
        Value t = nn::mlp_forward(query_matrix(s), trunk_spec(cfg_.latent), store_, "trunk");
        Value prod = ad::mul(t, ad::repeat_row(b, s.n));
        return output_act(chunk_reduce(prod, cfg_.field_channels, store_.get("out.b")));
    }
};

// reconstruction: tokens = MLP(load value, sinusoidal time encoding, params),
// two attention heads over the token sequence, mean pooled into the branch
class SNot : public BranchTrunkModel {
  public:
    explicit SNot(ModelConfig cfg) : BranchTrunkModel(std::move(cfg)) {
        if (cfg_.load_dim < 1) throw ConfigError(cfg_.name + ": dataset has no load sequence");
        init_geo_fusion();
        nn::init_mlp(store_, "tok", token_spec(), *rng_);
        nn::init_attention(store_, "attn.h0", cfg_.latent, *rng_);
        nn::init_attention(store_, "attn.h1", cfg_.latent, *rng_);
        nn::init_mlp(store_, "proj", nn::mlp_spec(2 * cfg_.latent, {cfg_.latent}, Act::Identity), *rng_);
        nn::init_mlp(store_, "trunk", trunk_spec(cfg_.latent), *rng_);
        store_.add("out.b", {1, cfg_.field_channels},
                   std::vector<double>(static_cast<std::size_t>(cfg_.field_channels), 0.0));
    }

    Value forward(const data::Sample& s) override {
        const int t_steps = cfg_.load_dim;
        const int d = 1 + 2 * kFreqs + cfg_.geo_dim;
        std::vector<double> tok(static_cast<std::size_t>(t_steps) * d);
        for (int t = 0; t < t_steps; ++t) {
            double* row = tok.data() + static_cast<std::size_t>(t) * d;
            row[0] = s.loads[static_cast<std::size_t>(t)];
            const double t01 = t_steps > 1 ? static_cast<double>(t) / (t_steps - 1) : 0.0;
            for (int k = 0; k < kFreqs; ++k) {
                row[1 + 2 * k] = std::sin((k + 1) * M_PI * t01);
                row[2 + 2 * k] = std::cos((k + 1) * M_PI * t01);
            }
            for (int j = 0; j < cfg_.geo_dim; ++j) row[1 + 2 * kFreqs + j] = s.params[static_cast<std::size_t>(j)];
        }
        Value x = nn::mlp_forward(ad::constant({t_steps, d}, std::move(tok)), token_spec(), store_, "tok");
        const double tau = attn_tau(cfg_, cfg_.latent);
        Value h0 = nn::self_attention(x, store_, "attn.h0", tau);
        Value h1 = nn::self_attention(x, store_, "attn.h1", tau);
        Value mixed = nn::mlp_forward(ad::concat_cols(h0, h1),
                                      nn::mlp_spec(2 * cfg_.latent, {cfg_.latent}, Act::Identity), store_, "proj");
        Value b = fuse_branch(ad::mean_rows(mixed), s);
        Value t = nn::mlp_forward(query_matrix(s), trunk_spec(cfg_.latent), store_, "trunk");
        Value prod = ad::mul(t, ad::repeat_row(b, s.n));
        return output_act(chunk_reduce(prod, cfg_.field_channels, store_.get("out.b")));
    }

  private:
    static constexpr int kFreqs = 4;

    std::vector<nn::LayerSpec> token_spec() const {
        return nn::mlp_spec(1 + 2 * kFreqs + cfg_.geo_dim, {cfg_.latent, cfg_.latent}, Act::Gelu);
    }
};

// Nested operator layers h_k = U_k(b * h_{k-1}); the last U_k keeps identity
// activation so a single identity layer degenerates to the plain product form.
Value dcon_compose(const Value& b, const Value& t, int n_rows, int layers, int latent,
                   nn::ParamStore& store, const std::string& prefix) {
    Value brows = ad::repeat_row(b, n_rows);
    Value h = t;
    for (int k = 0; k < layers; ++k) {
        const Act act = (k + 1 == layers) ? Act::Identity : Act::Gelu;
        Value mixed = ad::mul(brows, h);
        h = nn::mlp_forward(mixed, nn::mlp_spec(latent, {latent}, act, act), store,
                            prefix + ".U" + std::to_string(k));
    }
    return h;
}

void init_dcon_layers(nn::ParamStore& store, const std::string& prefix, int layers, int latent, Rng& rng) {
    for (int k = 0; k < layers; ++k)
        nn::init_mlp(store, prefix + ".U" + std::to_string(k),
                     nn::mlp_spec(latent, {latent}, Act::Identity), rng);
}

class Dcon : public BranchTrunkModel {
  public:
    explicit Dcon(ModelConfig cfg) : BranchTrunkModel(std::move(cfg)) {
        init_geo_fusion();
        if (branch_in_dim() > 0) nn::init_mlp(store_, "branch", branch_spec(p_dim_), *rng_);
        nn::init_mlp(store_, "trunk", trunk_spec(cfg_.latent), *rng_);
        init_dcon_layers(store_, "op", cfg_.dcon_layers, cfg_.latent, *rng_);
        nn::init_mlp(store_, "head", nn::mlp_spec(cfg_.latent, {cfg_.field_channels}, Act::Identity), *rng_);
    }

    Value forward(const data::Sample& s) override {
        Value b;
        if (branch_in_dim() > 0)
            b = nn::mlp_forward(ad::constant({1, p_dim_}, param_vec(s)), branch_spec(p_dim_), store_, "branch");
        b = fuse_branch(b, s);
        Value t = nn::mlp_forward(query_matrix(s), trunk_spec(cfg_.latent), store_, "trunk");
        Value h = dcon_compose(b, t, s.n, cfg_.dcon_layers, cfg_.latent, store_, "op");
        Value y = nn::mlp_forward(h, nn::mlp_spec(cfg_.latent, {cfg_.field_channels}, Act::Identity), store_, "head");
        return output_act(y);
    }
};

// DCON composition with the trunk input widened by a pooled point-cloud
// encoding; the branch falls back to that encoding when no parameters exist.
class Gano : public BranchTrunkModel {
  public:
    explicit Gano(ModelConfig cfg) : BranchTrunkModel(std::move(cfg)) {
        eg_dim_ = cfg_.latent / 2;
        nn::init_mlp(store_, "genc", genc_spec(), *rng_);
        const int b_in = p_dim_ > 0 ? p_dim_ : eg_dim_;
        nn::init_mlp(store_, "branch", branch_spec(b_in), *rng_);
        nn::init_mlp(store_, "trunk", gano_trunk_spec(), *rng_);
        init_dcon_layers(store_, "op", cfg_.dcon_layers, cfg_.latent, *rng_);
        nn::init_mlp(store_, "head", nn::mlp_spec(cfg_.latent, {cfg_.field_channels}, Act::Identity), *rng_);
    }

    Value forward(const data::Sample& s) override {
        if (s.n < 1) throw ConfigError("gano: empty point cloud");
        Value eg = ad::mean_rows(nn::mlp_forward(query_matrix(s), genc_spec(), store_, "genc"));
        Value b = p_dim_ > 0
                      ? nn::mlp_forward(ad::constant({1, p_dim_}, param_vec(s)), branch_spec(p_dim_), store_, "branch")
                      : nn::mlp_forward(eg, branch_spec(eg_dim_), store_, "branch");
        Value t = nn::mlp_forward(query_matrix(s), gano_trunk_spec(), store_, "trunk");
        Value h0 = ad::concat_cols(t, ad::repeat_row(eg, s.n));
        Value h = dcon_compose(b, h0, s.n, cfg_.dcon_layers, cfg_.latent, store_, "op");
        Value y = nn::mlp_forward(h, nn::mlp_spec(cfg_.latent, {cfg_.field_channels}, Act::Identity), store_, "head");
        return output_act(y);
    }

  private:
    int eg_dim_ = 0;

    std::vector<nn::LayerSpec> genc_spec() const {
        std::vector<int> widths(static_cast<std::size_t>(cfg_.layers), cfg_.latent);
        widths.back() = eg_dim_;
        return nn::mlp_spec(3, widths, Act::Gelu, Act::Identity);
    }
    std::vector<nn::LayerSpec> gano_trunk_spec() const {
        std::vector<int> widths(static_cast<std::size_t>(cfg_.layers), cfg_.latent);
        widths.back() = cfg_.latent - eg_dim_;
        return nn::mlp_spec(3, widths, Act::Gelu, Act::Identity);
    }
};

}  // namespace

std::unique_ptr<Model> make_geometric(const ModelConfig& cfg);

const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names = {
        "deeponet", "geom_deeponet", "sdeeponet", "snot", "dcon", "gano",
        "gno", "eagno", "gino", "figconv", "pointnet", "gnot", "transolver"};
    return names;
}

data::Sample toy_sample(int n, int geo_dim, int load_dim, int channels, std::uint64_t seed) {
    Rng rng(seed);
    data::Sample s;
    s.n = n;
    s.coords.resize(static_cast<std::size_t>(n) * 3);
    for (auto& v : s.coords) v = rng.uniform01();
    s.params.resize(static_cast<std::size_t>(geo_dim));
    for (auto& v : s.params) v = rng.uniform(-1.0, 1.0);
    s.loads.resize(static_cast<std::size_t>(load_dim));
    for (auto& v : s.loads) v = rng.uniform(-1.0, 1.0);
    s.field.resize(static_cast<std::size_t>(n) * channels);
    for (auto& v : s.field) v = rng.uniform01();
    return s;
}

ModelConfig toy_config(const std::string& name) {
    ModelConfig cfg;
    cfg.name = name;
    cfg.geo_dim = 2;
    cfg.load_dim = 4;
    cfg.field_channels = 1;
    cfg.latent = 8;
    cfg.hidden_graph = 8;
    cfg.hidden_grid = 6;
    cfg.hidden_point = 8;
    cfg.layers = 2;
    cfg.dcon_layers = 2;
    cfg.slices = 2;
    cfg.grid_extents = {4, 4, 4};
    cfg.modes = {2, 2, 2};
    cfg.knn_k = 3;
    cfg.extra_edges = 2;
    cfg.seed = 7;
    return cfg;
}

std::unique_ptr<Model> make_model(const ModelConfig& cfg) {
    cfg.validate();
    if (cfg.name == "deeponet") return std::make_unique<DeepONet>(cfg, false);
    if (cfg.name == "geom_deeponet") return std::make_unique<DeepONet>(cfg, true);
    if (cfg.name == "sdeeponet") return std::make_unique<SDeepONet>(cfg);
    if (cfg.name == "snot") return std::make_unique<SNot>(cfg);
    if (cfg.name == "dcon") return std::make_unique<Dcon>(cfg);
    if (cfg.name == "gano") return std::make_unique<Gano>(cfg);
    return make_geometric(cfg);
}

}  // namespace nob::models
