#pragma once

#include <map>
#include <string>
#include <vector>

#include "nob/rng.hpp"
#include "nob/tensor.hpp"

namespace nob::nn {

using ad::Act;
using ad::Value;

struct LayerSpec {
    enum class Kind { Affine, Sinusoidal, RecurrentCell, Attention, Conv3, Spectral };
    Kind kind = Kind::Affine;
    int in_dim = 0;
    int out_dim = 0;
    Act act = Act::Identity;
    // kind-specific extras
    double omega0 = 30.0;                 // sinusoidal frequency scale
    double tau = 0.0;                     // attention temperature (0 -> sqrt(d))
    std::array<int, 3> kernel{3, 3, 3};   // conv extents

    void validate() const;
};

std::vector<LayerSpec> mlp_spec(int in_dim, const std::vector<int>& widths, Act hidden_act,
                                Act final_act = Act::Identity);

struct AdamState {
    std::vector<double> m, v;
};

// Named parameter collection with per-entry Adam moment buffers and a
// shared step counter. Iteration order is by name (std::map), which also
// fixes the checkpoint block layout.
class ParamStore {
  public:
    Value add(const std::string& name, ad::Shape shape, std::vector<double> vals);
    const Value& get(const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) > 0; }
    void zero_grad();
    std::int64_t count() const;
    std::int64_t& step() { return step_; }
    std::map<std::string, Value>& entries() { return params_; }
    const std::map<std::string, Value>& entries() const { return params_; }
    std::map<std::string, AdamState>& opt_state() { return opt_; }

  private:
    std::map<std::string, Value> params_;
    std::map<std::string, AdamState> opt_;
    std::int64_t step_ = 0;
};

// ---- parameter initialization ----
// Affine layers: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) for weights and biases.
void init_mlp(ParamStore& store, const std::string& prefix, const std::vector<LayerSpec>& layers, Rng& rng);
// SIREN scheme: first layer uniform(-1/fan_in, 1/fan_in), deeper layers
// uniform(-sqrt(6/fan_in)/omega0, +...).
void init_siren(ParamStore& store, const std::string& prefix, const std::vector<LayerSpec>& layers, Rng& rng);
void init_gru(ParamStore& store, const std::string& prefix, int in_dim, int hidden, Rng& rng);
void init_attention(ParamStore& store, const std::string& prefix, int dim, Rng& rng);
void init_fourier(ParamStore& store, const std::string& prefix, int channels,
                  const ad::ModeSet& modes, Rng& rng);
void init_conv3(ParamStore& store, const std::string& prefix, int c_in, int c_out,
                std::array<int, 3> kernel, Rng& rng);

// ---- forwards ----
Value mlp_forward(const Value& x, const std::vector<LayerSpec>& layers, ParamStore& store,
                  const std::string& prefix);
Value siren_forward(const Value& x, const std::vector<LayerSpec>& layers, ParamStore& store,
                    const std::string& prefix, double omega0);
// seq is [T, d_in]; returns the final hidden state [1, hidden].
Value gru_forward(const Value& seq, ParamStore& store, const std::string& prefix, int hidden);
// Scaled softmax attention per row of q; tau > 0.
Value attention_forward(const Value& q, const Value& k, const Value& v, double tau);
// One self-attention layer: projects x with stored q/k/v maps then attends.
Value self_attention(const Value& x, ParamStore& store, const std::string& prefix, double tau);
// Fourier layer: spectral mixing plus (unless pure_spectral) a pointwise
// linear bypass and activation after the sum.
Value fourier_layer(const Value& x, ParamStore& store, const std::string& prefix,
                    std::shared_ptr<const ad::ModeSet> modes, Act act, bool pure_spectral);
Value conv3_layer(const Value& x, ParamStore& store, const std::string& prefix, int stride,
                  ad::Padding pad, Act act);

}  // namespace nob::nn
