#include "nob/nn.hpp"

#include <cmath>

#include "nob/errors.hpp"

namespace nob::nn {

void LayerSpec::validate() const {
    if (in_dim <= 0 || out_dim <= 0)
        throw ConfigError("layer dims must be positive, got " + std::to_string(in_dim) + "->" + std::to_string(out_dim));
}

std::vector<LayerSpec> mlp_spec(int in_dim, const std::vector<int>& widths, Act hidden_act, Act final_act) {
    std::vector<LayerSpec> layers;
    int d = in_dim;
    for (std::size_t i = 0; i < widths.size(); ++i) {
        LayerSpec l;
        l.in_dim = d;
        l.out_dim = widths[i];
        l.act = (i + 1 == widths.size()) ? final_act : hidden_act;
        l.validate();
        layers.push_back(l);
        d = widths[i];
    }
    return layers;
}

Value ParamStore::add(const std::string& name, ad::Shape shape, std::vector<double> vals) {
    if (params_.count(name)) throw ConfigError("duplicate parameter: " + name);
    auto v = ad::leaf(std::move(shape), std::move(vals));
    params_[name] = v;
    opt_[name] = AdamState{std::vector<double>(v->val.size(), 0.0), std::vector<double>(v->val.size(), 0.0)};
    return v;
}

const Value& ParamStore::get(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : params_) {
        p->grad.assign(p->val.size(), 0.0);
        p->grad_seen = false;
    }
}

std::int64_t ParamStore::count() const {
    std::int64_t n = 0;
    for (const auto& [name, p] : params_) n += p->size();
    return n;
}

namespace {

std::vector<double> uniform_vec(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

std::string lname(const std::string& prefix, std::size_t i, const char* what) {
    return prefix + ".L" + std::to_string(i) + "." + what;
}

}  // namespace

void init_mlp(ParamStore& store, const std::string& prefix, const std::vector<LayerSpec>& layers, Rng& rng) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        l.validate();
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_dim));
        store.add(lname(prefix, i, "W"), {l.in_dim, l.out_dim},
                  uniform_vec(rng, static_cast<std::size_t>(l.in_dim) * l.out_dim, -bound, bound));
        store.add(lname(prefix, i, "b"), {1, l.out_dim}, uniform_vec(rng, static_cast<std::size_t>(l.out_dim), -bound, bound));
    }
}

void init_siren(ParamStore& store, const std::string& prefix, const std::vector<LayerSpec>& layers, Rng& rng) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        l.validate();
        const double bound = (i == 0) ? 1.0 / static_cast<double>(l.in_dim)
                                      : std::sqrt(6.0 / static_cast<double>(l.in_dim)) / l.omega0;
        store.add(lname(prefix, i, "W"), {l.in_dim, l.out_dim},
                  uniform_vec(rng, static_cast<std::size_t>(l.in_dim) * l.out_dim, -bound, bound));
        store.add(lname(prefix, i, "b"), {1, l.out_dim}, uniform_vec(rng, static_cast<std::size_t>(l.out_dim), -bound, bound));
    }
}

Value mlp_forward(const Value& x, const std::vector<LayerSpec>& layers, ParamStore& store,
                  const std::string& prefix) {
    if (layers.empty()) throw ConfigError("mlp_forward: no layers");
    Value h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (h->shape.size() != 2 || h->shape[1] != l.in_dim)
            throw ShapeError("mlp_forward: layer " + std::to_string(i) + " expects last dim " +
                             std::to_string(l.in_dim) + ", got " + ad::shape_str(h->shape));
        h = ad::add_rowvec(ad::matmul(h, store.get(lname(prefix, i, "W"))), store.get(lname(prefix, i, "b")));
        h = ad::activation(h, l.act);
    }
    return h;
}

Value siren_forward(const Value& x, const std::vector<LayerSpec>& layers, ParamStore& store,
                    const std::string& prefix, double omega0) {
    if (layers.empty()) throw ConfigError("siren_forward: no layers");
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        if (layers[i].act != Act::Sin)
            throw ConfigError("siren_forward: hidden layer " + std::to_string(i) + " must use sin activation");
    if (layers.back().act != Act::Identity)
        throw ConfigError("siren_forward: final layer must use identity activation");
    Value h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (h->shape[1] != l.in_dim)
            throw ShapeError("siren_forward: layer " + std::to_string(i) + " expects last dim " +
                             std::to_string(l.in_dim) + ", got " + ad::shape_str(h->shape));
        h = ad::add_rowvec(ad::matmul(h, store.get(lname(prefix, i, "W"))), store.get(lname(prefix, i, "b")));
        if (i + 1 < layers.size()) h = ad::activation(ad::scale(h, omega0), Act::Sin);
    }
    return h;
}

void init_gru(ParamStore& store, const std::string& prefix, int in_dim, int hidden, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (const char* gate : {"r", "z", "n"}) {
        store.add(prefix + ".W" + gate, {in_dim, hidden},
                  uniform_vec(rng, static_cast<std::size_t>(in_dim) * hidden, -bound, bound));
        store.add(prefix + ".U" + gate, {hidden, hidden},
                  uniform_vec(rng, static_cast<std::size_t>(hidden) * hidden, -bound, bound));
        store.add(prefix + ".bi" + gate, {1, hidden}, uniform_vec(rng, static_cast<std::size_t>(hidden), -bound, bound));
        store.add(prefix + ".bh" + gate, {1, hidden}, uniform_vec(rng, static_cast<std::size_t>(hidden), -bound, bound));
    }
}

Value gru_forward(const Value& seq, ParamStore& store, const std::string& prefix, int hidden) {
    if (seq->shape.size() != 2) throw ShapeError("gru_forward: sequence must be [T,d], got " + ad::shape_str(seq->shape));
    const int t_steps = seq->shape[0];
    if (t_steps < 1) throw ConfigError("gru_forward: empty sequence");
    Value h = ad::zeros({1, hidden});
    auto gate = [&](const Value& x, const Value& hp, const char* g) {
        auto wx = ad::add_rowvec(ad::matmul(x, store.get(prefix + ".W" + g)), store.get(prefix + ".bi" + g));
        auto uh = ad::add_rowvec(ad::matmul(hp, store.get(prefix + ".U" + g)), store.get(prefix + ".bh" + g));
        return std::pair{wx, uh};
    };
    for (int t = 0; t < t_steps; ++t) {
        Value x = ad::slice_rows(seq, t, t + 1);
        auto [rx, rh] = gate(x, h, "r");
        Value r = ad::activation(ad::add(rx, rh), Act::Sigmoid);
        auto [zx, zh] = gate(x, h, "z");
        Value z = ad::activation(ad::add(zx, zh), Act::Sigmoid);
        auto [nx, nh] = gate(x, h, "n");
        Value n = ad::activation(ad::add(nx, ad::mul(r, nh)), Act::Tanh);
        // h' = (1 - z) * n + z * h
        Value one_minus_z = ad::sub(ad::constant({1, hidden}, std::vector<double>(static_cast<std::size_t>(hidden), 1.0)), z);
        h = ad::add(ad::mul(one_minus_z, n), ad::mul(z, h));
    }
    return h;
}

Value attention_forward(const Value& q, const Value& k, const Value& v, double tau) {
    if (tau <= 0.0) throw ConfigError("attention_forward: tau must be positive");
    if (q->shape.size() != 2 || k->shape.size() != 2 || v->shape.size() != 2 || q->shape[1] != k->shape[1] ||
        k->shape[0] != v->shape[0])
        throw ShapeError("attention_forward: incompatible shapes q=" + ad::shape_str(q->shape) + " k=" +
                         ad::shape_str(k->shape) + " v=" + ad::shape_str(v->shape));
    Value scores = ad::scale(ad::matmul_nt(q, k), 1.0 / tau);
    Value weights = ad::softmax(scores, 1);
    return ad::matmul_stable(weights, v);
}

void init_attention(ParamStore& store, const std::string& prefix, int dim, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (const char* part : {"q", "k", "v"})
        store.add(prefix + ".W" + part, {dim, dim},
                  uniform_vec(rng, static_cast<std::size_t>(dim) * dim, -bound, bound));
}

Value self_attention(const Value& x, ParamStore& store, const std::string& prefix, double tau) {
    Value q = ad::matmul(x, store.get(prefix + ".Wq"));
    Value k = ad::matmul(x, store.get(prefix + ".Wk"));
    Value v = ad::matmul(x, store.get(prefix + ".Wv"));
    return attention_forward(q, k, v, tau);
}

void init_fourier(ParamStore& store, const std::string& prefix, int channels,
                  const ad::ModeSet& modes, Rng& rng) {
    const std::size_t n = modes.kept.size() * static_cast<std::size_t>(channels) * channels;
    const double s = 1.0 / static_cast<double>(channels);
    store.add(prefix + ".Rre", {static_cast<int>(modes.kept.size()), channels, channels}, uniform_vec(rng, n, -s, s));
    store.add(prefix + ".Rim", {static_cast<int>(modes.kept.size()), channels, channels}, uniform_vec(rng, n, -s, s));
    const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
    store.add(prefix + ".W", {channels, channels},
              uniform_vec(rng, static_cast<std::size_t>(channels) * channels, -bound, bound));
    store.add(prefix + ".b", {1, channels}, uniform_vec(rng, static_cast<std::size_t>(channels), -bound, bound));
}

Value fourier_layer(const Value& x, ParamStore& store, const std::string& prefix,
                    std::shared_ptr<const ad::ModeSet> modes, Act act, bool pure_spectral) {
    Value spectral = ad::spectral_mix(x, store.get(prefix + ".Rre"), store.get(prefix + ".Rim"), modes);
    if (pure_spectral) return spectral;
    Value bypass = ad::add_rowvec(ad::matmul(x, store.get(prefix + ".W")), store.get(prefix + ".b"));
    return ad::activation(ad::add(spectral, bypass), act);
}

void init_conv3(ParamStore& store, const std::string& prefix, int c_in, int c_out,
                std::array<int, 3> kernel, Rng& rng) {
    const std::size_t n = static_cast<std::size_t>(c_out) * c_in * kernel[0] * kernel[1] * kernel[2];
    const double bound = 1.0 / std::sqrt(static_cast<double>(c_in) * kernel[0] * kernel[1] * kernel[2]);
    store.add(prefix + ".W", {c_out, c_in, kernel[0], kernel[1], kernel[2]}, uniform_vec(rng, n, -bound, bound));
    store.add(prefix + ".b", {c_out}, uniform_vec(rng, static_cast<std::size_t>(c_out), -bound, bound));
}

Value conv3_layer(const Value& x, ParamStore& store, const std::string& prefix, int stride,
                  ad::Padding pad, Act act) {
    return ad::activation(ad::conv3(x, store.get(prefix + ".W"), store.get(prefix + ".b"), stride, pad), act);
}

}  // namespace nob::nn
