#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "nob/errors.hpp"
#include "nob/models.hpp"
#include "ref_models.hpp"

using namespace nob;
using namespace refnet;
using namespace refmodel;
using models::ModelConfig;
using nn::Act;

namespace {

void zero_all(nn::ParamStore& s) {
    for (auto& [name, v] : s.entries()) std::fill(v->val.begin(), v->val.end(), 0.0);
}

void set_param(nn::ParamStore& s, const std::string& name, const std::vector<double>& v) {
    auto& dst = s.get(name)->val;
    REQUIRE(dst.size() == v.size());
    dst = v;
}

ModelConfig base_cfg(const std::string& name, int geo, int load, int channels, int latent) {
    ModelConfig cfg;
    cfg.name = name;
    cfg.geo_dim = geo;
    cfg.load_dim = load;
    cfg.field_channels = channels;
    cfg.latent = latent;
    cfg.layers = 2;
    cfg.dcon_layers = 2;
    cfg.seed = 11;
    return cfg;
}

}  // namespace

TEST_CASE("zero weights leave only the output bias") {
    ModelConfig cfg = base_cfg("deeponet", 1, 0, 1, 4);
    auto model = models::make_model(cfg);
    zero_all(model->params());
    set_param(model->params(), "out.b", {0.7});
    data::Sample s = models::toy_sample(5, 1, 0, 1, 2);
    ad::Value y = model->forward(s);
    for (double v : y->val) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("prediction is the branch-trunk dot product plus bias") {
    ModelConfig cfg = base_cfg("deeponet", 1, 0, 1, 4);
    auto model = models::make_model(cfg);
    auto& ps = model->params();
    zero_all(ps);
    const std::vector<double> b = {1.0, -2.0, 0.5, 2.0};
    const std::vector<double> t = {0.3, 0.1, -0.4, 0.25};
    set_param(ps, "branch.L1.b", b);  // constant branch: zero weights feed the final bias
    set_param(ps, "trunk.L1.b", t);
    set_param(ps, "out.b", {0.7});
    data::Sample s = models::toy_sample(3, 1, 0, 1, 2);
    ad::Value y = model->forward(s);
    double dot = 0.7;
    for (int i = 0; i < 4; ++i) dot += b[static_cast<std::size_t>(i)] * t[static_cast<std::size_t>(i)];
    for (double v : y->val) CHECK(v == doctest::Approx(dot).epsilon(1e-12));
}

TEST_CASE("deeponet matches a replayed forward pass") {
    ModelConfig cfg = base_cfg("deeponet", 2, 2, 2, 8);
    cfg.sigmoid_output = true;
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(6, 2, 2, 2, 3);
    ad::Value y = model->forward(s);

    const auto& ps = model->params();
    std::vector<double> b = mlp_ref(with_params(s), stack_spec(4, 2, 8, 8), ps, "branch");
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> t = mlp_ref(query_row(s, i), stack_spec(3, 2, 8, 8), ps, "trunk");
        for (int c = 0; c < 2; ++c) {
            const double raw = chunk_sum_ref(b, t, 2, c) + vals(ps, "out.b")[static_cast<std::size_t>(c)];
            CHECK(std::abs(y->val[static_cast<std::size_t>(i) * 2 + c] - act_ref(Act::Sigmoid, raw)) < 1e-10);
        }
    }
}

TEST_CASE("sinusoidal branch follows the sine composition") {
    // scalar oracle
    nn::ParamStore s;
    s.add("s.L0.W", {1, 1}, {0.8});
    s.add("s.L0.b", {1, 1}, {0.1});
    s.add("s.L1.W", {1, 1}, {-1.3});
    s.add("s.L1.b", {1, 1}, {0.05});
    auto spec = nn::mlp_spec(1, {1, 1}, Act::Sin, Act::Identity);
    const double x = 0.37;
    ad::Value y = nn::siren_forward(ad::constant({1, 1}, {x}), spec, s, "s", 30.0);
    CHECK(y->val[0] == doctest::Approx(std::sin(30.0 * (0.8 * x + 0.1)) * -1.3 + 0.05).epsilon(1e-12));

    // doubling the frequency scale equals doubling the hidden pre-activations
    nn::ParamStore s2;
    Rng rng(9);
    auto wide = nn::mlp_spec(2, {5, 3}, Act::Sin, Act::Identity);
    nn::init_siren(s2, "a", wide, rng);
    nn::ParamStore s3;
    for (const auto& [name, v] : s2.entries()) {
        std::vector<double> vv = v->val;
        if (name.rfind("a.L0.", 0) == 0)
            for (auto& e : vv) e *= 2.0;
        s3.add(name, v->shape, vv);
    }
    ad::Value in = ad::constant({1, 2}, {0.21, -0.4});
    ad::Value y60 = nn::siren_forward(in, wide, s2, "a", 60.0);
    ad::Value y30 = nn::siren_forward(in, wide, s3, "a", 30.0);
    for (std::size_t i = 0; i < y60->val.size(); ++i) CHECK(std::abs(y60->val[i] - y30->val[i]) < 1e-12);
}

TEST_CASE("geometry-aware variant matches a replayed forward pass") {
    ModelConfig cfg = base_cfg("geom_deeponet", 2, 1, 1, 6);
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(4, 2, 1, 1, 5);
    ad::Value y = model->forward(s);

    const auto& ps = model->params();
    std::vector<double> b = siren_ref(with_params(s), stack_spec(3, 2, 6, 6), ps, "branch", 30.0);
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> t = mlp_ref(query_row(s, i), stack_spec(3, 2, 6, 6), ps, "trunk");
        const double ref = chunk_sum_ref(b, t, 1, 0) + vals(ps, "out.b")[0];
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - ref) < 1e-10);
    }
}

TEST_CASE("zero recurrent weights predict the bias") {
    ModelConfig cfg = base_cfg("sdeeponet", 1, 3, 1, 4);
    auto model = models::make_model(cfg);
    zero_all(model->params());
    set_param(model->params(), "out.b", {0.25});
    data::Sample s = models::toy_sample(4, 1, 3, 1, 6);
    ad::Value y = model->forward(s);
    for (double v : y->val) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("sequential branch matches the recurrent replay") {
    ModelConfig cfg = base_cfg("sdeeponet", 2, 4, 1, 6);
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(5, 2, 4, 1, 8);
    ad::Value y = model->forward(s);

    const auto& ps = model->params();
    std::vector<std::vector<double>> seq;
    for (int t = 0; t < 4; ++t)
        seq.push_back({s.loads[static_cast<std::size_t>(t)], s.params[0], s.params[1]});
    std::vector<double> b = gru_ref(seq, ps, "branch", 6);
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> t = mlp_ref(query_row(s, i), stack_spec(3, 2, 6, 6), ps, "trunk");
        const double ref = chunk_sum_ref(b, t, 1, 0) + vals(ps, "out.b")[0];
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - ref) < 1e-10);
    }
}

TEST_CASE("token branch with one timestep is a feedforward map") {
    ModelConfig cfg = base_cfg("snot", 1, 1, 1, 4);
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(3, 1, 1, 1, 9);
    ad::Value y = model->forward(s);
    const auto& ps = model->params();
    std::vector<double> b = snot_branch_ref(s, ps, cfg);
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> t = mlp_ref(query_row(s, i), stack_spec(3, 2, 4, 4), ps, "trunk");
        const double ref = chunk_sum_ref(b, t, 1, 0) + vals(ps, "out.b")[0];
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - ref) < 1e-10);
    }
}

TEST_CASE("token branch matches the attention replay") {
    ModelConfig cfg = base_cfg("snot", 2, 3, 1, 6);
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(5, 2, 3, 1, 10);
    ad::Value y = model->forward(s);
    const auto& ps = model->params();
    std::vector<double> b = snot_branch_ref(s, ps, cfg);
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> t = mlp_ref(query_row(s, i), stack_spec(3, 2, 6, 6), ps, "trunk");
        const double ref = chunk_sum_ref(b, t, 1, 0) + vals(ps, "out.b")[0];
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - ref) < 1e-10);
    }
}

TEST_CASE("a single identity operator layer degenerates to the product form") {
    ModelConfig cfg = base_cfg("dcon", 2, 0, 1, 6);
    cfg.dcon_layers = 1;
    auto dcon = models::make_model(cfg);
    ModelConfig dn_cfg = cfg;
    dn_cfg.name = "deeponet";
    auto dn = models::make_model(dn_cfg);

    // share branch and trunk weights, neutralize the operator layer, and turn
    // the head into a plain sum so both models compute the same expression
    for (const auto& [name, v] : dcon->params().entries())
        if (name.rfind("branch.", 0) == 0 || name.rfind("trunk.", 0) == 0)
            set_param(dn->params(), name, v->val);
    std::vector<double> eye(36, 0.0);
    for (int i = 0; i < 6; ++i) eye[static_cast<std::size_t>(i) * 6 + i] = 1.0;
    set_param(dcon->params(), "op.U0.L0.W", eye);
    set_param(dcon->params(), "op.U0.L0.b", std::vector<double>(6, 0.0));
    set_param(dcon->params(), "head.L0.W", std::vector<double>(6, 1.0));
    set_param(dcon->params(), "head.L0.b", {0.4});
    set_param(dn->params(), "out.b", {0.4});

    data::Sample s = models::toy_sample(7, 2, 0, 1, 12);
    ad::Value ya = dcon->forward(s);
    ad::Value yb = dn->forward(s);
    for (std::size_t i = 0; i < ya->val.size(); ++i) CHECK(std::abs(ya->val[i] - yb->val[i]) < 1e-12);
}

TEST_CASE("nested operator layers match the replayed composition") {
    ModelConfig cfg = base_cfg("dcon", 2, 1, 1, 6);
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(4, 2, 1, 1, 13);
    ad::Value y = model->forward(s);

    const auto& ps = model->params();
    std::vector<double> b = mlp_ref(with_params(s), stack_spec(3, 2, 6, 6), ps, "branch");
    auto u0 = nn::mlp_spec(6, {6}, Act::Gelu, Act::Gelu);
    auto u1 = nn::mlp_spec(6, {6}, Act::Identity, Act::Identity);
    auto head = nn::mlp_spec(6, {1}, Act::Identity);
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> h = mlp_ref(query_row(s, i), stack_spec(3, 2, 6, 6), ps, "trunk");
        for (int a = 0; a < 6; ++a) h[static_cast<std::size_t>(a)] *= b[static_cast<std::size_t>(a)];
        h = mlp_ref(h, u0, ps, "op.U0");
        for (int a = 0; a < 6; ++a) h[static_cast<std::size_t>(a)] *= b[static_cast<std::size_t>(a)];
        h = mlp_ref(h, u1, ps, "op.U1");
        const double ref = mlp_ref(h, head, ps, "head")[0];
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - ref) < 1e-10);
    }
}

TEST_CASE("pooled geometry encoding feeds the composition as written") {
    ModelConfig cfg = base_cfg("gano", 2, 0, 1, 8);
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(10, 2, 0, 1, 14);
    ad::Value y = model->forward(s);

    const auto& ps = model->params();
    const int eg_dim = 4;
    std::vector<double> eg(static_cast<std::size_t>(eg_dim), 0.0);
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> e = mlp_ref(query_row(s, i), stack_spec(3, 2, 8, eg_dim), ps, "genc");
        for (int a = 0; a < eg_dim; ++a) eg[static_cast<std::size_t>(a)] += e[static_cast<std::size_t>(a)];
    }
    for (auto& v : eg) v /= static_cast<double>(s.n);
    std::vector<double> b = mlp_ref(s.params, stack_spec(2, 2, 8, 8), ps, "branch");
    auto u0 = nn::mlp_spec(8, {8}, Act::Gelu, Act::Gelu);
    auto u1 = nn::mlp_spec(8, {8}, Act::Identity, Act::Identity);
    auto head = nn::mlp_spec(8, {1}, Act::Identity);
    for (int i = 0; i < s.n; ++i) {
        std::vector<double> t = mlp_ref(query_row(s, i), stack_spec(3, 2, 8, 4), ps, "trunk");
        std::vector<double> h = t;
        h.insert(h.end(), eg.begin(), eg.end());
        for (int a = 0; a < 8; ++a) h[static_cast<std::size_t>(a)] *= b[static_cast<std::size_t>(a)];
        h = mlp_ref(h, u0, ps, "op.U0");
        for (int a = 0; a < 8; ++a) h[static_cast<std::size_t>(a)] *= b[static_cast<std::size_t>(a)];
        h = mlp_ref(h, u1, ps, "op.U1");
        const double ref = mlp_ref(h, head, ps, "head")[0];
        CHECK(std::abs(y->val[static_cast<std::size_t>(i)] - ref) < 1e-10);
    }
}

TEST_CASE("pooled encoding is stable under cloud reordering") {
    ModelConfig cfg = base_cfg("gano", 2, 0, 1, 8);
    auto model = models::make_model(cfg);
    data::Sample a = models::toy_sample(9, 2, 0, 1, 15);
    data::Sample b = a;
    for (int i = 0; i < a.n; ++i)
        for (int c = 0; c < 3; ++c)
            b.coords[static_cast<std::size_t>(i) * 3 + c] =
                a.coords[static_cast<std::size_t>(a.n - 1 - i) * 3 + c];
    ad::Value ya = model->forward(a);
    ad::Value yb = model->forward(b);
    for (int i = 0; i < a.n; ++i)
        CHECK(std::abs(ya->val[static_cast<std::size_t>(i)] - yb->val[static_cast<std::size_t>(a.n - 1 - i)]) < 1e-9);
}

TEST_CASE("a single point pools to its own encoding") {
    ModelConfig cfg = base_cfg("gano", 0, 0, 1, 8);
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(1, 0, 0, 1, 16);
    ad::Value y = model->forward(s);

    const auto& ps = model->params();
    std::vector<double> eg = mlp_ref(query_row(s, 0), stack_spec(3, 2, 8, 4), ps, "genc");
    std::vector<double> b = mlp_ref(eg, stack_spec(4, 2, 8, 8), ps, "branch");
    std::vector<double> h = mlp_ref(query_row(s, 0), stack_spec(3, 2, 8, 4), ps, "trunk");
    h.insert(h.end(), eg.begin(), eg.end());
    for (int a = 0; a < 8; ++a) h[static_cast<std::size_t>(a)] *= b[static_cast<std::size_t>(a)];
    h = mlp_ref(h, nn::mlp_spec(8, {8}, Act::Gelu, Act::Gelu), ps, "op.U0");
    for (int a = 0; a < 8; ++a) h[static_cast<std::size_t>(a)] *= b[static_cast<std::size_t>(a)];
    h = mlp_ref(h, nn::mlp_spec(8, {8}, Act::Identity, Act::Identity), ps, "op.U1");
    const double ref = mlp_ref(h, nn::mlp_spec(8, {1}, Act::Identity), ps, "head")[0];
    CHECK(std::abs(y->val[0] - ref) < 1e-10);
}

TEST_CASE("output bias shifts predictions uniformly") {
    ModelConfig cfg = base_cfg("deeponet", 2, 0, 1, 6);
    auto model = models::make_model(cfg);
    data::Sample s = models::toy_sample(5, 2, 0, 1, 18);
    ad::Value before = model->forward(s);
    auto& bias = model->params().get("out.b")->val;
    for (auto& v : bias) v += 0.125;
    ad::Value after = model->forward(s);
    for (std::size_t i = 0; i < before->val.size(); ++i)
        CHECK(std::abs(after->val[i] - before->val[i] - 0.125) < 1e-12);
}

TEST_CASE("identical configs build identical models") {
    for (const std::string name : {"deeponet", "geom_deeponet", "sdeeponet", "snot", "dcon", "gano"}) {
        ModelConfig cfg = models::toy_config(name);
        auto a = models::make_model(cfg);
        auto b = models::make_model(cfg);
        REQUIRE(a->params().count() == b->params().count());
        for (const auto& [pname, v] : a->params().entries()) {
            const auto& w = b->params().get(pname)->val;
            REQUIRE(v->val.size() == w.size());
            CHECK(std::memcmp(v->val.data(), w.data(), v->val.size() * sizeof(double)) == 0);
        }
        data::Sample s = models::toy_sample(6, cfg.geo_dim, cfg.load_dim, cfg.field_channels, 19);
        ad::Value ya = a->forward(s);
        ad::Value yb = b->forward(s);
        CHECK(std::memcmp(ya->val.data(), yb->val.data(), ya->val.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("missing parametric inputs are rejected up front") {
    ModelConfig cfg = base_cfg("deeponet", 0, 0, 1, 4);
    CHECK_THROWS_AS(models::make_model(cfg), ConfigError);
    cfg.name = "sdeeponet";
    CHECK_THROWS_AS(models::make_model(cfg), ConfigError);  // no load sequence
    ModelConfig bad = base_cfg("deeponet", 1, 0, 2, 5);
    CHECK_THROWS_AS(models::make_model(bad), ConfigError);  // latent not divisible by channels
}
