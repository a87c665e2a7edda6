#include "nob/optim.hpp"

#include <cmath>
#include <cstring>

#include "nob/errors.hpp"

namespace nob::opt {

void adam_step(nn::ParamStore& store, const AdamConfig& cfg) {
    for (const auto& [name, p] : store.entries())
        if (!p->grad_seen || p->grad.size() != p->val.size())
            throw ConfigError("adam_step: parameter '" + name + "' has no gradient");
    store.step() += 1;
    const double t = static_cast<double>(store.step());
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [name, p] : store.entries()) {
        auto& st = store.opt_state()[name];
        for (std::size_t i = 0; i < p->val.size(); ++i) {
            const double g = p->grad[i];
            st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * g;
            st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * g * g;
            const double mhat = st.m[i] / bc1;
            const double vhat = st.v[i] / bc2;
            p->val[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        p->grad.assign(p->val.size(), 0.0);
        p->grad_seen = false;
    }
}

double LrSchedule::step(double val_loss) {
    if (val_loss < best_ * (1.0 - rel_improve_) || best_ == std::numeric_limits<double>::infinity()) {
        best_ = val_loss;
        stale_ = 0;
    } else {
        ++stale_;
        if (stale_ >= patience_) {
            lr_ = std::max(floor_, lr_ * 0.5);
            stale_ = 0;
        }
    }
    return lr_;
}

double grad_check(const std::function<ad::Value()>& loss_fn, nn::ParamStore& store,
                  int max_probes, Rng& rng, double h) {
    auto run = [&]() {
        ad::Value loss = loss_fn();
        if (loss->size() != 1) throw ConfigError("grad_check: loss must be scalar");
        return loss;
    };
    const double l1 = run()->val[0];
    const double l2 = run()->val[0];
    if (std::memcmp(&l1, &l2, sizeof(double)) != 0)
        throw NumericError("grad_check: forward closure is not deterministic");

    store.zero_grad();
    ad::backward(run());

    // collect (param, flat index) probe sites
    std::vector<std::pair<ad::Value, std::size_t>> sites;
    for (auto& [name, p] : store.entries())
        for (std::size_t i = 0; i < p->val.size(); ++i) sites.emplace_back(p, i);
    if (sites.size() > static_cast<std::size_t>(max_probes)) {
        rng.shuffle(sites);
        sites.resize(static_cast<std::size_t>(max_probes));
    }

    double worst = 0.0;
    for (auto& [p, i] : sites) {
        const double analytic = p->grad.empty() ? 0.0 : p->grad[i];
        const double orig = p->val[i];
        p->val[i] = orig + h;
        const double lp = run()->val[0];
        p->val[i] = orig - h;
        const double lm = run()->val[0];
        p->val[i] = orig;
        const double fd = (lp - lm) / (2.0 * h);
        const double denom = std::max({std::abs(analytic), std::abs(fd), 1e-3});
        worst = std::max(worst, std::abs(analytic - fd) / denom);
    }
    store.zero_grad();
    return worst;
}

}  // namespace nob::opt
