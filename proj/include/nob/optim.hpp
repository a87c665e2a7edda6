#pragma once

#include <functional>
#include <limits>

#include "nob/nn.hpp"
#include "nob/rng.hpp"

namespace nob::opt {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam over every parameter in the store; clears gradients
// and bumps the shared step counter. Throws if any parameter has no
// populated gradient.
void adam_step(nn::ParamStore& store, const AdamConfig& cfg);

// Halve-on-plateau schedule: lr halves when the validation loss has not
// improved by the relative threshold for `patience` consecutive epochs.
class LrSchedule {
  public:
    explicit LrSchedule(double initial_lr = 1e-3, int patience = 50, double rel_improve = 1e-4,
                        double floor = 1e-5)
        : lr_(initial_lr), patience_(patience), rel_improve_(rel_improve), floor_(floor) {}

    double step(double val_loss);
    double lr() const { return lr_; }

  private:
    double lr_;
    int patience_;
    double rel_improve_;
    double floor_;
    double best_ = std::numeric_limits<double>::infinity();
    int stale_ = 0;
};

// Compares analytic gradients of a scalar loss against central finite
// differences over a random subset of parameter entries. The closure must
// be deterministic; two forward runs are compared bit-wise first.
double grad_check(const std::function<ad::Value()>& loss_fn, nn::ParamStore& store,
                  int max_probes, Rng& rng, double h = 1e-5);

}  // namespace nob::opt
