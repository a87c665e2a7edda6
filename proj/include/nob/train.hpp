#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nob/checkpoint.hpp"
#include "nob/data.hpp"
#include "nob/models.hpp"
#include "nob/optim.hpp"

namespace nob::train {

struct RunConfig {
    std::string model_name = "deeponet";
    std::filesystem::path data_dir;
    std::filesystem::path out_dir;
    int epochs = 1000;
    int batch = 5;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    fusion::FusionConfig fuse;
    // width overrides; 0 keeps the family default
    int latent = 0, layers = 0, dcon_layers = 0;
    int hidden_graph = 0, hidden_grid = 0, hidden_point = 0;
    int slices = 0, knn_k = 0, extra_edges = -1;
    // early stop once validation relative-L2 % falls below this (0 = off)
    double stop_val_rel = 0.0;

    void validate() const;
    models::ModelConfig model_config(const data::Manifest& m) const;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_rel_pct = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
    int steps = 0;
};

struct TrainResult {
    std::vector<EpochLog> log;
    double best_val = 0.0;
    int best_epoch = -1;
    double final_val_rel_pct = 0.0;
    std::int64_t param_count = 0;
    double median_sec_per_epoch = 0.0;
};

struct Metrics {
    double rel_l2_pct = 0.0;  // mean over samples with nonzero true norm
    double mae = 0.0;         // field units (denormalized)
    int included = 0;
    int excluded = 0;  // zero-norm samples, MAE only
};

// Gradient-accumulation training over the train split with per-epoch
// validation, halve-on-plateau scheduling, and best-validation snapshotting.
// When out_dir is set the best checkpoint and a CSV log are written there.
TrainResult fit(models::Model& model, data::Dataset& ds, const data::Splits& splits,
                const RunConfig& cfg, const std::optional<data::NormRecord>& norm);

// Full pipeline: open dataset, split, normalize when the manifest asks for
// it, build the model, train.
TrainResult train_run(const RunConfig& cfg);

// NOB_THREADS-parallel fan-out over samples with a deterministic
// index-ordered merge.
Metrics evaluate(models::Model& model, const data::Dataset& ds, const std::vector<int>& idx,
                 const std::optional<data::NormRecord>& norm);

struct BenchRow {
    std::string model;
    Metrics test;
    double sec_per_epoch = 0.0;
    std::int64_t params = 0;
    bool failed = false;
    std::string error;
};

// Trains every named model under one config; failures are isolated per row.
std::vector<BenchRow> benchmark(const std::vector<std::string>& names, const RunConfig& base);

int eval_threads();

}  // namespace nob::train
