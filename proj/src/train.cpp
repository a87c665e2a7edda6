#include "nob/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "nob/errors.hpp"
#include "nob/rng.hpp"

namespace nob::train {

using ad::Value;

void RunConfig::validate() const {
    if (epochs < 1) throw ConfigError("run: epochs must be >= 1");
    if (batch < 1) throw ConfigError("run: batch must be >= 1");
    if (lr <= 0.0) throw ConfigError("run: lr must be positive");
    const auto& names = models::model_names();
    if (std::find(names.begin(), names.end(), model_name) == names.end())
        throw ConfigError("run: unknown model '" + model_name + "'");
    fuse.validate();
}

models::ModelConfig RunConfig::model_config(const data::Manifest& m) const {
    models::ModelConfig cfg = models::config_for(model_name, m);
    cfg.seed = seed;
    cfg.fuse = fuse;
    if (latent > 0) cfg.latent = latent;
    if (layers > 0) cfg.layers = layers;
    if (dcon_layers > 0) cfg.dcon_layers = dcon_layers;
    if (hidden_graph > 0) cfg.hidden_graph = hidden_graph;
    if (hidden_grid > 0) cfg.hidden_grid = hidden_grid;
    if (hidden_point > 0) cfg.hidden_point = hidden_point;
    if (slices > 0) cfg.slices = slices;
    if (knn_k > 0) cfg.knn_k = knn_k;
    if (extra_edges >= 0) cfg.extra_edges = extra_edges;
    return cfg;
}

int eval_threads() {
    if (const char* env = std::getenv("NOB_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

namespace {

Value sample_target(const data::Sample& s) {
    return ad::constant({s.n, s.channels()}, s.field);
}

Value mse_loss(const Value& pred, const Value& target) {
    Value d = ad::sub(pred, target);
    return ad::mean_all(ad::mul(d, d));
}

struct SampleStats {
    double mse = 0.0;
    double rel_pct = 0.0;
    double mae = 0.0;
    bool zero_norm = false;
};

SampleStats sample_stats(models::Model& model, const data::Sample& s,
                         const std::optional<data::NormRecord>& norm) {
    Value pred = model.forward(s);
    const int c = s.channels();
    SampleStats st;
    double se = 0.0, true_sq = 0.0, diff_sq = 0.0, abs_sum = 0.0;
    const std::size_t n = s.field.size();
    for (std::size_t i = 0; i < n; ++i) {
        const int ch = static_cast<int>(i % static_cast<std::size_t>(c));
        const double pn = pred->val[i], tn = s.field[i];
        se += (pn - tn) * (pn - tn);
        const double p = norm ? norm->invert(pn, ch) : pn;
        const double t = norm ? norm->invert(tn, ch) : tn;
        diff_sq += (p - t) * (p - t);
        true_sq += t * t;
        abs_sum += std::abs(p - t);
    }
    st.mse = se / static_cast<double>(n);
    st.mae = abs_sum / static_cast<double>(n);
    if (true_sq == 0.0)
        st.zero_norm = true;
    else
        st.rel_pct = 100.0 * std::sqrt(diff_sq) / std::sqrt(true_sq);
    return st;
}

struct EvalDetail {
    Metrics metrics;
    double mse = 0.0;
};

EvalDetail eval_detail(models::Model& model, const data::Dataset& ds, const std::vector<int>& idx,
                       const std::optional<data::NormRecord>& norm) {
    std::vector<SampleStats> stats(idx.size());
    const int threads = std::min<int>(eval_threads(), static_cast<int>(idx.size()));
    if (threads <= 1) {
        for (std::size_t i = 0; i < idx.size(); ++i)
            stats[i] = sample_stats(model, ds.sample(idx[i]), norm);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (std::size_t i = static_cast<std::size_t>(t); i < idx.size();
                     i += static_cast<std::size_t>(threads))
                    stats[i] = sample_stats(model, ds.sample(idx[i]), norm);
            });
        for (auto& th : pool) th.join();
    }
    EvalDetail d;
    double mse = 0.0, rel = 0.0, mae = 0.0;
    for (const auto& st : stats) {
        mse += st.mse;
        mae += st.mae;
        if (st.zero_norm)
            ++d.metrics.excluded;
        else {
            rel += st.rel_pct;
            ++d.metrics.included;
        }
    }
    d.mse = idx.empty() ? 0.0 : mse / static_cast<double>(idx.size());
    d.metrics.mae = idx.empty() ? 0.0 : mae / static_cast<double>(idx.size());
    d.metrics.rel_l2_pct = d.metrics.included > 0 ? rel / d.metrics.included : 0.0;
    return d;
}

std::map<std::string, std::vector<double>> snapshot(const nn::ParamStore& store) {
    std::map<std::string, std::vector<double>> snap;
    for (const auto& [name, p] : store.entries()) snap[name] = p->val;
    return snap;
}

void restore(nn::ParamStore& store, const std::map<std::string, std::vector<double>>& snap) {
    for (auto& [name, p] : store.entries()) p->val = snap.at(name);
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    return v[mid];
}

}  // namespace

Metrics evaluate(models::Model& model, const data::Dataset& ds, const std::vector<int>& idx,
                 const std::optional<data::NormRecord>& norm) {
    return eval_detail(model, ds, idx, norm).metrics;
}

TrainResult fit(models::Model& model, data::Dataset& ds, const data::Splits& splits,
                const RunConfig& cfg, const std::optional<data::NormRecord>& norm) {
    cfg.validate();
    if (splits.train.empty()) throw ConfigError("fit: empty training split");
    TrainResult res;
    res.param_count = model.params().count();
    opt::LrSchedule sched(cfg.lr);
    Rng shuffle_rng(cfg.seed ^ 0x5bf0f3a1c3b7e291ULL);
    std::vector<int> order = splits.train;
    std::map<std::string, std::vector<double>> best;
    double best_val = std::numeric_limits<double>::infinity();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);
        model.params().zero_grad();
        EpochLog log;
        log.epoch = epoch;
        double loss_sum = 0.0;
        for (std::size_t at = 0; at < order.size();) {
            const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(cfg.batch),
                                                                 order.size() - at));
            for (int b = 0; b < k; ++b, ++at) {
                const data::Sample& s = ds.sample(order[at]);
                Value loss = mse_loss(model.forward(s), sample_target(s));
                if (!std::isfinite(loss->val[0]))
                    throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) +
                                       " step " + std::to_string(log.steps));
                loss_sum += loss->val[0];
                ad::backward(ad::scale(loss, 1.0 / k));
            }
            opt::AdamConfig adam;
            adam.lr = sched.lr();
            opt::adam_step(model.params(), adam);
            ++log.steps;
        }
        log.train_loss = loss_sum / static_cast<double>(order.size());
        const auto t1 = std::chrono::steady_clock::now();
        log.seconds = std::chrono::duration<double>(t1 - t0).count();
        EvalDetail val = eval_detail(model, ds, splits.val, norm);
        log.val_loss = val.mse;
        log.val_rel_pct = val.metrics.rel_l2_pct;
        log.lr = sched.lr();
        sched.step(val.mse);
        if (val.mse < best_val) {
            best_val = val.mse;
            best = snapshot(model.params());
            res.best_epoch = epoch;
        }
        res.log.push_back(log);
        res.final_val_rel_pct = log.val_rel_pct;
        if (cfg.stop_val_rel > 0.0 && log.val_rel_pct < cfg.stop_val_rel) break;
    }
    if (!best.empty()) restore(model.params(), best);
    res.best_val = best_val;
    std::vector<double> secs;
    for (const auto& l : res.log) secs.push_back(l.seconds);
    res.median_sec_per_epoch = median(std::move(secs));
    if (!cfg.out_dir.empty()) {
        std::filesystem::create_directories(cfg.out_dir);
        models::save_checkpoint(cfg.out_dir / "model.ckpt", model, norm);
        std::ofstream log_out(cfg.out_dir / "log.csv");
        log_out << "epoch,train_loss,val_loss,val_rel_pct,lr,seconds,steps\n";
        for (const auto& l : res.log)
            log_out << l.epoch << ',' << l.train_loss << ',' << l.val_loss << ',' << l.val_rel_pct
                    << ',' << l.lr << ',' << l.seconds << ',' << l.steps << '\n';
    }
    return res;
}

TrainResult train_run(const RunConfig& cfg) {
    cfg.validate();
    data::Dataset ds = data::Dataset::open(cfg.data_dir);
    data::SplitSpec spec;
    spec.seed = cfg.seed;
    data::Splits splits = data::split_dataset(ds.size(), spec);
    std::optional<data::NormRecord> norm;
    if (ds.manifest().normalized_outputs) norm = ds.normalize_fields(splits.train);
    models::ModelConfig mc = cfg.model_config(ds.manifest());
    auto model = models::make_model(mc);
    return fit(*model, ds, splits, cfg, norm);
}

std::vector<BenchRow> benchmark(const std::vector<std::string>& names, const RunConfig& base) {
    if (names.empty()) throw ConfigError("benchmark: no models given");
    data::Dataset ds = data::Dataset::open(base.data_dir);
    data::SplitSpec spec;
    spec.seed = base.seed;
    data::Splits splits = data::split_dataset(ds.size(), spec);
    std::optional<data::NormRecord> norm;
    if (ds.manifest().normalized_outputs) norm = ds.normalize_fields(splits.train);
    std::vector<BenchRow> rows;
    for (const auto& name : names) {
        BenchRow row;
        row.model = name;
        try {
            RunConfig cfg = base;
            cfg.model_name = name;
            if (!base.out_dir.empty()) cfg.out_dir = base.out_dir / name;
            cfg.validate();
            models::ModelConfig mc = cfg.model_config(ds.manifest());
            auto model = models::make_model(mc);
            TrainResult tr = fit(*model, ds, splits, cfg, norm);
            row.test = evaluate(*model, ds, splits.test, norm);
            row.sec_per_epoch = tr.median_sec_per_epoch;
            row.params = tr.param_count;
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace nob::train
