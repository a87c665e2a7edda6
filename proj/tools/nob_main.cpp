#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nob/checkpoint.hpp"
#include "nob/errors.hpp"
#include "nob/report.hpp"
#include "nob/synthetic.hpp"
#include "nob/train.hpp"

namespace {

using nlohmann::json;

nob::data::GenConfig gen_config_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw nob::ConfigError("cannot open config " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw nob::ConfigError(path + ": " + e.what());
    }
    nob::data::GenConfig cfg;
    cfg.n_samples = j.value("n_samples", cfg.n_samples);
    cfg.grid_n = j.value("grid_n", cfg.grid_n);
    cfg.f0_min = j.value("f0_min", cfg.f0_min);
    cfg.f0_max = j.value("f0_max", cfg.f0_max);
    cfg.h_min = j.value("h_min", cfg.h_min);
    cfg.h_max = j.value("h_max", cfg.h_max);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.loads_T = j.value("loads_T", cfg.loads_T);
    cfg.knn_k = j.value("knn_k", cfg.knn_k);
    cfg.name = j.value("name", cfg.name);
    return cfg;
}

void apply_geoenc(nob::fusion::FusionConfig& fuse, const std::string& tag) {
    fuse.geoenc = nob::fusion::geoenc_from_string(tag);
    if (tag == "voxel10") fuse.voxel_res = 10;
    if (tag == "voxel50") fuse.voxel_res = 50;
    if (tag == "voxel100") fuse.voxel_res = 100;
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw nob::ConfigError("cannot write " + path);
    out << text;
}

int run(int argc, char** argv) {
    CLI::App app{"neural operator benchmark harness"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    std::string gen_config, gen_out;
    gen->add_option("--config", gen_config, "generator config json")->required();
    gen->add_option("--out", gen_out, "output dataset directory")->required();

    auto* train = app.add_subcommand("train", "train one model");
    nob::train::RunConfig rc;
    std::string data_dir, out_dir, fusion_tag = "none", geoenc_tag = "none";
    train->add_option("--model", rc.model_name, "model name")->required();
    train->add_option("--data", data_dir, "dataset directory")->required();
    train->add_option("--epochs", rc.epochs, "training epochs");
    train->add_option("--batch", rc.batch, "gradient accumulation batch");
    train->add_option("--lr", rc.lr, "initial learning rate");
    train->add_option("--seed", rc.seed, "run seed");
    train->add_option("--fusion", fusion_tag, "none|concat|branch");
    train->add_option("--geoenc", geoenc_tag, "none|desc|voxel10|voxel50|voxel100");
    train->add_option("--out", out_dir, "run output directory")->required();
    train->add_option("--latent", rc.latent, "branch-trunk latent override");
    train->add_option("--layers", rc.layers, "layer count override");
    train->add_option("--hidden-graph", rc.hidden_graph, "graph hidden dim override");
    train->add_option("--hidden-grid", rc.hidden_grid, "grid hidden dim override");
    train->add_option("--hidden-point", rc.hidden_point, "point hidden dim override");
    train->add_option("--slices", rc.slices, "slice token count override");
    train->add_option("--knn", rc.knn_k, "fallback knn connectivity");
    train->add_option("--stop-val-rel", rc.stop_val_rel, "early stop threshold on val rel-L2 %");

    auto* eval = app.add_subcommand("eval", "evaluate a trained run");
    std::string eval_run, eval_data, eval_split = "test", eval_report;
    eval->add_option("--run", eval_run, "run directory with model.ckpt")->required();
    eval->add_option("--data", eval_data, "dataset directory")->required();
    eval->add_option("--split", eval_split, "train|val|test");
    eval->add_option("--report", eval_report, "report output path (md)");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    std::string gc_model;
    gradcheck->add_option("--model", gc_model, "model name")->required();

    auto* bench = app.add_subcommand("bench", "train several models under one config");
    std::string bench_models, bench_data, bench_out;
    nob::train::RunConfig bc;
    bench->add_option("--models", bench_models, "comma-separated model names")->required();
    bench->add_option("--data", bench_data, "dataset directory")->required();
    bench->add_option("--out", bench_out, "report output path (md)");
    bench->add_option("--epochs", bc.epochs, "training epochs");
    bench->add_option("--batch", bc.batch, "gradient accumulation batch");
    bench->add_option("--lr", bc.lr, "initial learning rate");
    bench->add_option("--seed", bc.seed, "run seed");
    bench->add_option("--latent", bc.latent, "branch-trunk latent override");
    bench->add_option("--layers", bc.layers, "layer count override");

    CLI11_PARSE(app, argc, argv);

    if (gen->parsed()) {
        nob::data::gen_synthetic(gen_config_from_file(gen_config), gen_out);
        std::cout << "wrote dataset to " << gen_out << "\n";
        return 0;
    }
    if (train->parsed()) {
        rc.data_dir = data_dir;
        rc.out_dir = out_dir;
        rc.fuse.mode = nob::fusion::mode_from_string(fusion_tag);
        apply_geoenc(rc.fuse, geoenc_tag);
        nob::train::TrainResult res = nob::train::train_run(rc);
        std::cout << "best val loss " << res.best_val << " at epoch " << res.best_epoch
                  << ", final val rel-L2 " << res.final_val_rel_pct << "%, "
                  << res.param_count << " parameters\n";
        return 0;
    }
    if (eval->parsed()) {
        auto ck = nob::models::load_checkpoint(std::filesystem::path(eval_run) / "model.ckpt");
        nob::data::Dataset ds = nob::data::Dataset::open(eval_data);
        nob::data::SplitSpec spec;
        spec.seed = ck.model->config().seed;
        nob::data::Splits splits = nob::data::split_dataset(ds.size(), spec);
        const std::vector<int>* idx = &splits.test;
        if (eval_split == "train") idx = &splits.train;
        else if (eval_split == "val") idx = &splits.val;
        else if (eval_split != "test") throw nob::ConfigError("eval: unknown split '" + eval_split + "'");
        if (ck.norm)
            for (auto& s : ds.samples())
                for (std::size_t i = 0; i < s.field.size(); ++i)
                    s.field[i] = ck.norm->apply(s.field[i], static_cast<int>(i % static_cast<std::size_t>(s.channels())));
        nob::train::Metrics m = nob::train::evaluate(*ck.model, ds, *idx, ck.norm);
        nob::report::MetricsRecord rec;
        rec.model = ck.model->config().name;
        rec.dataset = ds.manifest().name;
        rec.rel_l2_pct = m.rel_l2_pct;
        rec.mae = m.mae;
        rec.params = ck.model->params().count();
        write_text(eval_report, nob::report::emit_md({rec}));
        if (m.excluded > 0)
            std::cerr << m.excluded << " zero-norm samples excluded from the percentage mean\n";
        return 0;
    }
    if (gradcheck->parsed()) {
        nob::models::ModelConfig cfg = nob::models::toy_config(gc_model);
        auto model = nob::models::make_model(cfg);
        nob::data::Sample s = nob::models::toy_sample(8, cfg.geo_dim, cfg.load_dim, cfg.field_channels, 17);
        nob::Rng probe_rng(99);
        auto loss_fn = [&] {
            nob::ad::Value pred = model->forward(s);
            nob::ad::Value target = nob::ad::constant({s.n, s.channels()}, s.field);
            nob::ad::Value d = nob::ad::sub(pred, target);
            return nob::ad::mean_all(nob::ad::mul(d, d));
        };
        const double dev = nob::opt::grad_check(loss_fn, model->params(), 25, probe_rng);
        std::cout << gc_model << ": max relative gradient deviation " << dev << "\n";
        if (!(dev < 1e-4)) throw nob::NumericError(gc_model + ": gradient check failed");
        return 0;
    }
    if (bench->parsed()) {
        bc.data_dir = bench_data;
        std::vector<std::string> names;
        std::string cur;
        for (char c : bench_models + ",") {
            if (c == ',') {
                if (!cur.empty()) names.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        auto rows = nob::train::benchmark(names, bc);
        std::vector<nob::report::MetricsRecord> recs;
        for (const auto& r : rows) {
            if (r.failed) {
                std::cerr << r.model << " failed: " << r.error << "\n";
                continue;
            }
            nob::report::MetricsRecord rec;
            rec.model = r.model;
            rec.dataset = bench_data;
            rec.rel_l2_pct = r.test.rel_l2_pct;
            rec.mae = r.test.mae;
            rec.sec_per_epoch = r.sec_per_epoch;
            rec.params = r.params;
            recs.push_back(rec);
        }
        if (recs.empty()) throw nob::NumericError("bench: every model failed");
        write_text(bench_out, nob::report::emit_md(recs));
        return 0;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const nob::FormatError& e) {
        std::cerr << "data format error: " << e.what() << "\n";
        return 3;
    } catch (const nob::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const nob::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
