#include "nob/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nob/errors.hpp"

static_assert(std::endian::native == std::endian::little, "little-endian host required");

namespace nob::models {

using nlohmann::json;

namespace {

json fusion_to_json(const fusion::FusionConfig& f) {
    json j;
    j["mode"] = fusion::mode_to_string(f.mode);
    j["geoenc"] = fusion::geoenc_to_string(f.geoenc);
    j["voxel_res"] = f.voxel_res;
    j["branch_embed"] = f.branch_embed;
    return j;
}

fusion::FusionConfig fusion_from_json(const json& j) {
    fusion::FusionConfig f;
    f.mode = fusion::mode_from_string(j.value("mode", "none"));
    const std::string g = j.value("geoenc", "none");
    f.geoenc = g == "none" ? fusion::GeoEnc::None
                           : (g == "desc" ? fusion::GeoEnc::Descriptors : fusion::GeoEnc::Voxel);
    f.voxel_res = j.value("voxel_res", 10);
    f.branch_embed = j.value("branch_embed", 16);
    return f;
}

json config_json(const ModelConfig& c) {
    json j;
    j["name"] = c.name;
    j["geo_dim"] = c.geo_dim;
    j["load_dim"] = c.load_dim;
    j["field_channels"] = c.field_channels;
    j["sigmoid_output"] = c.sigmoid_output;
    j["latent"] = c.latent;
    j["hidden_graph"] = c.hidden_graph;
    j["hidden_grid"] = c.hidden_grid;
    j["hidden_point"] = c.hidden_point;
    j["layers"] = c.layers;
    j["dcon_layers"] = c.dcon_layers;
    j["slices"] = c.slices;
    j["tau"] = c.tau;
    j["grid_extents"] = c.grid_extents;
    j["grid_lo"] = c.grid_lo;
    j["grid_hi"] = c.grid_hi;
    j["modes"] = c.modes;
    j["pure_spectral"] = c.pure_spectral;
    j["radius"] = c.radius;
    j["knn_k"] = c.knn_k;
    j["rel_disp"] = c.rel_disp;
    j["extra_edges"] = c.extra_edges;
    j["seed"] = c.seed;
    j["fusion"] = fusion_to_json(c.fuse);
    return j;
}

ModelConfig config_from(const json& j) {
    ModelConfig c;
    try {
        c.name = j.at("name").get<std::string>();
        c.geo_dim = j.at("geo_dim").get<int>();
        c.load_dim = j.at("load_dim").get<int>();
        c.field_channels = j.at("field_channels").get<int>();
        c.sigmoid_output = j.at("sigmoid_output").get<bool>();
        c.latent = j.at("latent").get<int>();
        c.hidden_graph = j.at("hidden_graph").get<int>();
        c.hidden_grid = j.at("hidden_grid").get<int>();
        c.hidden_point = j.at("hidden_point").get<int>();
        c.layers = j.at("layers").get<int>();
        c.dcon_layers = j.at("dcon_layers").get<int>();
        c.slices = j.at("slices").get<int>();
        c.tau = j.at("tau").get<double>();
        for (int a = 0; a < 3; ++a) {
            c.grid_extents[static_cast<std::size_t>(a)] = j.at("grid_extents")[static_cast<std::size_t>(a)].get<int>();
            c.grid_lo[static_cast<std::size_t>(a)] = j.at("grid_lo")[static_cast<std::size_t>(a)].get<double>();
            c.grid_hi[static_cast<std::size_t>(a)] = j.at("grid_hi")[static_cast<std::size_t>(a)].get<double>();
            c.modes[static_cast<std::size_t>(a)] = j.at("modes")[static_cast<std::size_t>(a)].get<int>();
        }
        c.pure_spectral = j.at("pure_spectral").get<bool>();
        c.radius = j.at("radius").get<double>();
        c.knn_k = j.at("knn_k").get<int>();
        c.rel_disp = j.at("rel_disp").get<bool>();
        c.extra_edges = j.at("extra_edges").get<int>();
        c.seed = j.at("seed").get<std::uint64_t>();
        c.fuse = fusion_from_json(j.at("fusion"));
    } catch (const json::exception& e) {
        throw FormatError("checkpoint header: " + std::string(e.what()));
    }
    return c;
}

}  // namespace

std::string config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(2); }

ModelConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError("model config: " + std::string(e.what()));
    }
    return config_from(j);
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const std::optional<data::NormRecord>& norm) {
    json header;
    header["config"] = config_json(model.config());
    header["param_count"] = model.params().count();
    if (norm) {
        header["normalization"]["min"] = norm->min;
        header["normalization"]["max"] = norm->max;
        std::vector<bool> cst(norm->constant.begin(), norm->constant.end());
        header["normalization"]["constant"] = cst;
        header["normalization"]["channels"] = norm->channels;
    }
    const std::string text = header.dump();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    out.write(reinterpret_cast<const char*>(&len), 4);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    std::vector<float> block;
    block.reserve(static_cast<std::size_t>(model.params().count()));
    for (const auto& [name, p] : model.params().entries())
        for (double v : p->val) block.push_back(static_cast<float>(v));
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size() * sizeof(float)));
    if (!out) throw FormatError("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 4);
    if (in.gcount() != 4) throw FormatError(path.string() + ": truncated header length", 0);
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (in.gcount() != static_cast<std::streamsize>(len))
        throw FormatError(path.string() + ": truncated header", 4);
    json header;
    try {
        header = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": bad header json: " + e.what(), 4);
    }
    Checkpoint ck;
    ModelConfig cfg = config_from(header.at("config"));
    ck.model = make_model(cfg);
    const std::int64_t expect = ck.model->params().count();
    const std::int64_t stated = header.value("param_count", std::int64_t{-1});
    if (stated != expect)
        throw FormatError(path.string() + ": header lists " + std::to_string(stated) +
                              " parameters, architecture has " + std::to_string(expect),
                          4);
    std::vector<float> block(static_cast<std::size_t>(expect));
    in.read(reinterpret_cast<char*>(block.data()),
            static_cast<std::streamsize>(block.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(block.size() * sizeof(float)))
        throw FormatError(path.string() + ": truncated parameter block",
                          static_cast<std::int64_t>(4 + len + in.gcount()));
    char trailing;
    if (in.read(&trailing, 1))
        throw FormatError(path.string() + ": trailing bytes after parameter block",
                          static_cast<std::int64_t>(4 + len + expect * 4));
    std::size_t off = 0;
    for (auto& [name, p] : ck.model->params().entries())
        for (double& v : p->val) v = static_cast<double>(block[off++]);
    if (header.contains("normalization")) {
        data::NormRecord r;
        const auto& n = header["normalization"];
        r.channels = n.value("channels", 0);
        for (auto v : n["min"]) r.min.push_back(v.get<double>());
        for (auto v : n["max"]) r.max.push_back(v.get<double>());
        for (auto v : n["constant"]) r.constant.push_back(v.get<bool>());
        ck.norm = r;
    }
    return ck;
}

}  // namespace nob::models
