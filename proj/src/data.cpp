#include "nob/data.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "nob/errors.hpp"
#include "nob/rng.hpp"

static_assert(std::endian::native == std::endian::little, "container format assumes a little-endian host");

namespace nob::data {

using nlohmann::json;
namespace fs = std::filesystem;

double NormRecord::apply(double x, int c) const {
    if (constant[static_cast<std::size_t>(c)]) return 0.5;
    return (x - min[static_cast<std::size_t>(c)]) / (max[static_cast<std::size_t>(c)] - min[static_cast<std::size_t>(c)]);
}

double NormRecord::invert(double y, int c) const {
    if (constant[static_cast<std::size_t>(c)]) return min[static_cast<std::size_t>(c)];
    return min[static_cast<std::size_t>(c)] + y * (max[static_cast<std::size_t>(c)] - min[static_cast<std::size_t>(c)]);
}

void Manifest::validate() const {
    if (n_samples < 0 || geo_dim < 0 || load_dim < 0 || field_channels < 1)
        throw FormatError("manifest: invalid dimensions");
    grid().validate();
}

geom::RegularGrid Manifest::grid() const {
    geom::RegularGrid g;
    g.extents = grid_shape;
    g.lo = grid_lo;
    g.hi = grid_hi;
    return g;
}

std::vector<geom::Vec3> Sample::points() const {
    std::vector<geom::Vec3> pts(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        pts[static_cast<std::size_t>(i)] = {coords[static_cast<std::size_t>(i) * 3],
                                            coords[static_cast<std::size_t>(i) * 3 + 1],
                                            coords[static_cast<std::size_t>(i) * 3 + 2]};
    return pts;
}

Manifest read_manifest(const fs::path& root) {
    std::ifstream in(root / "manifest.json");
    if (!in) throw FormatError("cannot open " + (root / "manifest.json").string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("manifest.json: " + std::string(e.what()));
    }
    Manifest m;
    try {
        m.name = j.at("name").get<std::string>();
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != 1)
            throw FormatError("manifest: unsupported format version " + std::to_string(m.format_version));
        m.n_samples = j.at("n_samples").get<int>();
        m.geo_dim = j.at("geo_dim").get<int>();
        m.load_dim = j.at("load_dim").get<int>();
        m.field_channels = j.at("field_channels").get<int>();
        for (int a = 0; a < 3; ++a) {
            m.grid_shape[a] = j.at("grid_shape")[a].get<int>();
            m.grid_lo[a] = j.at("grid_lo")[a].get<double>();
            m.grid_hi[a] = j.at("grid_hi")[a].get<double>();
        }
        m.normalized_outputs = j.value("normalized_outputs", false);
        if (j.contains("normalization") && !j["normalization"].is_null()) {
            NormRecord r;
            r.channels = m.field_channels;
            for (auto v : j["normalization"]["min"]) r.min.push_back(v.get<double>());
            for (auto v : j["normalization"]["max"]) r.max.push_back(v.get<double>());
            for (auto v : j["normalization"]["constant"]) r.constant.push_back(v.get<bool>());
            m.normalization = r;
        }
    } catch (const json::exception& e) {
        throw FormatError("manifest.json: " + std::string(e.what()));
    }
    m.validate();
    return m;
}

void write_manifest(const fs::path& root, const Manifest& m) {
    json j;
    j["name"] = m.name;
    j["format_version"] = m.format_version;
    j["n_samples"] = m.n_samples;
    j["geo_dim"] = m.geo_dim;
    j["load_dim"] = m.load_dim;
    j["field_channels"] = m.field_channels;
    j["grid_shape"] = m.grid_shape;
    j["grid_lo"] = m.grid_lo;
    j["grid_hi"] = m.grid_hi;
    j["normalized_outputs"] = m.normalized_outputs;
    if (m.normalization) {
        j["normalization"]["min"] = m.normalization->min;
        j["normalization"]["max"] = m.normalization->max;
        std::vector<bool> cst(m.normalization->constant.begin(), m.normalization->constant.end());
        j["normalization"]["constant"] = cst;
    }
    fs::create_directories(root);
    std::ofstream out(root / "manifest.json");
    out << j.dump(2) << "\n";
}

std::filesystem::path sample_dir(const fs::path& root, int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d", index);
    return root / "samples" / buf;
}

namespace {

void write_f32(const fs::path& file, const std::vector<double>& vals) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw FormatError("cannot open for write: " + file.string());
    for (double v : vals) {
        const float f = static_cast<float>(v);
        out.write(reinterpret_cast<const char*>(&f), sizeof(float));
    }
}

std::vector<double> read_f32(const fs::path& file, bool required) {
    std::ifstream in(file, std::ios::binary | std::ios::ate);
    if (!in) {
        if (required) throw FormatError("missing file: " + file.string());
        return {};
    }
    const long long bytes = static_cast<long long>(in.tellg());
    if (bytes % 4 != 0)
        throw FormatError(file.string() + ": size not a multiple of 4", bytes - bytes % 4);
    in.seekg(0);
    std::vector<double> vals(static_cast<std::size_t>(bytes / 4));
    for (std::size_t i = 0; i < vals.size(); ++i) {
        float f;
        in.read(reinterpret_cast<char*>(&f), sizeof(float));
        vals[i] = static_cast<double>(f);
    }
    return vals;
}

}  // namespace

void write_sample(const fs::path& dir, const Sample& s) {
    fs::create_directories(dir);
    write_f32(dir / "coords.f32", s.coords);
    write_f32(dir / "params.f32", s.params);
    write_f32(dir / "loads.f32", s.loads);
    write_f32(dir / "field.f32", s.field);
    if (s.has_edges) {
        std::ofstream out(dir / "edges.u32", std::ios::binary);
        for (const auto& [a, b] : s.edges) {
            out.write(reinterpret_cast<const char*>(&a), sizeof(std::uint32_t));
            out.write(reinterpret_cast<const char*>(&b), sizeof(std::uint32_t));
        }
    } else {
        fs::remove(dir / "edges.u32");  // do not leave a stale graph behind
    }
}

Sample read_sample(const fs::path& dir) {
    Sample s;
    s.coords = read_f32(dir / "coords.f32", true);
    if (s.coords.size() % 3 != 0)
        throw FormatError((dir / "coords.f32").string() + ": size is not N*3*4 bytes",
                          static_cast<long long>(s.coords.size()) * 4);
    s.n = static_cast<int>(s.coords.size() / 3);
    if (s.n < 1) throw FormatError((dir / "coords.f32").string() + ": empty point cloud");
    s.params = read_f32(dir / "params.f32", true);
    s.loads = read_f32(dir / "loads.f32", true);
    s.field = read_f32(dir / "field.f32", true);
    if (s.field.size() % static_cast<std::size_t>(s.n) != 0)
        throw FormatError((dir / "field.f32").string() + ": size is not N*c*4 bytes",
                          static_cast<long long>(s.field.size()) * 4);
    if (fs::exists(dir / "edges.u32")) {
        std::ifstream in(dir / "edges.u32", std::ios::binary | std::ios::ate);
        const long long bytes = static_cast<long long>(in.tellg());
        if (bytes % 8 != 0) throw FormatError((dir / "edges.u32").string() + ": size not E*2*4 bytes", bytes);
        in.seekg(0);
        s.edges.resize(static_cast<std::size_t>(bytes / 8));
        for (auto& [a, b] : s.edges) {
            in.read(reinterpret_cast<char*>(&a), sizeof(std::uint32_t));
            in.read(reinterpret_cast<char*>(&b), sizeof(std::uint32_t));
        }
        for (std::size_t e = 0; e < s.edges.size(); ++e)
            if (s.edges[e].first >= static_cast<std::uint32_t>(s.n) || s.edges[e].second >= static_cast<std::uint32_t>(s.n))
                throw FormatError((dir / "edges.u32").string() + ": node index out of range", static_cast<long long>(e) * 8);
        s.has_edges = true;
    }
    return s;
}

Splits split_dataset(int n, const SplitSpec& spec) {
    if (n < 10) throw ConfigError("split_dataset: need at least 10 samples, got " + std::to_string(n));
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(spec.seed);
    rng.shuffle(idx);
    const int n_train = static_cast<int>(std::floor(0.6 * n));
    const int n_val = static_cast<int>(std::floor(0.1 * n));
    Splits s;
    s.train.assign(idx.begin(), idx.begin() + n_train);
    s.val.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
    s.test.assign(idx.begin() + n_train + n_val, idx.end());
    return s;
}

Dataset Dataset::open(const fs::path& root) {
    Dataset d;
    d.manifest_ = read_manifest(root);
    d.samples_.reserve(static_cast<std::size_t>(d.manifest_.n_samples));
    for (int i = 0; i < d.manifest_.n_samples; ++i) {
        const fs::path dir = sample_dir(root, i);
        if (!fs::exists(dir)) throw FormatError("missing sample directory: " + dir.string());
        Sample s = read_sample(dir);
        if (static_cast<int>(s.params.size()) != d.manifest_.geo_dim)
            throw FormatError(dir.string() + ": params length " + std::to_string(s.params.size()) +
                              " != geo_dim " + std::to_string(d.manifest_.geo_dim));
        if (static_cast<int>(s.loads.size()) != d.manifest_.load_dim)
            throw FormatError(dir.string() + ": loads length " + std::to_string(s.loads.size()) +
                              " != load_dim " + std::to_string(d.manifest_.load_dim));
        if (s.channels() != d.manifest_.field_channels)
            throw FormatError(dir.string() + ": field has " + std::to_string(s.channels()) +
                              " channels, manifest says " + std::to_string(d.manifest_.field_channels));
        d.samples_.push_back(std::move(s));
    }
    return d;
}

const Sample& Dataset::sample(int i) const {
    if (i < 0 || i >= static_cast<int>(samples_.size())) throw ConfigError("sample index out of range");
    return samples_[static_cast<std::size_t>(i)];
}

NormRecord compute_normalization(const std::vector<Sample>& samples, const std::vector<int>& train_idx,
                                 int channels) {
    NormRecord r;
    r.channels = channels;
    r.min.assign(static_cast<std::size_t>(channels), std::numeric_limits<double>::infinity());
    r.max.assign(static_cast<std::size_t>(channels), -std::numeric_limits<double>::infinity());
    for (int i : train_idx) {
        const Sample& s = samples[static_cast<std::size_t>(i)];
        for (int p = 0; p < s.n; ++p)
            for (int c = 0; c < channels; ++c) {
                const double v = s.field[static_cast<std::size_t>(p) * channels + c];
                if (!std::isfinite(v)) throw NumericError("normalize_fields: non-finite field value");
                r.min[static_cast<std::size_t>(c)] = std::min(r.min[static_cast<std::size_t>(c)], v);
                r.max[static_cast<std::size_t>(c)] = std::max(r.max[static_cast<std::size_t>(c)], v);
            }
    }
    r.constant.resize(static_cast<std::size_t>(channels));
    for (int c = 0; c < channels; ++c)
        r.constant[static_cast<std::size_t>(c)] = (r.max[static_cast<std::size_t>(c)] == r.min[static_cast<std::size_t>(c)]);
    return r;
}

NormRecord Dataset::normalize_fields(const std::vector<int>& train_idx) {
    NormRecord r = compute_normalization(samples_, train_idx, manifest_.field_channels);
    const int c = manifest_.field_channels;
    for (auto& s : samples_)
        for (std::size_t i = 0; i < s.field.size(); ++i)
            s.field[i] = r.apply(s.field[i], static_cast<int>(i % static_cast<std::size_t>(c)));
    manifest_.normalization = r;
    return r;
}

void Dataset::denormalize_with(const NormRecord& rec) {
    const int c = manifest_.field_channels;
    for (auto& s : samples_)
        for (std::size_t i = 0; i < s.field.size(); ++i)
            s.field[i] = rec.invert(s.field[i], static_cast<int>(i % static_cast<std::size_t>(c)));
}

}  // namespace nob::data
