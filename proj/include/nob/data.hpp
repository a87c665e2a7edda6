#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nob/geometry.hpp"

namespace nob::data {

struct NormRecord {
    int channels = 0;
    std::vector<double> min, max;
    std::vector<bool> constant;  // zero-range channels map to 0.5

    double apply(double x, int c) const;
    double invert(double y, int c) const;
};

struct Manifest {
    std::string name;
    int format_version = 1;
    int n_samples = 0;
    int geo_dim = 0;
    int load_dim = 0;
    int field_channels = 1;
    std::array<int, 3> grid_shape{8, 8, 8};
    geom::Vec3 grid_lo{0.0, 0.0, 0.0};
    geom::Vec3 grid_hi{1.0, 1.0, 1.0};
    bool normalized_outputs = false;
    std::optional<NormRecord> normalization;

    void validate() const;
    geom::RegularGrid grid() const;
};

struct Sample {
    int n = 0;  // point count
    std::vector<double> coords;  // n x 3 row-major
    std::vector<double> params;  // geo_dim (may be empty)
    std::vector<double> loads;   // load_dim (may be empty)
    std::vector<double> field;   // n x channels
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    bool has_edges = false;

    int channels() const { return n > 0 ? static_cast<int>(field.size()) / n : 0; }
    std::vector<geom::Vec3> points() const;
};

Manifest read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root, const Manifest& m);
std::filesystem::path sample_dir(const std::filesystem::path& root, int index);

// On-disk layout: coords.f32 / params.f32 / loads.f32 / field.f32 as raw
// little-endian binary32, plus optional edges.u32 (little-endian u32 pairs).
void write_sample(const std::filesystem::path& dir, const Sample& s);
Sample read_sample(const std::filesystem::path& dir);

struct SplitSpec {
    std::uint64_t seed = 0;
    // fractions fixed at train 0.6 / val 0.1 / test 0.3
};

struct Splits {
    std::vector<int> train, val, test;
};

// Seeded shuffle then contiguous cut; train and val take their floors, the
// remainder goes to test (n=625 -> 375/62/188).
Splits split_dataset(int n, const SplitSpec& spec);

class Dataset {
  public:
    static Dataset open(const std::filesystem::path& root);

    const Manifest& manifest() const { return manifest_; }
    int size() const { return manifest_.n_samples; }
    const Sample& sample(int i) const;
    std::vector<Sample>& samples() { return samples_; }

    // Per-channel min-max normalization to [0,1] with stats from the given
    // (train) indices only; mutates fields in place and returns the record.
    NormRecord normalize_fields(const std::vector<int>& train_idx);
    void denormalize_with(const NormRecord& rec);

  private:
    Manifest manifest_;
    std::vector<Sample> samples_;
};

NormRecord compute_normalization(const std::vector<Sample>& samples, const std::vector<int>& train_idx,
                                 int channels);

}  // namespace nob::data
