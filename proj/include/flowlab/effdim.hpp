#pragma once

#include "flowlab/nnet.hpp"

#include <array>
#include <string>
#include <vector>

namespace flowlab {

/// Stage activations flattened over images and spatial positions:
/// (N, C, H, W) → (N·H·W) × C, spatial structure discarded.
struct ActivationMatrix {
    int stage = 0;
    int channels = 0;
    std::size_t row_count = 0;
    // double precision so the spectrum invariances hold to 1e-10 even after
    // exact-in-double row transformations
    std::vector<double> rows; // row-major, row_count × channels
};

/// Streams the image set through the network and collects the given stage's
/// activations. When the total row count exceeds row_cap a seeded uniform
/// subsample (selection sampling, exactly uniform) is kept. Requires at
/// least 50·C rows.
ActivationMatrix collect_activation_matrix(const StageNet& net,
                                           const std::vector<GrayImage>& images, int stage,
                                           std::size_t row_cap, Rng& rng);

/// All four stages in one pass over the images (same semantics per stage).
std::array<ActivationMatrix, 4> collect_all_stages(const StageNet& net,
                                                   const std::vector<GrayImage>& images,
                                                   std::size_t row_cap, std::uint64_t seed);

/// PCA explained-variance ratios of the centered matrix: descending, clipped
/// at zero, normalized to sum 1. Covariance is accumulated in one streaming
/// pass. Rejects matrices with zero total variance.
std::vector<double> explained_variance_ratios(const ActivationMatrix& m);

/// exp(−Σ r_i·log r_i) with 0·log 0 = 0. Lies in [1, C].
double effective_dimension(const std::vector<double>& ratios);

struct StageDim {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> per_seed;
};

struct EffDimReport {
    std::string task;
    std::array<StageDim, 4> stages;
    int seeds = 0;
    std::size_t row_cap = 0;
    std::vector<std::string> checkpoint_tags;
};

/// Per-stage effective dimension aggregated over checkpoints (≥2): one
/// forward sweep per checkpoint, mean and sample std per stage. Also serves
/// the random-initialization baseline (untrained checkpoints).
EffDimReport effdim_report(const std::string& task, const std::vector<Checkpoint>& checkpoints,
                           const std::vector<GrayImage>& test_images, std::size_t row_cap,
                           std::uint64_t seed);

void write_effdim_json(const std::string& path, const std::vector<EffDimReport>& reports);
void write_effdim_csv(const std::string& path, const std::vector<EffDimReport>& reports);

} // namespace flowlab
