#pragma once

#include "flowlab/forcing.hpp"
#include "flowlab/image.hpp"

#include <optional>
#include <string>
#include <vector>

namespace flowlab {

enum class FieldSelect { Vorticity, Vx, Vy, Density };

std::string field_select_name(FieldSelect f);

/// How a field becomes an 8-bit image: bilinear resample to out_size², then
/// the symmetric linear map of [−M, +M] to [0, 255] with M = max|field|,
/// so a zero field maps to mid-gray 128.
struct RenderSpec {
    FieldSelect field_select = FieldSelect::Vorticity;
    int out_size = 128;

    void validate() const;
    std::uint64_t hash() const;
};

struct RenderResult {
    GrayImage image;
    bool flat = false; // all-zero field rendered as uniform mid-gray
};

RenderResult render_field(const RealField& field, const RenderSpec& spec);

/// Per-coefficient Gaussian statistics of the real-transform coefficients of
/// a set of equal-sized images (the noise_fourier source model).
struct FourierNoiseStats {
    int size = 0; // images are size×size
    std::vector<double> mean_re, std_re, mean_im, std_im;

    std::size_t coeff_count() const { return mean_re.size(); }
};

FourierNoiseStats fit_fourier_stats(const std::vector<GrayImage>& images);

/// Draws each coefficient independently from its Gaussian, enforces Hermitian
/// symmetry, inverse transforms and re-renders. Destroys all correlations
/// between coefficients while preserving the source spectrum.
std::vector<GrayImage> gen_noise_fourier(const FourierNoiseStats& stats, int count, Rng& rng,
                                         const RenderSpec& spec);

/// Annulus-noise images: scalar annulus draws rendered directly.
std::vector<GrayImage> gen_noise_annulus(int count, const ForcingSpec& fspec, const Grid2D& grid,
                                         const RenderSpec& spec, Rng& rng);

struct ManifestRow {
    std::string path;
    std::string label;
    std::string sim_id;
    double t = 0.0;
    std::string regime;
    std::string generator;
    std::string render_hash;
    std::string split; // "train" or "test"
};

struct DatasetManifest {
    std::vector<ManifestRow> rows;

    std::vector<const ManifestRow*> split(const std::string& which) const;
    std::vector<std::string> labels() const; // distinct labels, sorted
};

void write_manifest(const std::string& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::string& path);

/// Every referenced file exists and render hashes are consistent.
void validate_manifest(const DatasetManifest& manifest);

/// One labeled image awaiting split assignment.
struct DatasetEntry {
    GrayImage image;
    std::string label;
    std::string sim_id;
    double t = 0.0;
    std::string regime;
    std::string generator;
};

struct SplitConfig {
    double test_fraction = 0.2;
    int min_test_per_class = 0;
    std::uint64_t seed = 0;
};

/// Splits by sim id (no run contributes to both splits), writes PNGs under
/// out_dir/<label>/ and the manifest CSV to out_dir/manifest.csv.
/// Rejects classes whose test split cannot reach min_test_per_class.
DatasetManifest build_dataset(std::vector<DatasetEntry> entries, const RenderSpec& spec,
                              const SplitConfig& split, const std::string& out_dir);

struct ImportResult {
    DatasetManifest manifest;
    int skipped = 0; // undecodable files
};

/// Ingest a folder of images: grayscale, resize to out_size² ignoring aspect
/// ratio, label rows by the folder name. Undecodable files are skipped and
/// counted.
ImportResult import_images(const std::string& folder, int out_size, const std::string& out_dir);

} // namespace flowlab
