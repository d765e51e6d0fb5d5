#pragma once

#include "flowlab/compressible.hpp"
#include "flowlab/dataset.hpp"
#include "flowlab/effdim.hpp"
#include "flowlab/incompressible.hpp"
#include "flowlab/nnet.hpp"
#include "flowlab/spectra.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace flowlab {

/// One simulation family of the experiment grid.
struct SimProfile {
    std::string id;                  // directory tag, e.g. "inc_kf20"
    std::string dynamics = "incompressible"; // or "compressible"
    int n = 128;
    double length = kTwoPi;
    double nu = 2e-6;
    bool grid_scaled_nu = true;      // compressible only
    double k_forcing = 20.0;
    double half_width = 1.5;
    double amplitude = 0.14;
    double dt = 2e-3;                // compressible: 0 = adaptive
    double t_end = 260.0;
    double snapshot_stride = 0.1;
    int runs = 10;

    nlohmann::json to_json() const;
    static SimProfile from_json(const nlohmann::json& j);
};

struct PipelineConfig {
    std::string profile_name = "desk";
    std::uint64_t master_seed = 42;

    SimProfile train_sim;                 // turbulence/chaos source, also the
                                          // inverse-cascade ensemble
    std::vector<SimProfile> ood_sims;     // different k_forcing and dynamics

    RegimeConfig regime;                  // k_forcing overridden per sim
    RenderSpec render;

    int train_per_class = 2000;
    int test_per_class = 500;
    int eval_per_class = 300;             // out-of-distribution eval sets
    int noise_fourier_count = 300;
    int fourier_stats_m = 1000;

    NetConfig net;
    TrainConfig train_base;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

    std::size_t effdim_row_cap = 400000;
    int parallel_sims = 2;

    nlohmann::json to_json() const;
    static PipelineConfig from_json(const nlohmann::json& j);
    static PipelineConfig desk_defaults();
    static PipelineConfig paper_defaults();

    std::uint64_t sims_key() const;
    std::uint64_t labels_key() const;
    std::uint64_t datasets_key() const;
    std::uint64_t train_key(const std::string& task, std::uint64_t seed) const;
};

/// Filesystem layout and cache bookkeeping for one pipeline invocation.
/// Every stage directory carries a _done.json marker with its config key;
/// matching keys are cache hits and the stage is skipped.
class Pipeline {
public:
    Pipeline(PipelineConfig config, std::string work_dir);

    const PipelineConfig& config() const { return config_; }
    const std::string& work_dir() const { return work_dir_; }

    /// Simulation ensembles (parallel across runs, deterministic per run).
    void run_sims();

    /// Regime labels per run from the recorded spectrum series.
    void label_regimes();

    /// Labeled image datasets, the two training pairs plus eval sets.
    void build_datasets();

    /// Noise-proxy sets: annulus noise (train class) and the Fourier noise
    /// derived from turbulence/chaos statistics (eval only).
    void build_noise();

    /// Train both classifier tasks over all seeds.
    void train_classifiers();

    /// Effective-dimension reports (trained per task + random baseline).
    void effdim_reports();

    /// Adversarial and out-of-distribution tables plus probability
    /// histograms and the two-point spectra bundle.
    void evaluate_tables();

    /// Collect everything into <work>/report; errors list missing pieces.
    void write_report();

    /// All stages in order.
    void run_all();

    // ---- paths of the main artifacts (valid after the producing stage) ----
    std::string sim_dir(const SimProfile& p, int run) const;
    std::string labels_path(const SimProfile& p, int run) const;
    std::string dataset_dir(const std::string& tag) const;
    std::string checkpoint_path(const std::string& task, std::uint64_t seed) const;
    std::string train_log_path(const std::string& task, std::uint64_t seed) const;
    std::string report_dir() const;

    /// Pass/fail-relevant numbers for the acceptance suite.
    struct Summary {
        double cascade_slope = 0.0, cascade_r2 = 0.0;
        double condensate_slope = 0.0;
        std::map<std::string, double> classifier_accuracy;   // task -> test acc
        std::map<std::string, int> classifier_epochs;
        nlohmann::json effdim;
        nlohmann::json adversarial;
        nlohmann::json ood;
        double prob_outside_fraction = 0.0; // turb-vs-chaos test probabilities
        double spectra_max_sigma = 0.0;     // best shell separation below k_f
        int spectra_best_shell = -1;
    };
    Summary summary() const;

private:
    struct LabeledRun {
        const SimProfile* profile;
        int run;
        std::vector<LabeledSnapshot> labels;
        std::vector<std::string> omega_paths;
    };

    bool stage_done(const std::string& dir, std::uint64_t key) const;
    void mark_done(const std::string& dir, std::uint64_t key,
                   const nlohmann::json& extra = nlohmann::json::object()) const;

    std::vector<LabeledRun> load_labeled_runs(const SimProfile& p) const;
    std::vector<DatasetEntry> entries_for(const SimProfile& p, Regime regime, int want,
                                          const std::string& label) const;

    PipelineConfig config_;
    std::string work_dir_;
};

/// Bin probabilities into a fixed histogram (for the confidence figure).
std::vector<std::size_t> probability_histogram(const std::vector<double>& probs, int bins);

} // namespace flowlab
