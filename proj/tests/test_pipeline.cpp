#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "flowlab/pipeline.hpp"

#include <filesystem>
#include <fstream>

using namespace flowlab;
namespace fs = std::filesystem;

namespace {

// miniature end-to-end configuration: 48² sims, a small net, tens of images.
// The physics gates live in the acceptance suite; this exercises the stage
// machinery, caching and reproducibility.
PipelineConfig mini_config() {
    PipelineConfig c = PipelineConfig::desk_defaults();
    c.profile_name = "mini";
    c.master_seed = 77;

    c.train_sim.id = "inc_kf10";
    c.train_sim.n = 48;
    c.train_sim.nu = 5e-5;
    c.train_sim.k_forcing = 10.0;
    c.train_sim.amplitude = 0.6;
    c.train_sim.dt = 4e-3;
    c.train_sim.t_end = 60.0;
    c.train_sim.snapshot_stride = 0.1;
    c.train_sim.runs = 3;

    SimProfile kf7 = c.train_sim;
    kf7.id = "inc_kf7";
    kf7.k_forcing = 7.0;
    kf7.amplitude = 0.85;
    kf7.runs = 1;

    SimProfile comp = c.train_sim;
    comp.id = "comp_kf10";
    comp.dynamics = "compressible";
    comp.nu = 0.03;
    comp.grid_scaled_nu = true;
    comp.amplitude = 0.3;
    comp.dt = 0.0;
    comp.t_end = 60.0;
    comp.runs = 1;

    c.ood_sims = {kf7, comp};

    // wide-open desk-grid thresholds for the 48² spectra
    c.regime.band_lo = 2.0;
    c.regime.band_hi = 6.0;
    c.regime.slope_tol = 0.8;
    c.regime.r2_min = 0.2;
    c.regime.t_spinup = 2.0;

    c.render.out_size = 48;
    c.train_per_class = 60;
    c.test_per_class = 20;
    c.eval_per_class = 15;
    c.noise_fourier_count = 25;
    c.fourier_stats_m = 40;

    c.net.channels = {8, 8, 16, 16};
    c.net.blocks_per_stage = 1;
    c.net.input_size = 48;
    c.train_base.batch_size = 8;
    c.train_base.max_epochs = 6;
    c.train_base.target_accuracy = 0.97;
    c.train_base.lr = 2e-3;
    c.seeds = {1, 2};
    c.effdim_row_cap = 30000;
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

} // namespace

TEST_CASE("mini pipeline end to end, caching and reproducibility") {
    const std::string dir_a = "pipe_work_a";
    fs::remove_all(dir_a);

    PipelineConfig cfg = mini_config();
    Pipeline pipe(cfg, dir_a);
    pipe.run_all();

    // ---- artifacts exist and manifests are consistent ----
    DatasetManifest tc = read_manifest(pipe.dataset_dir("turb_chaos") + "/manifest.csv");
    validate_manifest(tc);
    CHECK(tc.rows.size() == 4 * 80u / 4 * 4); // 2 classes × 80 images
    CHECK(tc.split("test").size() >= 2 * 20u);
    CHECK(tc.labels() == std::vector<std::string>{"chaos", "turbulence"});

    DatasetManifest tn = read_manifest(pipe.dataset_dir("turb_noise") + "/manifest.csv");
    validate_manifest(tn);
    CHECK(tn.labels() == std::vector<std::string>{"noise", "turbulence"});

    // training reached a sensible accuracy on the separable mini classes
    Pipeline::Summary summary = pipe.summary();
    CHECK(summary.classifier_accuracy["turb_chaos"] >= 0.8);
    CHECK(summary.classifier_accuracy["turb_noise"] >= 0.8);

    // adversarial fractions sum to one per row
    for (const auto& row : summary.adversarial) {
        CHECK(row["frac_chaos"].get<double>() + row["frac_turbulence"].get<double>() ==
              doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(summary.ood.size() >= 3); // training distribution + 2 grids

    // effective dimensions are within [1, C]
    REQUIRE(!summary.effdim.is_null());
    for (const auto& rep : summary.effdim) {
        int stage = 0;
        for (const auto& st : rep["stages"]) {
            const double mean = st["mean"].get<double>();
            CHECK(mean >= 1.0);
            CHECK(mean <= cfg.net.channels[stage] + 1e-9);
            ++stage;
        }
    }

    const std::string report_json = slurp(dir_a + "/report/report.json");
    const std::string adv_csv = slurp(dir_a + "/report/adversarial_table.csv");
    const std::string ckpt_bytes = slurp(pipe.checkpoint_path("turb_chaos", 1));

    SUBCASE("rerun with unchanged config is a cache hit with identical outputs") {
        const auto mtime_before = fs::last_write_time(pipe.checkpoint_path("turb_chaos", 1));
        Pipeline again(cfg, dir_a);
        again.run_all();
        CHECK(fs::last_write_time(pipe.checkpoint_path("turb_chaos", 1)) == mtime_before);
        CHECK(slurp(dir_a + "/report/report.json") == report_json);
        CHECK(slurp(dir_a + "/report/adversarial_table.csv") == adv_csv);
    }

    SUBCASE("fresh directory with identical config+seed reproduces bytes") {
        const std::string dir_b = "pipe_work_b";
        fs::remove_all(dir_b);
        Pipeline fresh(cfg, dir_b);
        fresh.run_all();

        // byte-identical checkpoint, tables and a sampled image
        CHECK(slurp(fresh.checkpoint_path("turb_chaos", 1)) == ckpt_bytes);
        CHECK(slurp(dir_b + "/report/adversarial_table.csv") == adv_csv);
        DatasetManifest m_b = read_manifest(fresh.dataset_dir("turb_chaos") + "/manifest.csv");
        REQUIRE(m_b.rows.size() == tc.rows.size());
        CHECK(slurp(m_b.rows[7].path) == slurp(tc.rows[7].path));
        // report.json embeds no absolute paths, so it matches too
        CHECK(slurp(dir_b + "/report/report.json") == report_json);
        fs::remove_all(dir_b);
    }

    SUBCASE("changing the seed list recomputes training only") {
        const auto sims_mtime =
            fs::last_write_time(pipe.sim_dir(cfg.train_sim, 0) + "/spectra.csv");
        const auto data_mtime =
            fs::last_write_time(pipe.dataset_dir("turb_chaos") + "/manifest.csv");
        PipelineConfig cfg2 = mini_config();
        cfg2.seeds = {1, 3};
        Pipeline changed(cfg2, dir_a);
        changed.run_all();
        CHECK(fs::last_write_time(pipe.sim_dir(cfg.train_sim, 0) + "/spectra.csv") == sims_mtime);
        CHECK(fs::last_write_time(pipe.dataset_dir("turb_chaos") + "/manifest.csv") == data_mtime);
        CHECK(fs::exists(changed.checkpoint_path("turb_chaos", 3)));
        // seed 1 was cached, not retrained
        CHECK(slurp(changed.checkpoint_path("turb_chaos", 1)) == ckpt_bytes);
    }

    fs::remove_all(dir_a);
}
