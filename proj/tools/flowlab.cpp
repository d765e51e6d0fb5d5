// flowlab — 2D turbulence laboratory: simulations, datasets, classifiers,
// effective-dimension analysis and the experiment tables.
#include "flowlab/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace flowlab;

namespace {

PipelineConfig load_config(const std::string& profile, const std::string& config_path,
                           std::uint64_t seed, bool seed_set) {
    PipelineConfig cfg =
        profile == "paper" ? PipelineConfig::paper_defaults() : PipelineConfig::desk_defaults();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config file " + config_path);
        nlohmann::json j = nlohmann::json::parse(in);
        if (!j.contains("profile_name")) j["profile_name"] = profile;
        cfg = PipelineConfig::from_json(j);
    }
    if (seed_set) cfg.master_seed = seed;
    return cfg;
}

void print_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cout << "(missing: " << path << ")\n";
        return;
    }
    std::cout << in.rdbuf();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"flowlab: chaotic and turbulent 2D flows, image datasets, staged CNN "
                 "classifiers and effective-dimension analysis"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "flowlab_out", profile = "desk";
    std::uint64_t seed = 0;
    bool seed_set = false;
    app.add_option("--config", config_path, "JSON config file (overrides profile defaults)");
    app.add_option("--out", out_dir, "work/output directory");
    app.add_option("--profile", profile, "built-in profile: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}));
    auto* seed_opt = app.add_option("--seed", seed, "master seed");

    const char* names[] = {"simulate", "render",      "noise",  "spectra", "train",
                           "effdim",   "adversarial", "ood",    "pipeline", "report"};
    const char* descs[] = {
        "run the simulation ensembles",
        "render labeled image datasets from the simulations",
        "generate the Fourier-statistics noise proxies",
        "compute spectra and regime labels for every run",
        "train the classifier tasks over all seeds",
        "compute effective-dimension reports",
        "evaluate adversarial proxy datasets against the trained classifier",
        "evaluate out-of-distribution accuracy tables",
        "run every stage end to end",
        "collect the report bundle"};
    for (int i = 0; i < 10; ++i) app.add_subcommand(names[i], descs[i]);

    CLI11_PARSE(app, argc, argv);
    seed_set = seed_opt->count() > 0;

    try {
        PipelineConfig cfg = load_config(profile, config_path, seed, seed_set);
        Pipeline pipeline(cfg, out_dir);
        const std::string cmd = app.get_subcommands().front()->get_name();

        if (cmd == "simulate") {
            pipeline.run_sims();
        } else if (cmd == "spectra") {
            pipeline.label_regimes();
        } else if (cmd == "render") {
            pipeline.build_datasets();
        } else if (cmd == "noise") {
            pipeline.build_noise();
        } else if (cmd == "train") {
            pipeline.train_classifiers();
        } else if (cmd == "effdim") {
            pipeline.effdim_reports();
            print_file(out_dir + "/effdim/effdim_table.csv");
        } else if (cmd == "adversarial") {
            pipeline.evaluate_tables();
            print_file(out_dir + "/eval/adversarial_table.csv");
        } else if (cmd == "ood") {
            pipeline.evaluate_tables();
            print_file(out_dir + "/eval/ood_table.csv");
        } else if (cmd == "pipeline") {
            pipeline.run_all();
            std::cout << "pipeline complete; report in " << pipeline.report_dir() << '\n';
        } else if (cmd == "report") {
            pipeline.write_report();
            std::cout << "report written to " << pipeline.report_dir() << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "flowlab: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
