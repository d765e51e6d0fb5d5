#include "flowlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace flowlab {

namespace {

void write_spectra_csv(const std::string& path, const std::vector<double>& times,
                       const std::vector<std::vector<double>>& spectra) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "t,k,E\n";
    char buf[96];
    for (std::size_t i = 0; i < times.size(); ++i) {
        for (std::size_t k = 0; k < spectra[i].size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.9g,%zu,%.9e\n", times[i], k, spectra[i][k]);
            out << buf;
        }
    }
}

void read_spectra_csv(const std::string& path, std::vector<double>& times,
                      std::vector<EnergySpectrum>& spectra) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(in, line); // header
    times.clear();
    spectra.clear();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const double t = std::stod(line.substr(0, c1));
        const std::size_t k = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
        const double e = std::stod(line.substr(c2 + 1));
        if (times.empty() || t != times.back()) {
            times.push_back(t);
            spectra.emplace_back();
        }
        auto& spec = spectra.back();
        if (spec.energy.size() <= k) spec.energy.resize(k + 1, 0.0);
        spec.energy[k] = e;
    }
    for (auto& s : spectra) s.modes.assign(s.energy.size(), 1);
}

std::string json_get(const nlohmann::json& j, const char* key, const std::string& def) {
    return j.contains(key) ? j[key].get<std::string>() : def;
}

} // namespace

nlohmann::json SimProfile::to_json() const {
    return {{"id", id},
            {"dynamics", dynamics},
            {"n", n},
            {"length", length},
            {"nu", nu},
            {"grid_scaled_nu", grid_scaled_nu},
            {"k_forcing", k_forcing},
            {"half_width", half_width},
            {"amplitude", amplitude},
            {"dt", dt},
            {"t_end", t_end},
            {"snapshot_stride", snapshot_stride},
            {"runs", runs}};
}

SimProfile SimProfile::from_json(const nlohmann::json& j) {
    SimProfile p;
    p.id = json_get(j, "id", p.id);
    p.dynamics = json_get(j, "dynamics", p.dynamics);
    p.n = j.value("n", p.n);
    p.length = j.value("length", p.length);
    p.nu = j.value("nu", p.nu);
    p.grid_scaled_nu = j.value("grid_scaled_nu", p.grid_scaled_nu);
    p.k_forcing = j.value("k_forcing", p.k_forcing);
    p.half_width = j.value("half_width", p.half_width);
    p.amplitude = j.value("amplitude", p.amplitude);
    p.dt = j.value("dt", p.dt);
    p.t_end = j.value("t_end", p.t_end);
    p.snapshot_stride = j.value("snapshot_stride", p.snapshot_stride);
    p.runs = j.value("runs", p.runs);
    return p;
}

PipelineConfig PipelineConfig::desk_defaults() {
    PipelineConfig c;
    c.profile_name = "desk";

    c.train_sim.id = "inc_kf20";
    c.train_sim.dynamics = "incompressible";
    c.train_sim.n = 128;
    c.train_sim.nu = 2e-6;
    c.train_sim.k_forcing = 20.0;
    c.train_sim.amplitude = 0.14;
    c.train_sim.dt = 2e-3;
    c.train_sim.t_end = 260.0;
    c.train_sim.snapshot_stride = 0.1;
    c.train_sim.runs = 10;

    SimProfile kf12 = c.train_sim;
    kf12.id = "inc_kf12";
    kf12.k_forcing = 12.0;
    kf12.amplitude = 0.23;
    kf12.t_end = 160.0;
    kf12.runs = 2;

    SimProfile kf26 = c.train_sim;
    kf26.id = "inc_kf26";
    kf26.k_forcing = 26.0;
    kf26.amplitude = 0.11;
    kf26.nu = 1e-6;
    kf26.t_end = 200.0;
    kf26.runs = 2;

    SimProfile comp = c.train_sim;
    comp.id = "comp_kf20";
    comp.dynamics = "compressible";
    comp.nu = 0.03;
    comp.grid_scaled_nu = true;
    comp.amplitude = 0.2;
    comp.dt = 0.0; // adaptive
    comp.t_end = 150.0;
    comp.runs = 2;

    c.ood_sims = {kf12, kf26, comp};

    c.regime.r2_min = 0.88; // desk-grid shell noise; recorded per manifest
    c.render.out_size = 128;
    c.net.input_size = 128;
    c.train_base.lr = 1e-3;
    c.effdim_row_cap = 400000;
    return c;
}

PipelineConfig PipelineConfig::paper_defaults() {
    PipelineConfig c = desk_defaults();
    c.profile_name = "paper";
    c.train_sim.n = 400;
    c.train_sim.k_forcing = 15.0;
    c.train_sim.runs = 20;
    for (auto& s : c.ood_sims) {
        s.n = 400;
        if (s.dynamics == "compressible") s.k_forcing = 15.0;
    }
    c.render.out_size = 435;
    // 435 is not divisible by 8; the paper-scale network consumes 432
    c.net.input_size = 432;
    c.net.channels = {64, 128, 256, 512};
    c.train_per_class = 8000;
    c.test_per_class = 1000;
    c.effdim_row_cap = 2000000;
    return c;
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json ood = nlohmann::json::array();
    for (const auto& s : ood_sims) ood.push_back(s.to_json());
    return {{"profile_name", profile_name},
            {"master_seed", master_seed},
            {"train_sim", train_sim.to_json()},
            {"ood_sims", ood},
            {"regime",
             {{"slope_tol", regime.slope_tol},
              {"r2_min", regime.r2_min},
              {"band_lo", regime.band_lo},
              {"band_hi", regime.band_hi},
              {"t_spinup", regime.t_spinup}}},
            {"render", {{"out_size", render.out_size}}},
            {"train_per_class", train_per_class},
            {"test_per_class", test_per_class},
            {"eval_per_class", eval_per_class},
            {"noise_fourier_count", noise_fourier_count},
            {"fourier_stats_m", fourier_stats_m},
            {"net",
             {{"channels", net.channels},
              {"blocks_per_stage", net.blocks_per_stage},
              {"input_size", net.input_size},
              {"skip_connections", net.skip_connections}}},
            {"train",
             {{"lr", train_base.lr},
              {"weight_decay", train_base.weight_decay},
              {"batch_size", train_base.batch_size},
              {"max_epochs", train_base.max_epochs},
              {"target_accuracy", train_base.target_accuracy}}},
            {"seeds", seeds},
            {"effdim_row_cap", effdim_row_cap},
            {"parallel_sims", parallel_sims}};
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
    PipelineConfig c =
        json_get(j, "profile_name", "desk") == "paper" ? paper_defaults() : desk_defaults();
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("train_sim")) c.train_sim = SimProfile::from_json(j["train_sim"]);
    if (j.contains("ood_sims")) {
        c.ood_sims.clear();
        for (const auto& s : j["ood_sims"]) c.ood_sims.push_back(SimProfile::from_json(s));
    }
    if (j.contains("regime")) {
        const auto& r = j["regime"];
        c.regime.slope_tol = r.value("slope_tol", c.regime.slope_tol);
        c.regime.r2_min = r.value("r2_min", c.regime.r2_min);
        c.regime.band_lo = r.value("band_lo", c.regime.band_lo);
        c.regime.band_hi = r.value("band_hi", c.regime.band_hi);
        c.regime.t_spinup = r.value("t_spinup", c.regime.t_spinup);
    }
    if (j.contains("render")) c.render.out_size = j["render"].value("out_size", c.render.out_size);
    c.train_per_class = j.value("train_per_class", c.train_per_class);
    c.test_per_class = j.value("test_per_class", c.test_per_class);
    c.eval_per_class = j.value("eval_per_class", c.eval_per_class);
    c.noise_fourier_count = j.value("noise_fourier_count", c.noise_fourier_count);
    c.fourier_stats_m = j.value("fourier_stats_m", c.fourier_stats_m);
    if (j.contains("net")) {
        const auto& n = j["net"];
        if (n.contains("channels")) c.net.channels = n["channels"].get<std::array<int, 4>>();
        c.net.blocks_per_stage = n.value("blocks_per_stage", c.net.blocks_per_stage);
        c.net.input_size = n.value("input_size", c.net.input_size);
        c.net.skip_connections = n.value("skip_connections", c.net.skip_connections);
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        c.train_base.lr = t.value("lr", c.train_base.lr);
        c.train_base.weight_decay = t.value("weight_decay", c.train_base.weight_decay);
        c.train_base.batch_size = t.value("batch_size", c.train_base.batch_size);
        c.train_base.max_epochs = t.value("max_epochs", c.train_base.max_epochs);
        c.train_base.target_accuracy = t.value("target_accuracy", c.train_base.target_accuracy);
    }
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
    c.effdim_row_cap = j.value("effdim_row_cap", c.effdim_row_cap);
    c.parallel_sims = j.value("parallel_sims", c.parallel_sims);
    return c;
}

std::uint64_t PipelineConfig::sims_key() const {
    nlohmann::json j{{"master_seed", master_seed}, {"train", train_sim.to_json()}};
    for (const auto& s : ood_sims) j["ood"].push_back(s.to_json());
    return fnv1a64(j.dump());
}

std::uint64_t PipelineConfig::labels_key() const {
    nlohmann::json j{{"sims", sims_key()},
                     {"slope_tol", regime.slope_tol},
                     {"r2_min", regime.r2_min},
                     {"band_lo", regime.band_lo},
                     {"band_hi", regime.band_hi},
                     {"t_spinup", regime.t_spinup}};
    return fnv1a64(j.dump());
}

std::uint64_t PipelineConfig::datasets_key() const {
    nlohmann::json j{{"labels", labels_key()},
                     {"render", render.out_size},
                     {"train_per_class", train_per_class},
                     {"test_per_class", test_per_class},
                     {"eval_per_class", eval_per_class}};
    return fnv1a64(j.dump());
}

std::uint64_t PipelineConfig::train_key(const std::string& task, std::uint64_t seed) const {
    nlohmann::json j{{"datasets", datasets_key()},
                     {"net", net.hash()},
                     {"train", train_base.hash()},
                     {"task", task},
                     {"seed", seed}};
    return fnv1a64(j.dump());
}

Pipeline::Pipeline(PipelineConfig config, std::string work_dir)
    : config_(std::move(config)), work_dir_(std::move(work_dir)) {
    fs::create_directories(work_dir_);
}

bool Pipeline::stage_done(const std::string& dir, std::uint64_t key) const {
    const std::string marker = dir + "/_done.json";
    if (!fs::exists(marker)) return false;
    std::ifstream in(marker);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    return !j.is_discarded() && j.value("key", std::string()) == hash_hex(key);
}

void Pipeline::mark_done(const std::string& dir, std::uint64_t key,
                         const nlohmann::json& extra) const {
    nlohmann::json j = extra;
    j["key"] = hash_hex(key);
    std::ofstream out(dir + "/_done.json", std::ios::trunc);
    out << j.dump(2) << '\n';
}

std::string Pipeline::sim_dir(const SimProfile& p, int run) const {
    return work_dir_ + "/sims/" + p.id + "_r" + std::to_string(run);
}

std::string Pipeline::labels_path(const SimProfile& p, int run) const {
    return sim_dir(p, run) + "/labels.csv";
}

std::string Pipeline::dataset_dir(const std::string& tag) const {
    return work_dir_ + "/data/" + tag;
}

std::string Pipeline::checkpoint_path(const std::string& task, std::uint64_t seed) const {
    return work_dir_ + "/train/" + task + "_seed" + std::to_string(seed) + "/checkpoint.bin";
}

std::string Pipeline::train_log_path(const std::string& task, std::uint64_t seed) const {
    return work_dir_ + "/train/" + task + "_seed" + std::to_string(seed) + "/log.csv";
}

std::string Pipeline::report_dir() const { return work_dir_ + "/report"; }

void Pipeline::run_sims() {
    std::vector<const SimProfile*> profiles{&config_.train_sim};
    for (const auto& s : config_.ood_sims) profiles.push_back(&s);

    struct Job {
        const SimProfile* profile;
        int run;
    };
    std::vector<Job> jobs;
    const std::uint64_t key = config_.sims_key();
    for (const auto* p : profiles)
        for (int r = 0; r < p->runs; ++r)
            if (!stage_done(sim_dir(*p, r), key)) jobs.push_back({p, r});

    auto run_one = [&](const Job& job) {
        const SimProfile& p = *job.profile;
        const std::string dir = sim_dir(p, job.run);
        fs::create_directories(dir);
        const std::string sim_id = p.id + "_r" + std::to_string(job.run);

        std::vector<double> times;
        std::vector<std::vector<double>> spectra;
        std::vector<std::string> paths;

        if (p.dynamics == "incompressible") {
            IncompressibleConfig cfg;
            cfg.n = p.n;
            cfg.length = p.length;
            cfg.nu = p.nu;
            cfg.dt = p.dt;
            cfg.t_end = p.t_end;
            cfg.snapshot_stride = p.snapshot_stride;
            cfg.forcing = ForcingSpec{p.k_forcing, p.half_width, p.amplitude, 0};
            RunResult res = run_simulation(cfg, config_.master_seed, sim_id, {dir, false, nullptr});
            for (const auto& s : res.snapshots) {
                times.push_back(s.t);
                spectra.push_back(s.spectrum);
                paths.push_back(s.omega_path);
            }
        } else {
            CompressibleConfig cfg;
            cfg.n = p.n;
            cfg.length = p.length;
            cfg.nu = p.nu;
            cfg.grid_scaled_hyperviscosity = p.grid_scaled_nu;
            cfg.dt = p.dt;
            cfg.t_end = p.t_end;
            cfg.snapshot_stride = p.snapshot_stride;
            cfg.forcing = ForcingSpec{p.k_forcing, p.half_width, p.amplitude, 0};
            CompressibleRunResult res =
                run_compressible(cfg, config_.master_seed, sim_id, {dir, false, nullptr});
            for (const auto& s : res.snapshots) {
                times.push_back(s.t);
                spectra.push_back(s.spectrum);
                paths.push_back(s.omega_path);
            }
        }

        write_spectra_csv(dir + "/spectra.csv", times, spectra);
        nlohmann::json extra{{"snapshots", paths}, {"profile", p.to_json()}};
        mark_done(dir, key, extra);
    };

    // ensembles run as independent parallel jobs, bounded concurrency
    const int lanes = std::max(1, config_.parallel_sims);
    for (std::size_t base = 0; base < jobs.size(); base += lanes) {
        std::vector<std::future<void>> futs;
        for (std::size_t i = base; i < std::min(jobs.size(), base + lanes); ++i)
            futs.push_back(std::async(std::launch::async, run_one, jobs[i]));
        for (auto& f : futs) f.get();
    }
}

void Pipeline::label_regimes() {
    std::vector<const SimProfile*> profiles{&config_.train_sim};
    for (const auto& s : config_.ood_sims) profiles.push_back(&s);
    const std::uint64_t key = config_.labels_key();

    for (const auto* p : profiles) {
        for (int r = 0; r < p->runs; ++r) {
            const std::string dir = sim_dir(*p, r);
            const std::string marker = dir + "/labels_done.json";
            if (fs::exists(marker)) {
                std::ifstream in(marker);
                nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
                if (!j.is_discarded() && j.value("key", std::string()) == hash_hex(key)) continue;
            }

            std::vector<double> times;
            std::vector<EnergySpectrum> spectra;
            read_spectra_csv(dir + "/spectra.csv", times, spectra);

            std::ifstream done_in(dir + "/_done.json");
            nlohmann::json done = nlohmann::json::parse(done_in);
            const auto paths = done["snapshots"].get<std::vector<std::string>>();
            if (paths.size() != times.size())
                throw std::runtime_error("label_regimes: snapshot/spectra mismatch in " + dir);

            RegimeConfig rc = config_.regime;
            rc.k_forcing = p->k_forcing;
            bool never = false;
            auto labels = classify_regime(times, spectra, rc, &never);
            if (never)
                std::cerr << "[pipeline] warning: " << dir << " never reaches turbulence\n";

            std::ofstream out(labels_path(*p, r), std::ios::trunc);
            out << "path,t,regime,slope,r2\n";
            char buf[64];
            for (std::size_t i = 0; i < labels.size(); ++i) {
                std::snprintf(buf, sizeof(buf), ",%.9g,%s,%.4f,%.4f\n", labels[i].t,
                              regime_name(labels[i].regime).c_str(), labels[i].slope,
                              labels[i].r2);
                out << paths[i] << buf;
            }
            std::ofstream mark(marker, std::ios::trunc);
            mark << nlohmann::json{{"key", hash_hex(key)}}.dump() << '\n';
        }
    }
}

std::vector<Pipeline::LabeledRun> Pipeline::load_labeled_runs(const SimProfile& p) const {
    std::vector<LabeledRun> runs;
    for (int r = 0; r < p.runs; ++r) {
        LabeledRun lr;
        lr.profile = &p;
        lr.run = r;
        std::ifstream in(labels_path(p, r));
        if (!in) throw std::runtime_error("missing labels for " + sim_dir(p, r));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> f;
            std::size_t pos = 0;
            while (true) {
                const auto c = line.find(',', pos);
                f.push_back(line.substr(pos, c - pos));
                if (c == std::string::npos) break;
                pos = c + 1;
            }
            LabeledSnapshot snap;
            snap.t = std::stod(f[1]);
            snap.regime = regime_from_name(f[2]);
            snap.slope = std::stod(f[3]);
            snap.r2 = std::stod(f[4]);
            lr.labels.push_back(snap);
            lr.omega_paths.push_back(f[0]);
        }
        runs.push_back(std::move(lr));
    }
    return runs;
}

std::vector<DatasetEntry> Pipeline::entries_for(const SimProfile& p, Regime regime, int want,
                                                const std::string& label) const {
    struct Cand {
        int run;
        std::size_t idx;
        double t;
    };
    std::vector<Cand> cands;
    const auto runs = load_labeled_runs(p);
    for (const auto& lr : runs)
        for (std::size_t i = 0; i < lr.labels.size(); ++i)
            if (lr.labels[i].regime == regime) cands.push_back({lr.run, i, lr.labels[i].t});

    if (static_cast<int>(cands.size()) < want) {
        std::ostringstream os;
        os << "insufficient " << regime_name(regime) << " snapshots for " << p.id << ": have "
           << cands.size() << ", need " << want;
        throw std::invalid_argument(os.str());
    }
    // deterministic even spread across (run, time)
    std::vector<DatasetEntry> entries;
    entries.reserve(want);
    for (int i = 0; i < want; ++i) {
        const Cand& c = cands[static_cast<std::size_t>(
            (static_cast<double>(i) + 0.5) * static_cast<double>(cands.size()) / want)];
        const LabeledRun& lr = runs[c.run];
        LoadedField field = read_field(lr.omega_paths[c.idx]);
        DatasetEntry e;
        e.image = render_field(field.field, config_.render).image;
        e.label = label;
        e.sim_id = p.id + "_r" + std::to_string(c.run);
        e.t = c.t;
        e.regime = regime_name(regime);
        e.generator = "simulation";
        entries.push_back(std::move(e));
    }
    return entries;
}

void Pipeline::build_datasets() {
    const std::uint64_t key = config_.datasets_key();
    const int per_class = config_.train_per_class + config_.test_per_class;

    SplitConfig split;
    split.test_fraction =
        static_cast<double>(config_.test_per_class) / static_cast<double>(per_class);
    split.min_test_per_class = config_.test_per_class;
    split.seed = derive_seed(config_.master_seed, "split");

    // turbulence vs chaos
    {
        const std::string dir = dataset_dir("turb_chaos");
        if (!stage_done(dir, key)) {
            fs::remove_all(dir);
            auto entries = entries_for(config_.train_sim, Regime::Chaotic, per_class, "chaos");
            auto turb = entries_for(config_.train_sim, Regime::Turbulent, per_class, "turbulence");
            entries.insert(entries.end(), std::make_move_iterator(turb.begin()),
                           std::make_move_iterator(turb.end()));
            build_dataset(std::move(entries), config_.render, split, dir);
            mark_done(dir, key);
        }
    }

    // turbulence vs annulus noise
    {
        const std::string dir = dataset_dir("turb_noise");
        if (!stage_done(dir, key)) {
            fs::remove_all(dir);
            auto entries = entries_for(config_.train_sim, Regime::Turbulent, per_class, "turbulence");
            const Grid2D grid(config_.train_sim.n, config_.train_sim.length);
            ForcingSpec fspec{config_.train_sim.k_forcing, config_.train_sim.half_width, 1.0, 0};
            Rng rng(derive_seed(config_.master_seed, "noise_annulus"));
            auto noise = gen_noise_annulus(per_class, fspec, grid, config_.render, rng);
            for (std::size_t i = 0; i < noise.size(); ++i) {
                DatasetEntry e;
                e.image = std::move(noise[i]);
                e.label = "noise";
                e.sim_id = "noise_" + std::to_string(i);
                e.t = 0.0;
                e.regime = "";
                e.generator = "noise_annulus";
                entries.push_back(std::move(e));
            }
            build_dataset(std::move(entries), config_.render, split, dir);
            mark_done(dir, key);
        }
    }

    // out-of-distribution eval sets: chaos + turbulence from each grid point
    for (const auto& p : config_.ood_sims) {
        const std::string dir = dataset_dir("eval_" + p.id);
        if (stage_done(dir, key)) continue;
        fs::remove_all(dir);
        auto chaos = entries_for(p, Regime::Chaotic, config_.eval_per_class, "chaos");
        auto turb = entries_for(p, Regime::Turbulent, config_.eval_per_class, "turbulence");

        DatasetManifest manifest;
        const std::string hash = hash_hex(config_.render.hash());
        fs::create_directories(dir + "/chaos");
        fs::create_directories(dir + "/turbulence");
        std::size_t serial = 0;
        auto emit = [&](std::vector<DatasetEntry>& list) {
            for (auto& e : list) {
                char name[160];
                std::snprintf(name, sizeof(name), "%s/%s/%06zu.png", dir.c_str(),
                              e.label.c_str(), serial++);
                write_png(name, e.image);
                manifest.rows.push_back(
                    {name, e.label, e.sim_id, e.t, e.regime, e.generator, hash, "test"});
            }
        };
        emit(chaos);
        emit(turb);
        write_manifest(dir + "/manifest.csv", manifest);
        mark_done(dir, key);
    }
}

void Pipeline::build_noise() {
    const std::uint64_t key =
        mix64(config_.datasets_key() ^ fnv1a64("fourier:" + std::to_string(config_.noise_fourier_count) +
                                               ":" + std::to_string(config_.fourier_stats_m)));

    DatasetManifest train_manifest = read_manifest(dataset_dir("turb_chaos") + "/manifest.csv");
    for (const std::string cls : {std::string("turbulence"), std::string("chaos")}) {
        const std::string dir = dataset_dir("eval_noise_fourier_" + cls);
        if (stage_done(dir, key)) continue;
        fs::remove_all(dir);
        fs::create_directories(dir + "/noise_fourier");

        // statistics over up to fourier_stats_m train-split images of the class
        std::vector<GrayImage> source;
        for (const auto& row : train_manifest.rows) {
            if (row.label != cls || row.split != "train") continue;
            source.push_back(read_image(row.path));
            if (static_cast<int>(source.size()) >= config_.fourier_stats_m) break;
        }
        if (source.size() < 2)
            throw std::runtime_error("build_noise: no " + cls + " train images for statistics");
        FourierNoiseStats stats = fit_fourier_stats(source);
        Rng rng(derive_seed(config_.master_seed, "noise_fourier:" + cls));
        auto images = gen_noise_fourier(stats, config_.noise_fourier_count, rng, config_.render);

        DatasetManifest manifest;
        const std::string hash = hash_hex(config_.render.hash());
        for (std::size_t i = 0; i < images.size(); ++i) {
            char name[160];
            std::snprintf(name, sizeof(name), "%s/noise_fourier/%06zu.png", dir.c_str(), i);
            write_png(name, images[i]);
            manifest.rows.push_back({name, "noise_fourier:" + cls,
                                     "nf_" + cls + "_" + std::to_string(i), 0.0, "",
                                     "noise_fourier", hash, "test"});
        }
        write_manifest(dir + "/manifest.csv", manifest);
        mark_done(dir, key);
    }
}

void Pipeline::train_classifiers() {
    for (const std::string task : {std::string("turb_chaos"), std::string("turb_noise")}) {
        ManifestData data; // loaded lazily on first training of the task
        bool loaded = false;
        for (std::uint64_t seed : config_.seeds) {
            const std::string dir = work_dir_ + "/train/" + task + "_seed" + std::to_string(seed);
            const std::uint64_t key = config_.train_key(task, seed);
            if (stage_done(dir, key)) continue;
            fs::create_directories(dir);
            if (!loaded) {
                data = load_manifest_images(read_manifest(dataset_dir(task) + "/manifest.csv"));
                loaded = true;
            }
            TrainConfig tc = config_.train_base;
            tc.seed = derive_seed(config_.master_seed, "train:" + task + ":" + std::to_string(seed));
            TrainResult result = train(data, config_.net, tc);
            for (const auto& w : result.warnings)
                std::cerr << "[pipeline] " << task << " seed " << seed << ": " << w << '\n';
            result.checkpoint.seed = seed;
            save_checkpoint(checkpoint_path(task, seed), result.checkpoint);
            write_train_log(train_log_path(task, seed), result.log);
            mark_done(dir, key,
                      {{"reached_target", result.reached_target},
                       {"epochs", result.log.size()},
                       {"final_test_accuracy", result.log.back().test_accuracy}});
        }
    }
}

void Pipeline::effdim_reports() {
    const std::string dir = work_dir_ + "/effdim";
    std::uint64_t key = config_.datasets_key();
    for (const std::string task : {std::string("turb_chaos"), std::string("turb_noise")})
        for (std::uint64_t seed : config_.seeds) key = mix64(key ^ config_.train_key(task, seed));
    key = mix64(key ^ config_.effdim_row_cap);
    if (stage_done(dir, key)) return;
    fs::create_directories(dir);

    std::vector<EffDimReport> reports;
    for (const std::string task : {std::string("turb_chaos"), std::string("turb_noise")}) {
        DatasetManifest manifest = read_manifest(dataset_dir(task) + "/manifest.csv");
        ManifestData data = load_manifest_images(manifest);

        std::vector<Checkpoint> ckpts;
        for (std::uint64_t seed : config_.seeds)
            ckpts.push_back(load_checkpoint(checkpoint_path(task, seed)));
        reports.push_back(effdim_report(task, ckpts, data.test.images, config_.effdim_row_cap,
                                        derive_seed(config_.master_seed, "effdim:" + task)));

        if (task == "turb_chaos") {
            // random-initialization baseline on the same test images
            std::vector<Checkpoint> random;
            for (std::uint64_t seed : config_.seeds) {
                StageNet net(config_.net);
                Rng rng(derive_seed(config_.master_seed, "randinit:" + std::to_string(seed)));
                net.init_params(rng);
                Checkpoint c;
                c.net_config = config_.net;
                c.params.assign(net.params().begin(), net.params().end());
                c.adam.init(net.param_count());
                c.seed = seed;
                c.class_labels = ckpts.front().class_labels;
                random.push_back(std::move(c));
            }
            reports.push_back(effdim_report("random_init", random, data.test.images,
                                            config_.effdim_row_cap,
                                            derive_seed(config_.master_seed, "effdim:random")));
        }
    }
    write_effdim_json(dir + "/effdim.json", reports);
    write_effdim_csv(dir + "/effdim_table.csv", reports);
    mark_done(dir, key);
}

void Pipeline::evaluate_tables() {
    const std::string dir = work_dir_ + "/eval";
    const std::uint64_t key =
        mix64(config_.train_key("turb_chaos", config_.seeds.front()) ^ fnv1a64("eval_tables_v1"));
    if (stage_done(dir, key)) return;
    fs::create_directories(dir);

    const Checkpoint ckpt = load_checkpoint(checkpoint_path("turb_chaos", config_.seeds.front()));
    // class 1 (positive) is "turbulence" for the chaos/turbulence pair

    auto probs_for_manifest = [&](const std::string& manifest_path,
                                  const std::string& label_filter) {
        DatasetManifest manifest = read_manifest(manifest_path);
        std::vector<GrayImage> images;
        for (const auto& row : manifest.rows) {
            if (!label_filter.empty() && row.label != label_filter) continue;
            images.push_back(read_image(row.path));
        }
        return predict(ckpt, images);
    };

    auto write_hist = [&](const std::string& name, const std::vector<double>& probs) {
        const int bins = 20;
        auto counts = probability_histogram(probs, bins);
        std::ofstream out(dir + "/prob_hist_" + name + ".csv", std::ios::trunc);
        out << "bin_lo,bin_hi,count\n";
        for (int b = 0; b < bins; ++b)
            out << static_cast<double>(b) / bins << ',' << static_cast<double>(b + 1) / bins << ','
                << counts[b] << '\n';
    };

    // ---- adversarial table (classifier fractions on proxy datasets) ----
    nlohmann::json adversarial = nlohmann::json::array();
    std::ofstream adv(dir + "/adversarial_table.csv", std::ios::trunc);
    adv << "dataset,frac_chaos,frac_turbulence,count\n";
    auto adversarial_row = [&](const std::string& name, const std::string& manifest_path,
                               const std::string& label_filter) {
        std::vector<double> probs;
        try {
            probs = probs_for_manifest(manifest_path, label_filter);
        } catch (const std::exception& e) {
            std::cerr << "[pipeline] adversarial row '" << name << "' skipped: " << e.what()
                      << '\n';
            return;
        }
        if (probs.empty()) {
            std::cerr << "[pipeline] adversarial row '" << name << "' skipped: empty dataset\n";
            return;
        }
        double turb = 0.0;
        for (double p : probs)
            if (p > 0.5) turb += 1.0;
        turb /= static_cast<double>(probs.size());
        adv << name << ',' << 1.0 - turb << ',' << turb << ',' << probs.size() << '\n';
        adversarial.push_back({{"dataset", name},
                               {"frac_chaos", 1.0 - turb},
                               {"frac_turbulence", turb},
                               {"count", probs.size()}});
        write_hist(name, probs);
    };

    adversarial_row("noise_fourier_turbulence",
                    dataset_dir("eval_noise_fourier_turbulence") + "/manifest.csv", "");
    adversarial_row("noise_fourier_chaos",
                    dataset_dir("eval_noise_fourier_chaos") + "/manifest.csv", "");
    for (const auto& p : config_.ood_sims) {
        adversarial_row(p.id + "_turbulence", dataset_dir("eval_" + p.id) + "/manifest.csv",
                        "turbulence");
        adversarial_row(p.id + "_chaos", dataset_dir("eval_" + p.id) + "/manifest.csv", "chaos");
    }

    // ---- out-of-distribution accuracy table ----
    nlohmann::json ood = nlohmann::json::array();
    std::ofstream oods(dir + "/ood_table.csv", std::ios::trunc);
    oods << "dataset,accuracy,count\n";
    auto ood_row = [&](const std::string& name, const DatasetManifest& manifest,
                       const std::string& split) {
        LabeledImages set;
        set.class_names = ckpt.class_labels;
        for (const auto& row : manifest.rows) {
            if (!split.empty() && row.split != split) continue;
            if (row.label != ckpt.class_labels[0] && row.label != ckpt.class_labels[1]) continue;
            set.images.push_back(read_image(row.path));
            set.labels.push_back(row.label == ckpt.class_labels[1] ? 1 : 0);
            if (set.image_size == 0) set.image_size = set.images.back().width;
        }
        if (set.images.empty()) {
            std::cerr << "[pipeline] ood row '" << name << "' skipped: no rows\n";
            return;
        }
        EvalResult res = evaluate(ckpt, set);
        oods << name << ',' << res.accuracy << ',' << set.images.size() << '\n';
        ood.push_back({{"dataset", name}, {"accuracy", res.accuracy}, {"count", set.images.size()}});
    };

    DatasetManifest train_manifest = read_manifest(dataset_dir("turb_chaos") + "/manifest.csv");
    ood_row("training_distribution", train_manifest, "test");
    for (const auto& p : config_.ood_sims)
        ood_row(p.id, read_manifest(dataset_dir("eval_" + p.id) + "/manifest.csv"), "");

    // ---- confidence histogram on the held-out training distribution ----
    double outside = 0.0;
    {
        ManifestData data = load_manifest_images(train_manifest);
        EvalResult res = evaluate(ckpt, data.test);
        write_hist("turb_chaos_test", res.probabilities);
        for (double p : res.probabilities)
            if (p <= 0.05 || p >= 0.95) outside += 1.0;
        outside /= static_cast<double>(res.probabilities.size());
    }

    // ---- two-point spectra of normalized images, chaos vs turbulence ----
    double best_sigma = 0.0;
    int best_shell = -1;
    {
        std::vector<std::vector<double>> chaos_spec, turb_spec;
        for (const auto& row : train_manifest.rows) {
            if (row.split != "test") continue;
            EnergySpectrum s = image_power_spectrum(image_to_field(read_image(row.path)));
            (row.label == "chaos" ? chaos_spec : turb_spec).push_back(s.energy);
        }
        const std::size_t shells = std::min(chaos_spec.front().size(), turb_spec.front().size());
        auto stats = [&](const std::vector<std::vector<double>>& set, std::size_t k) {
            double mean = 0.0;
            for (const auto& s : set) mean += s[k];
            mean /= static_cast<double>(set.size());
            double var = 0.0;
            for (const auto& s : set) var += (s[k] - mean) * (s[k] - mean);
            var /= static_cast<double>(set.size() - 1);
            return std::pair{mean, std::sqrt(var / static_cast<double>(set.size()))};
        };
        std::ofstream out(dir + "/two_point_spectra.csv", std::ios::trunc);
        out << "k,chaos_mean,chaos_se,turb_mean,turb_se,sigma_separation\n";
        for (std::size_t k = 1; k < shells; ++k) {
            const auto [cm, cse] = stats(chaos_spec, k);
            const auto [tm, tse] = stats(turb_spec, k);
            const double denom = std::sqrt(cse * cse + tse * tse);
            const double sigma = denom > 0.0 ? std::abs(tm - cm) / denom : 0.0;
            out << k << ',' << cm << ',' << cse << ',' << tm << ',' << tse << ',' << sigma << '\n';
            if (k < static_cast<std::size_t>(config_.train_sim.k_forcing) && sigma > best_sigma) {
                best_sigma = sigma;
                best_shell = static_cast<int>(k);
            }
        }
    }

    nlohmann::json summary{{"adversarial", adversarial},
                           {"ood", ood},
                           {"prob_outside_fraction", outside},
                           {"spectra_max_sigma", best_sigma},
                           {"spectra_best_shell", best_shell}};
    std::ofstream sj(dir + "/eval_summary.json", std::ios::trunc);
    sj << summary.dump(2) << '\n';
    mark_done(dir, key, summary);
}

void Pipeline::write_report() {
    const std::string dir = report_dir();
    fs::create_directories(dir);
    std::vector<std::string> missing;

    auto copy_in = [&](const std::string& src, const std::string& dst) {
        if (!fs::exists(src)) {
            missing.push_back(src);
            return;
        }
        fs::copy_file(src, dir + "/" + dst, fs::copy_options::overwrite_existing);
    };

    copy_in(work_dir_ + "/effdim/effdim.json", "effdim.json");
    copy_in(work_dir_ + "/effdim/effdim_table.csv", "effdim_table.csv");
    copy_in(work_dir_ + "/eval/adversarial_table.csv", "adversarial_table.csv");
    copy_in(work_dir_ + "/eval/ood_table.csv", "ood_table.csv");
    copy_in(work_dir_ + "/eval/two_point_spectra.csv", "two_point_spectra.csv");
    copy_in(work_dir_ + "/eval/prob_hist_turb_chaos_test.csv", "prob_hist_turb_chaos_test.csv");
    copy_in(work_dir_ + "/eval/eval_summary.json", "eval_summary.json");
    for (const std::string task : {std::string("turb_chaos"), std::string("turb_noise")})
        for (std::uint64_t seed : config_.seeds)
            copy_in(train_log_path(task, seed),
                    "train_log_" + task + "_seed" + std::to_string(seed) + ".csv");

    // inverse-cascade ensemble fits from the training simulations
    nlohmann::json cascade;
    try {
        const auto runs = load_labeled_runs(config_.train_sim);
        std::vector<double> mean_turb, mean_late;
        int turb_count = 0;
        for (const auto& lr : runs) {
            std::vector<double> times;
            std::vector<EnergySpectrum> spectra;
            read_spectra_csv(sim_dir(*lr.profile, lr.run) + "/spectra.csv", times, spectra);
            for (std::size_t i = 0; i < lr.labels.size(); ++i) {
                if (lr.labels[i].regime != Regime::Turbulent) continue;
                if (mean_turb.size() < spectra[i].energy.size())
                    mean_turb.resize(spectra[i].energy.size(), 0.0);
                for (std::size_t k = 0; k < spectra[i].energy.size(); ++k)
                    mean_turb[k] += spectra[i].energy[k];
                ++turb_count;
            }
            if (!spectra.empty()) {
                const auto& last = spectra.back();
                if (mean_late.size() < last.energy.size()) mean_late.resize(last.energy.size(), 0.0);
                for (std::size_t k = 0; k < last.energy.size(); ++k) mean_late[k] += last.energy[k];
            }
        }
        if (turb_count > 0) {
            EnergySpectrum turb_spec;
            turb_spec.energy = mean_turb;
            for (double& e : turb_spec.energy) e /= turb_count;
            turb_spec.modes.assign(turb_spec.energy.size(), 1);
            PowerLawFit fit = fit_power_law(turb_spec, 6.0, 14.0);

            EnergySpectrum late_spec;
            late_spec.energy = mean_late;
            for (double& e : late_spec.energy) e /= static_cast<double>(runs.size());
            late_spec.modes.assign(late_spec.energy.size(), 1);
            PowerLawFit low = fit_power_law(late_spec, 1.0, 5.0);

            cascade = {{"turbulent_snapshots", turb_count},
                       {"runs", runs.size()},
                       {"band_slope", fit.slope},
                       {"band_r2", fit.r2},
                       {"band", {6.0, 14.0}},
                       {"late_low_k_slope", low.slope},
                       {"low_band", {1.0, 5.0}}};
            std::ofstream cs(dir + "/cascade_spectra.csv", std::ios::trunc);
            cs << "k,turbulent_mean_E,late_mean_E\n";
            for (std::size_t k = 0; k < turb_spec.energy.size(); ++k)
                cs << k << ',' << turb_spec.energy[k] << ','
                   << (k < late_spec.energy.size() ? late_spec.energy[k] : 0.0) << '\n';
        } else {
            missing.push_back("turbulent snapshots for the cascade fit");
        }
    } catch (const std::exception& e) {
        missing.push_back(std::string("cascade fit: ") + e.what());
    }

    nlohmann::json report{{"profile", config_.profile_name},
                          {"master_seed", config_.master_seed},
                          {"config", config_.to_json()},
                          {"cascade", cascade},
                          {"missing", missing}};
    std::ofstream out(dir + "/report.json", std::ios::trunc);
    out << report.dump(2) << '\n';

    if (!missing.empty()) {
        std::ostringstream os;
        os << "report incomplete; missing:";
        for (const auto& m : missing) os << "\n  - " << m;
        throw std::runtime_error(os.str());
    }
}

void Pipeline::run_all() {
    run_sims();
    label_regimes();
    build_datasets();
    build_noise();
    train_classifiers();
    effdim_reports();
    evaluate_tables();
    write_report();
}

Pipeline::Summary Pipeline::summary() const {
    Summary s;
    {
        std::ifstream in(report_dir() + "/report.json");
        if (in) {
            nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
            if (!j.is_discarded() && j.contains("cascade") && !j["cascade"].is_null() &&
                j["cascade"].contains("band_slope")) {
                s.cascade_slope = j["cascade"]["band_slope"].get<double>();
                s.cascade_r2 = j["cascade"]["band_r2"].get<double>();
                s.condensate_slope = j["cascade"]["late_low_k_slope"].get<double>();
            }
        }
    }
    {
        std::ifstream in(work_dir_ + "/eval/eval_summary.json");
        if (in) {
            nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
            if (!j.is_discarded()) {
                s.adversarial = j.value("adversarial", nlohmann::json::array());
                s.ood = j.value("ood", nlohmann::json::array());
                s.prob_outside_fraction = j.value("prob_outside_fraction", 0.0);
                s.spectra_max_sigma = j.value("spectra_max_sigma", 0.0);
                s.spectra_best_shell = j.value("spectra_best_shell", -1);
            }
        }
    }
    {
        std::ifstream in(work_dir_ + "/effdim/effdim.json");
        if (in) {
            nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
            if (!j.is_discarded()) s.effdim = j;
        }
    }
    for (const std::string task : {std::string("turb_chaos"), std::string("turb_noise")}) {
        const std::string marker =
            work_dir_ + "/train/" + task + "_seed" + std::to_string(config_.seeds.front()) +
            "/_done.json";
        std::ifstream in(marker);
        if (!in) continue;
        nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
        if (j.is_discarded()) continue;
        s.classifier_accuracy[task] = j.value("final_test_accuracy", 0.0);
        s.classifier_epochs[task] = j.value("epochs", 0);
    }
    return s;
}

std::vector<std::size_t> probability_histogram(const std::vector<double>& probs, int bins) {
    std::vector<std::size_t> counts(bins, 0);
    for (double p : probs) {
        int b = static_cast<int>(p * bins);
        b = std::clamp(b, 0, bins - 1);
        counts[b]++;
    }
    return counts;
}

} // namespace flowlab
