#include "flowlab/effdim.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

namespace flowlab {

namespace {

// exactly-uniform streaming subsample: keep row j with probability
// (wanted - kept) / (total - j)
class SelectionSampler {
public:
    SelectionSampler(std::size_t total, std::size_t wanted, Rng& rng)
        : total_(total), wanted_(std::min(wanted, total)), rng_(rng) {}

    bool keep() {
        const std::size_t remaining = total_ - seen_;
        const std::size_t needed = wanted_ - kept_;
        ++seen_;
        if (needed == 0) return false;
        if (needed >= remaining) {
            ++kept_;
            return true;
        }
        if (rng_.uniform() * static_cast<double>(remaining) < static_cast<double>(needed)) {
            ++kept_;
            return true;
        }
        return false;
    }

    std::size_t kept() const { return kept_; }

private:
    std::size_t total_, wanted_;
    std::size_t seen_ = 0, kept_ = 0;
    Rng& rng_;
};

void append_stage_rows(const StageActivations<float>& acts, int stage, SelectionSampler& sampler,
                       ActivationMatrix& out) {
    const int c = acts.channels[stage];
    const int hw = acts.hw[stage];
    const std::size_t plane = static_cast<std::size_t>(hw) * hw;
    const float* data = acts.data[stage].data();
    for (std::size_t pos = 0; pos < plane; ++pos) {
        if (!sampler.keep()) continue;
        for (int ch = 0; ch < c; ++ch)
            out.rows.push_back(static_cast<double>(data[ch * plane + pos]));
        ++out.row_count;
    }
}

} // namespace

std::array<ActivationMatrix, 4> collect_all_stages(const StageNet& net,
                                                   const std::vector<GrayImage>& images,
                                                   std::size_t row_cap, std::uint64_t seed) {
    if (images.empty()) throw std::invalid_argument("collect_all_stages: no images");

    std::array<ActivationMatrix, 4> out;
    std::array<std::unique_ptr<Rng>, 4> rngs;
    std::array<std::unique_ptr<SelectionSampler>, 4> samplers;
    for (int s = 0; s < 4; ++s) {
        out[s].stage = s;
        out[s].channels = net.stage_channels(s);
        const std::size_t plane = static_cast<std::size_t>(net.stage_hw(s)) * net.stage_hw(s);
        const std::size_t total = images.size() * plane;
        rngs[s] = std::make_unique<Rng>(derive_seed(seed, "effdim:stage" + std::to_string(s)));
        samplers[s] = std::make_unique<SelectionSampler>(total, row_cap, *rngs[s]);
        out[s].rows.reserve(std::min(row_cap, total) * out[s].channels);
    }

    for (const auto& img : images) {
        const std::vector<float> x = normalize_input<float>(img);
        StageActivations<float> acts;
        net.forward(x, &acts);
        for (int s = 0; s < 4; ++s) append_stage_rows(acts, s, *samplers[s], out[s]);
    }

    for (int s = 0; s < 4; ++s) {
        if (out[s].row_count < 50 * static_cast<std::size_t>(out[s].channels))
            throw std::invalid_argument("collect_all_stages: stage " + std::to_string(s + 1) +
                                        " has fewer than 50·C rows");
    }
    return out;
}

ActivationMatrix collect_activation_matrix(const StageNet& net,
                                           const std::vector<GrayImage>& images, int stage,
                                           std::size_t row_cap, Rng& rng) {
    if (stage < 0 || stage > 3)
        throw std::invalid_argument("collect_activation_matrix: stage must be in [0, 3]");
    if (images.empty()) throw std::invalid_argument("collect_activation_matrix: no images");

    ActivationMatrix out;
    out.stage = stage;
    out.channels = net.stage_channels(stage);
    const std::size_t plane = static_cast<std::size_t>(net.stage_hw(stage)) * net.stage_hw(stage);
    SelectionSampler sampler(images.size() * plane, row_cap, rng);
    out.rows.reserve(std::min(row_cap, images.size() * plane) * out.channels);

    for (const auto& img : images) {
        const std::vector<float> x = normalize_input<float>(img);
        StageActivations<float> acts;
        net.forward(x, &acts);
        append_stage_rows(acts, stage, sampler, out);
    }
    if (out.row_count < 50 * static_cast<std::size_t>(out.channels))
        throw std::invalid_argument("collect_activation_matrix: fewer than 50·C rows");
    return out;
}

std::vector<double> explained_variance_ratios(const ActivationMatrix& m) {
    const int c = m.channels;
    if (c < 1 || m.row_count < 2)
        throw std::invalid_argument("explained_variance_ratios: need at least 2 rows");

    // streaming first and second moments in double precision
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(c);
    Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(c, c);
    Eigen::VectorXd row(c);
    for (std::size_t r = 0; r < m.row_count; ++r) {
        for (int j = 0; j < c; ++j) row[j] = m.rows[r * c + j];
        mean += row;
        xtx.selfadjointView<Eigen::Lower>().rankUpdate(row);
    }
    const double n = static_cast<double>(m.row_count);
    mean /= n;
    Eigen::MatrixXd cov = (Eigen::MatrixXd(xtx.selfadjointView<Eigen::Lower>()) -
                           n * mean * mean.transpose()) /
                          (n - 1.0);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("explained_variance_ratios: eigendecomposition failed");

    std::vector<double> lambda(solver.eigenvalues().data(), solver.eigenvalues().data() + c);
    double total = 0.0;
    for (double& l : lambda) {
        if (l < 0.0) l = 0.0; // round-off
        total += l;
    }
    if (total <= 0.0)
        throw std::invalid_argument("explained_variance_ratios: zero total variance");

    std::sort(lambda.begin(), lambda.end(), std::greater<double>());
    for (double& l : lambda) l /= total;
    return lambda;
}

double effective_dimension(const std::vector<double>& ratios) {
    if (ratios.empty()) throw std::invalid_argument("effective_dimension: empty spectrum");
    double entropy = 0.0;
    for (double r : ratios) {
        if (r < 0.0) throw std::invalid_argument("effective_dimension: negative ratio");
        if (r > 0.0) entropy -= r * std::log(r);
    }
    return std::exp(entropy);
}

EffDimReport effdim_report(const std::string& task, const std::vector<Checkpoint>& checkpoints,
                           const std::vector<GrayImage>& test_images, std::size_t row_cap,
                           std::uint64_t seed) {
    if (checkpoints.size() < 2)
        throw std::invalid_argument("effdim_report: need at least 2 seeds");
    for (const auto& c : checkpoints)
        if (c.net_config.hash() != checkpoints.front().net_config.hash())
            throw std::invalid_argument("effdim_report: inconsistent stage structure");

    EffDimReport report;
    report.task = task;
    report.seeds = static_cast<int>(checkpoints.size());
    report.row_cap = row_cap;

    for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
        StageNet net = net_from_checkpoint(checkpoints[ci]);
        const auto matrices =
            collect_all_stages(net, test_images, row_cap,
                               derive_seed(seed, "effdim:seed" + std::to_string(ci)));
        for (int s = 0; s < 4; ++s)
            report.stages[s].per_seed.push_back(
                effective_dimension(explained_variance_ratios(matrices[s])));
        report.checkpoint_tags.push_back("seed" + std::to_string(checkpoints[ci].seed));
    }

    for (int s = 0; s < 4; ++s) {
        auto& st = report.stages[s];
        double sum = 0.0;
        for (double v : st.per_seed) sum += v;
        st.mean = sum / static_cast<double>(st.per_seed.size());
        double acc = 0.0;
        for (double v : st.per_seed) acc += (v - st.mean) * (v - st.mean);
        st.stddev = std::sqrt(acc / static_cast<double>(st.per_seed.size() - 1));
    }
    return report;
}

void write_effdim_json(const std::string& path, const std::vector<EffDimReport>& reports) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& r : reports) {
        nlohmann::json stages = nlohmann::json::array();
        for (const auto& s : r.stages)
            stages.push_back({{"mean", s.mean}, {"std", s.stddev}, {"per_seed", s.per_seed}});
        doc.push_back({{"task", r.task},
                       {"stages", stages},
                       {"seeds", r.seeds},
                       {"row_cap", r.row_cap},
                       {"checkpoints", r.checkpoint_tags}});
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_effdim_json: cannot open " + path);
    out << doc.dump(2) << '\n';
}

void write_effdim_csv(const std::string& path, const std::vector<EffDimReport>& reports) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_effdim_csv: cannot open " + path);
    out << "task,stage1_mean,stage1_std,stage2_mean,stage2_std,stage3_mean,stage3_std,"
           "stage4_mean,stage4_std,seeds\n";
    char buf[400];
    for (const auto& r : reports) {
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%d\n",
                      r.task.c_str(), r.stages[0].mean, r.stages[0].stddev, r.stages[1].mean,
                      r.stages[1].stddev, r.stages[2].mean, r.stages[2].stddev, r.stages[3].mean,
                      r.stages[3].stddev, r.seeds);
        out << buf;
    }
}

} // namespace flowlab
