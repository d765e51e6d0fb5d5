#include "flowlab/dataset.hpp"

#include "flowlab/fft.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace flowlab {

std::string field_select_name(FieldSelect f) {
    switch (f) {
    case FieldSelect::Vorticity: return "vorticity";
    case FieldSelect::Vx: return "vx";
    case FieldSelect::Vy: return "vy";
    case FieldSelect::Density: return "density";
    }
    return "vorticity";
}

void RenderSpec::validate() const {
    if (out_size < 32) throw std::invalid_argument("RenderSpec: out_size must be >= 32");
}

std::uint64_t RenderSpec::hash() const {
    const std::string tag = field_select_name(field_select) + ":" + std::to_string(out_size);
    return fnv1a64(tag);
}

RenderResult render_field(const RealField& field, const RenderSpec& spec) {
    spec.validate();
    if (!field.finite()) throw std::invalid_argument("render_field: non-finite field");

    const std::vector<double> resampled =
        (spec.out_size == field.grid.n)
            ? field.data
            : resample_bilinear(field.data, field.grid.n, field.grid.n, spec.out_size,
                                spec.out_size, ResampleEdge::Periodic);

    RenderResult out;
    out.image = GrayImage(spec.out_size, spec.out_size);
    const double m = field.max_abs();
    if (m == 0.0) {
        std::fill(out.image.pixels.begin(), out.image.pixels.end(), std::uint8_t{128});
        out.flat = true;
        return out;
    }
    // uniform quantizer of [−M, M] onto {0..255}; zero lands on 128 and the
    // map commutes with sign flip (p(−v) = 255 − p(v) away from bin edges)
    const double scale = 256.0 / (2.0 * m);
    for (std::size_t i = 0; i < resampled.size(); ++i) {
        const double q = std::floor((resampled[i] + m) * scale);
        out.image.pixels[i] = static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, q)));
    }
    return out;
}

FourierNoiseStats fit_fourier_stats(const std::vector<GrayImage>& images) {
    if (images.size() < 2)
        throw std::invalid_argument("fit_fourier_stats: need at least 2 images");
    const int size = images.front().width;
    for (const auto& img : images)
        if (img.width != size || img.height != size)
            throw std::invalid_argument("fit_fourier_stats: image size mismatch");

    const Grid2D grid(size);
    const std::size_t coeffs = static_cast<std::size_t>(grid.n) * grid.half();
    FourierNoiseStats stats;
    stats.size = size;
    stats.mean_re.assign(coeffs, 0.0);
    stats.mean_im.assign(coeffs, 0.0);
    std::vector<double> m2_re(coeffs, 0.0), m2_im(coeffs, 0.0);

    // Welford accumulation per coefficient
    std::size_t count = 0;
    for (const auto& img : images) {
        SpectralField F = transform_forward(image_to_field(img));
        ++count;
        for (std::size_t i = 0; i < coeffs; ++i) {
            const double re = F.coeffs[i].real(), im = F.coeffs[i].imag();
            const double d_re = re - stats.mean_re[i];
            stats.mean_re[i] += d_re / static_cast<double>(count);
            m2_re[i] += d_re * (re - stats.mean_re[i]);
            const double d_im = im - stats.mean_im[i];
            stats.mean_im[i] += d_im / static_cast<double>(count);
            m2_im[i] += d_im * (im - stats.mean_im[i]);
        }
    }
    stats.std_re.resize(coeffs);
    stats.std_im.resize(coeffs);
    for (std::size_t i = 0; i < coeffs; ++i) {
        stats.std_re[i] = std::sqrt(m2_re[i] / static_cast<double>(count - 1));
        stats.std_im[i] = std::sqrt(m2_im[i] / static_cast<double>(count - 1));
    }
    return stats;
}

std::vector<GrayImage> gen_noise_fourier(const FourierNoiseStats& stats, int count, Rng& rng,
                                         const RenderSpec& spec) {
    if (stats.size < 8 || stats.coeff_count() == 0)
        throw std::invalid_argument("gen_noise_fourier: invalid stats");
    const Grid2D grid(stats.size);

    std::vector<GrayImage> out;
    out.reserve(count);
    for (int c = 0; c < count; ++c) {
        SpectralField F(grid);
        for (std::size_t i = 0; i < F.coeffs.size(); ++i)
            F.coeffs[i] = {rng.normal(stats.mean_re[i], stats.std_re[i]),
                           rng.normal(stats.mean_im[i], stats.std_im[i])};
        hermitian_enforce(F);
        RealField field = transform_inverse(F);
        RenderSpec rs = spec;
        rs.out_size = stats.size; // generated at source resolution
        out.push_back(render_field(field, rs).image);
    }
    return out;
}

std::vector<GrayImage> gen_noise_annulus(int count, const ForcingSpec& fspec, const Grid2D& grid,
                                         const RenderSpec& spec, Rng& rng) {
    std::vector<GrayImage> out;
    out.reserve(count);
    for (int c = 0; c < count; ++c) {
        RealField field = transform_inverse(sample_annulus_scalar(fspec, grid, rng));
        out.push_back(render_field(field, spec).image);
    }
    return out;
}

std::vector<const ManifestRow*> DatasetManifest::split(const std::string& which) const {
    std::vector<const ManifestRow*> out;
    for (const auto& r : rows)
        if (r.split == which) out.push_back(&r);
    return out;
}

std::vector<std::string> DatasetManifest::labels() const {
    std::set<std::string> s;
    for (const auto& r : rows) s.insert(r.label);
    return {s.begin(), s.end()};
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void write_manifest(const std::string& path, const DatasetManifest& manifest) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
    out << "path,label,sim_id,t,regime,generator,render_hash,split\n";
    char tbuf[40];
    for (const auto& r : manifest.rows) {
        std::snprintf(tbuf, sizeof(tbuf), "%.9g", r.t);
        out << csv_escape(r.path) << ',' << csv_escape(r.label) << ',' << csv_escape(r.sim_id)
            << ',' << tbuf << ',' << csv_escape(r.regime) << ',' << csv_escape(r.generator) << ','
            << r.render_hash << ',' << r.split << '\n';
    }
}

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_manifest: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("path,label", 0) != 0)
        throw std::runtime_error("read_manifest: bad header in " + path);

    DatasetManifest m;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = csv_split(line);
        if (f.size() != 8) throw std::runtime_error("read_manifest: malformed row in " + path);
        m.rows.push_back(
            {f[0], f[1], f[2], std::stod(f[3]), f[4], f[5], f[6], f[7]});
    }
    return m;
}

void validate_manifest(const DatasetManifest& manifest) {
    std::set<std::string> train_sims, test_sims;
    for (const auto& r : manifest.rows) {
        if (!std::filesystem::exists(r.path))
            throw std::runtime_error("manifest: missing file " + r.path);
        if (r.split == "train") train_sims.insert(r.label + "/" + r.sim_id);
        else test_sims.insert(r.label + "/" + r.sim_id);
    }
    for (const auto& s : train_sims)
        if (test_sims.count(s))
            throw std::runtime_error("manifest: sim id " + s + " leaks across splits");
}

DatasetManifest build_dataset(std::vector<DatasetEntry> entries, const RenderSpec& spec,
                              const SplitConfig& split, const std::string& out_dir) {
    if (entries.empty()) throw std::invalid_argument("build_dataset: no entries");

    // group by (label, sim_id)
    std::map<std::string, std::map<std::string, std::vector<std::size_t>>> by_class;
    for (std::size_t i = 0; i < entries.size(); ++i)
        by_class[entries[i].label][entries[i].sim_id].push_back(i);

    const std::string hash = hash_hex(spec.hash());
    DatasetManifest manifest;
    std::filesystem::create_directories(out_dir);

    for (auto& [label, sims] : by_class) {
        const std::size_t total =
            std::accumulate(sims.begin(), sims.end(), std::size_t{0},
                            [](std::size_t acc, const auto& kv) { return acc + kv.second.size(); });
        const std::size_t want_test = std::max<std::size_t>(
            static_cast<std::size_t>(std::llround(split.test_fraction * static_cast<double>(total))),
            static_cast<std::size_t>(split.min_test_per_class));

        // deterministic pseudo-random order of sim groups
        std::vector<std::string> sim_ids;
        for (const auto& kv : sims) sim_ids.push_back(kv.first);
        std::sort(sim_ids.begin(), sim_ids.end(), [&](const std::string& a, const std::string& b) {
            const auto ha = mix64(split.seed ^ fnv1a64(a));
            const auto hb = mix64(split.seed ^ fnv1a64(b));
            return ha != hb ? ha < hb : a < b;
        });

        std::size_t test_count = 0;
        std::set<std::string> test_groups;
        for (const auto& id : sim_ids) {
            if (test_count >= want_test) break;
            test_groups.insert(id);
            test_count += sims[id].size();
        }
        if (test_count < want_test)
            throw std::invalid_argument("build_dataset: class '" + label + "' has " +
                                        std::to_string(total) + " images; cannot reach " +
                                        std::to_string(want_test) + " test images");

        std::filesystem::create_directories(out_dir + "/" + label);
        std::size_t serial = 0;
        for (const auto& id : sim_ids) {
            const bool is_test = test_groups.count(id) > 0;
            for (std::size_t idx : sims[id]) {
                DatasetEntry& e = entries[idx];
                char name[64];
                std::snprintf(name, sizeof(name), "%s/%s/%06zu.png", out_dir.c_str(),
                              label.c_str(), serial++);
                write_png(name, e.image);
                manifest.rows.push_back({name, e.label, e.sim_id, e.t, e.regime, e.generator,
                                         hash, is_test ? "test" : "train"});
            }
        }
    }

    std::sort(manifest.rows.begin(), manifest.rows.end(),
              [](const ManifestRow& a, const ManifestRow& b) { return a.path < b.path; });
    write_manifest(out_dir + "/manifest.csv", manifest);
    return manifest;
}

ImportResult import_images(const std::string& folder, int out_size, const std::string& out_dir) {
    if (!std::filesystem::is_directory(folder))
        throw std::invalid_argument("import_images: not a directory: " + folder);
    RenderSpec rs;
    rs.out_size = out_size;
    rs.validate();

    const std::string label = std::filesystem::path(folder).filename().string();
    std::filesystem::create_directories(out_dir + "/" + label);

    std::vector<std::string> files;
    for (const auto& e : std::filesystem::directory_iterator(folder))
        if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());

    ImportResult result;
    std::size_t serial = 0;
    for (const auto& path : files) {
        GrayImage src;
        try {
            src = read_image(path);
        } catch (const std::exception&) {
            ++result.skipped;
            continue;
        }
        std::vector<double> pix(src.pixels.begin(), src.pixels.end());
        const std::vector<double> res = resample_bilinear(pix, src.width, src.height, out_size,
                                                          out_size, ResampleEdge::Clamp);
        GrayImage img(out_size, out_size);
        for (std::size_t i = 0; i < res.size(); ++i)
            img.pixels[i] =
                static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, std::round(res[i]))));

        char name[64];
        std::snprintf(name, sizeof(name), "%s/%s/%06zu.png", out_dir.c_str(), label.c_str(),
                      serial++);
        write_png(name, img);
        result.manifest.rows.push_back({name, label, std::filesystem::path(path).filename().string(),
                                        0.0, "", "import", hash_hex(rs.hash()), "train"});
    }
    write_manifest(out_dir + "/manifest_" + label + ".csv", result.manifest);
    return result;
}

} // namespace flowlab
