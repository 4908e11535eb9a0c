#include "leamatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "leamatch/digest.hpp"
#include "leamatch/numeric/correlation.hpp"
#include "leamatch/scan_store.hpp"

namespace leamatch {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag, std::int64_t a = 0, std::int64_t b = 0) {
    Fnv1a h;
    h.update_value(seed);
    h.update(tag);
    h.update_value(a);
    h.update_value(b);
    return h.value();
}

/// Smoothed white noise with zero mean and the requested sd, optionally
/// high-passed by subtracting a wide moving average.
VectorXd smooth_noise(std::mt19937_64& rng, Eigen::Index length, int corr_len, int highpass, double sd) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::Index pad = corr_len + highpass;
    VectorXd raw(length + 2 * pad);
    for (Eigen::Index i = 0; i < raw.size(); ++i) raw(i) = normal(rng);
    VectorXd smooth = moving_average(raw, no_mask(raw.size()), std::max(1, corr_len));
    if (highpass > 0) smooth -= moving_average(smooth, no_mask(smooth.size()), highpass | 1);
    VectorXd out = smooth.segment(pad, length);
    out.array() -= out.mean();
    const double cur = std::sqrt(out.squaredNorm() / static_cast<double>(length));
    if (cur > 0) out *= sd / cur;
    return out;
}

std::string pad_number(int value, int width) {
    std::string s = std::to_string(value);
    return std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(s.size()))), '0') + s;
}

}  // namespace

Barrel make_barrel(std::uint64_t seed, int n_lands, const SynthConfig& cfg, std::string barrel_id) {
    if (n_lands < 4 || n_lands > 8) throw Error(ErrorCode::BadConfig, "n_lands must be in [4,8]");
    Barrel b;
    b.barrel_id = barrel_id.empty() ? "barrel-" + std::to_string(seed) : std::move(barrel_id);
    b.seed = seed;
    b.n_lands = n_lands;
    for (int k = 0; k < n_lands; ++k) {
        std::mt19937_64 rng(derive_seed(seed, "latent:" + b.barrel_id, k));
        b.latent.push_back(smooth_noise(rng, cfg.latent_length, cfg.correlation_length, cfg.highpass_length, cfg.pattern_sd_um));
    }
    return b;
}

VectorXd synth_geometry(const SynthConfig& cfg, bool left_shoulder, bool right_shoulder) {
    const Eigen::Index cols = cfg.cols;
    VectorXd g(cols);
    const double xc = 0.5 * static_cast<double>(cols - 1) * cfg.x_res_um;
    const double r = cfg.bullet_radius_um;
    const auto margin = static_cast<Eigen::Index>(std::lround(cfg.shoulder_margin * static_cast<double>(cols)));
    const double ramp = std::max(1.0, cfg.shoulder_ramp * static_cast<double>(cols));
    // 0 at the shoulder column, rising over `ramp` samples to full height.
    auto rise = [&](Eigen::Index depth) {
        const double t = std::min(1.0, static_cast<double>(depth) / ramp);
        return cfg.shoulder_height_um * 0.5 * (1.0 - std::cos(std::numbers::pi * t));
    };
    for (Eigen::Index x = 0; x < cols; ++x) {
        const double dx = static_cast<double>(x) * cfg.x_res_um - xc;
        double z = std::sqrt(std::max(0.0, r * r - dx * dx)) - r;
        if (left_shoulder && x < margin) z += rise(margin - x);
        const Eigen::Index from_right = cols - 1 - x;
        if (right_shoulder && from_right < margin) z += rise(margin - from_right);
        g(x) = z;
    }
    return g;
}

SynthBullet fire_bullet(const Barrel& barrel, const FiringSpec& spec, std::uint64_t seed, const SynthConfig& cfg,
                        std::string bullet_id) {
    const int n = barrel.n_lands;
    if (spec.rotation < 0 || spec.rotation >= n) throw Error(ErrorCode::BadConfig, "rotation outside [0,n_lands)");
    if (cfg.rows < kMinScanDim || cfg.cols < kMinScanDim) throw Error(ErrorCode::BadConfig, "scan too small");
    if (cfg.latent_length < cfg.cols + 2 * cfg.max_lateral_shift)
        throw Error(ErrorCode::BadConfig, "latent_length too short for cols and lateral shift");

    SynthBullet out;
    out.barrel_id = barrel.barrel_id;
    out.rotation = spec.rotation;
    if (bullet_id.empty()) bullet_id = barrel.barrel_id + "-" + std::to_string(seed);

    const double noise_sd = spec.noise_sd_um.value_or(cfg.noise_sd_um);
    const double texture_sd = spec.texture_sd_um.value_or(cfg.texture_sd_um);
    const double nose_sd = spec.nose_texture_sd_um.value_or(cfg.nose_texture_sd_um);
    const double taper_top = spec.taper_top.value_or(cfg.taper_top);
    const VectorXd geometry = synth_geometry(cfg, spec.left_shoulder, spec.right_shoulder);
    const auto margin = static_cast<Eigen::Index>(std::lround(cfg.shoulder_margin * cfg.cols));

    std::vector<ScanPtr> lands;
    out.truth.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        std::mt19937_64 rng(derive_seed(seed, "land:" + bullet_id, j));
        const int k = ((j - spec.rotation) % n + n) % n;
        LandTruth& truth = out.truth[static_cast<std::size_t>(j)];
        truth.barrel_land = k;
        std::uniform_int_distribution<int> shift(-cfg.max_lateral_shift, cfg.max_lateral_shift);
        truth.lateral_shift = shift(rng);
        std::uniform_real_distribution<double> jitter(-cfg.wear_jitter, cfg.wear_jitter);
        truth.wear = spec.wear_scale * (1.0 + jitter(rng));
        truth.left_shoulder = spec.left_shoulder ? margin : 0;
        truth.right_shoulder = spec.right_shoulder ? cfg.cols - 1 - margin : cfg.cols - 1;
        const Eigen::Index offset = (cfg.latent_length - cfg.cols) / 2 + truth.lateral_shift;
        truth.latent_window = barrel.latent[static_cast<std::size_t>(k)].segment(offset, cfg.cols);

        VectorXd texture = smooth_noise(rng, cfg.cols, cfg.correlation_length, cfg.highpass_length, 1.0);
        const bool damaged =
            spec.damage && (spec.damage->lands.empty() ||
                            std::find(spec.damage->lands.begin(), spec.damage->lands.end(), j) != spec.damage->lands.end());

        VectorXd marks = truth.latent_window;
        // Smear: striae in the damaged block are replaced by a heavily blurred copy.
        Eigen::Index smear_rows = 0, smear_c0 = 0, smear_c1 = 0;
        VectorXd smeared;
        if (damaged && spec.damage->type == DamageType::Smear) {
            const double frac = std::clamp(spec.damage->extent, 0.0, 1.0);
            smear_rows = static_cast<Eigen::Index>(std::lround(std::sqrt(frac) * cfg.rows));
            const auto w = static_cast<Eigen::Index>(std::lround(std::sqrt(frac) * cfg.cols));
            smear_c0 = (cfg.cols - w) / 2;
            smear_c1 = smear_c0 + w;
            smeared = moving_average(marks, no_mask(marks.size()), 41);
        }

        SurfaceScan scan;
        scan.bullet_id = bullet_id;
        scan.land_id = "L" + std::to_string(j + 1);
        scan.barrel_id = barrel.barrel_id;
        scan.x_res_um = cfg.x_res_um;
        scan.y_res_um = cfg.y_res_um;
        scan.heights.resize(cfg.rows, cfg.cols);
        scan.mask.setConstant(cfg.rows, cfg.cols, false);
        std::normal_distribution<double> noise(0.0, 1.0);
        for (Eigen::Index y = 0; y < cfg.rows; ++y) {
            const double t = static_cast<double>(y) / static_cast<double>(cfg.rows - 1);
            const double taper = 1.0 - (1.0 - taper_top) * t;
            const double nose = taper_top < 1.0 ? (1.0 - taper) / (1.0 - taper_top) : 0.0;
            const double texture_w = texture_sd + nose_sd * nose;
            for (Eigen::Index x = 0; x < cfg.cols; ++x) {
                const bool in_smear = y < smear_rows && x >= smear_c0 && x < smear_c1;
                const double m = in_smear ? smeared(x) : marks(x);
                const double z = geometry(x) + truth.wear * taper * m + texture_w * texture(x) + noise_sd * noise(rng);
                scan.heights(y, x) = static_cast<float>(z);
            }
        }

        if (damaged && spec.damage->type == DamageType::BreakOff) {
            // Triangular chip off the base-left corner with a ragged edge.
            const double extent = std::clamp(spec.damage->extent, 0.0, 0.85);
            const double wmax = 0.6 * cfg.cols;
            const double hmax = 2.0 * extent * cfg.rows * cfg.cols / wmax;
            std::uniform_int_distribution<int> ragged(-2, 2);
            for (Eigen::Index x = 0; x < static_cast<Eigen::Index>(wmax); ++x) {
                const double h = hmax * (1.0 - static_cast<double>(x) / wmax);
                const auto top = std::clamp<Eigen::Index>(std::lround(h) + ragged(rng), 0, cfg.rows);
                for (Eigen::Index y = 0; y < top; ++y) scan.mask(y, x) = true;
            }
        }
        scan.canonicalize();
        lands.push_back(std::make_shared<const SurfaceScan>(std::move(scan)));
    }
    out.bullet = make_bullet(bullet_id, std::move(lands));
    return out;
}

int true_phase(const SynthBullet& a, const SynthBullet& b) {
    const int n = a.bullet.n_lands();
    return ((b.rotation - a.rotation) % n + n) % n;
}

bool Dataset::is_holdout(const std::string& barrel_id) const {
    return std::find(holdout_barrels.begin(), holdout_barrels.end(), barrel_id) != holdout_barrels.end();
}

const SynthBullet& Dataset::bullet(const std::string& bullet_id) const {
    for (const auto& b : bullets)
        if (b.bullet.bullet_id == bullet_id) return b;
    throw Error(ErrorCode::UnknownId, "bullet " + bullet_id);
}

Dataset make_dataset(int n_barrels, int bullets_per_barrel, std::uint64_t seed, const SynthConfig& cfg) {
    if (n_barrels < 4) throw Error(ErrorCode::BadConfig, "make_dataset needs at least 4 barrels");
    if (bullets_per_barrel < 1) throw Error(ErrorCode::BadConfig, "bullets_per_barrel must be positive");
    Dataset ds;
    ds.config = cfg;
    ds.seed = seed;

    const int total = n_barrels * bullets_per_barrel;
    std::vector<int> labels(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) labels[static_cast<std::size_t>(i)] = i + 1;
    std::mt19937_64 id_rng(derive_seed(seed, "bullet-ids"));
    std::shuffle(labels.begin(), labels.end(), id_rng);

    const int n_holdout = std::max(1, static_cast<int>(std::lround(cfg.holdout_fraction * n_barrels)));
    std::size_t next_label = 0;
    for (int b = 0; b < n_barrels; ++b) {
        const std::string barrel_id = "BR" + pad_number(b + 1, 2);
        ds.barrels.push_back(make_barrel(derive_seed(seed, "barrel", b), cfg.n_lands, cfg, barrel_id));
        (b < n_barrels - n_holdout ? ds.train_barrels : ds.holdout_barrels).push_back(barrel_id);
        std::mt19937_64 rng(derive_seed(seed, "firing", b));
        std::uniform_int_distribution<int> rotation(0, cfg.n_lands - 1);
        for (int k = 0; k < bullets_per_barrel; ++k) {
            FiringSpec spec;
            spec.rotation = rotation(rng);
            const std::string id = "B" + pad_number(labels[next_label++], 3);
            ds.bullets.push_back(fire_bullet(ds.barrels.back(), spec, derive_seed(seed, "bullet", b, k), cfg, id));
        }
    }
    std::sort(ds.bullets.begin(), ds.bullets.end(),
              [](const SynthBullet& x, const SynthBullet& y) { return x.bullet.bullet_id < y.bullet.bullet_id; });

    for (std::size_t i = 0; i < ds.bullets.size(); ++i) {
        for (std::size_t j = i + 1; j < ds.bullets.size(); ++j) {
            const auto& a = ds.bullets[i];
            const auto& b = ds.bullets[j];
            for (int la = 0; la < a.bullet.n_lands(); ++la) {
                for (int lb = 0; lb < b.bullet.n_lands(); ++lb) {
                    ManifestRow row;
                    row.bullet_a = a.bullet.bullet_id;
                    row.land_a = a.bullet.lands[static_cast<std::size_t>(la)]->land_id;
                    row.bullet_b = b.bullet.bullet_id;
                    row.land_b = b.bullet.lands[static_cast<std::size_t>(lb)]->land_id;
                    row.barrel_a = a.barrel_id;
                    row.barrel_b = b.barrel_id;
                    row.rotation_a = a.rotation;
                    row.rotation_b = b.rotation;
                    row.same_source = a.barrel_id == b.barrel_id &&
                                      a.truth[static_cast<std::size_t>(la)].barrel_land ==
                                          b.truth[static_cast<std::size_t>(lb)].barrel_land;
                    ds.manifest.push_back(std::move(row));
                }
            }
        }
    }
    return ds;
}

void write_manifest_csv(std::ostream& out, const std::vector<ManifestRow>& rows) {
    out << "bullet_a,land_a,bullet_b,land_b,label,barrel_a,barrel_b,rotation_a,rotation_b\n";
    for (const auto& r : rows) {
        out << r.bullet_a << ',' << r.land_a << ',' << r.bullet_b << ',' << r.land_b << ','
            << (r.same_source ? "same" : "different") << ',' << r.barrel_a << ',' << r.barrel_b << ','
            << r.rotation_a << ',' << r.rotation_b << '\n';
    }
}

std::vector<ManifestRow> read_manifest_csv(std::istream& in) {
    std::vector<ManifestRow> rows;
    std::string line;
    if (!std::getline(in, line)) return rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 9) throw Error(ErrorCode::BadRequest, "manifest row with " + std::to_string(f.size()) + " fields");
        ManifestRow r;
        r.bullet_a = f[0];
        r.land_a = f[1];
        r.bullet_b = f[2];
        r.land_b = f[3];
        r.same_source = f[4] == "same";
        r.barrel_a = f[5];
        r.barrel_b = f[6];
        r.rotation_a = std::stoi(f[7]);
        r.rotation_b = std::stoi(f[8]);
        rows.push_back(std::move(r));
    }
    return rows;
}

std::uint64_t manifest_digest(const std::vector<ManifestRow>& rows) {
    std::ostringstream ss;
    write_manifest_csv(ss, rows);
    return fnv1a(ss.str());
}

void store_dataset(const Dataset& ds, ScanStore& store) {
    for (const auto& b : ds.bullets)
        for (const auto& land : b.bullet.lands) store.put(*land);
}

void write_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (const auto& b : ds.bullets)
        for (const auto& land : b.bullet.lands)
            save_scan_file(*land, (fs::path(dir) / (land->bullet_id + "_" + land->land_id + ".leascan")).string());
    std::ofstream manifest(fs::path(dir) / "manifest.csv");
    write_manifest_csv(manifest, ds.manifest);
    std::ofstream barrels(fs::path(dir) / "barrels.csv");
    barrels << "barrel_id,split\n";
    for (const auto& id : ds.train_barrels) barrels << id << ",train\n";
    for (const auto& id : ds.holdout_barrels) barrels << id << ",holdout\n";
}

}  // namespace leamatch
