#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "leamatch/numeric/types.hpp"
#include "leamatch/scan.hpp"

namespace leamatch {

class ScanStore;

struct SynthConfig {
    int rows = 160;
    int cols = 600;
    double x_res_um = 1.5625;
    double y_res_um = 1.5625;

    /// Barrel land pattern length; scans see a `cols`-wide window of it.
    int latent_length = 2048;
    int correlation_length = 12;
    /// Width of a wide moving average subtracted from the smoothed noise
    /// so the pattern carries no broad undulation; 0 disables it.
    int highpass_length = 64;
    double pattern_sd_um = 1.5;

    double bullet_radius_um = 4500.0;
    double shoulder_height_um = 30.0;
    /// Shoulder position as a fraction of cols from each edge.
    double shoulder_margin = 0.12;
    /// Width of the raised-cosine rise, as a fraction of cols.
    double shoulder_ramp = 0.04;

    /// Striation scale at the top row relative to the base row.
    double taper_top = 0.35;
    double wear_jitter = 0.10;
    double noise_sd_um = 0.3;
    /// Bullet-specific marks not shared with the barrel, constant over rows.
    double texture_sd_um = 0.5;
    /// Additional bullet-specific texture that grows toward the nose.
    double nose_texture_sd_um = 1.5;
    int max_lateral_shift = 20;

    int n_lands = 6;
    double holdout_fraction = 1.0 / 3.0;
};

struct Barrel {
    std::string barrel_id;
    std::uint64_t seed = 0;
    int n_lands = 0;
    /// One latent striation pattern per barrel land.
    std::vector<VectorXd> latent;
};

/// Latent patterns are moving-average-smoothed white noise standardised to
/// pattern_sd_um, reproducible from (seed, barrel_id, land index).
Barrel make_barrel(std::uint64_t seed, int n_lands, const SynthConfig& cfg, std::string barrel_id = {});

enum class DamageType { BreakOff, Smear };

struct Damage {
    DamageType type = DamageType::BreakOff;
    /// Fraction of the scan area affected.
    double extent = 0.15;
    /// Restrict damage to these bullet land indices; empty = every land.
    std::vector<int> lands;
};

struct FiringSpec {
    int rotation = 0;
    double wear_scale = 1.0;
    std::optional<double> noise_sd_um;    // defaults to SynthConfig
    std::optional<double> texture_sd_um;  // defaults to SynthConfig
    std::optional<double> nose_texture_sd_um;
    std::optional<double> taper_top;
    std::optional<Damage> damage;
    bool left_shoulder = true;
    bool right_shoulder = true;
};

struct LandTruth {
    int barrel_land = 0;
    int lateral_shift = 0;
    double wear = 1.0;
    Eigen::Index left_shoulder = 0;   // first interior column
    Eigen::Index right_shoulder = 0;  // last interior column
    /// Barrel pattern as seen across this scan's columns (before scaling).
    VectorXd latent_window;
};

struct SynthBullet {
    Bullet bullet;
    std::string barrel_id;
    int rotation = 0;
    std::vector<LandTruth> truth;
};

/// Bullet land j carries barrel land (j - rotation) mod n.
SynthBullet fire_bullet(const Barrel& barrel, const FiringSpec& spec, std::uint64_t seed, const SynthConfig& cfg,
                        std::string bullet_id = {});

/// Deterministic geometry part (arc + shoulders) of one scan row.
VectorXd synth_geometry(const SynthConfig& cfg, bool left_shoulder, bool right_shoulder);

/// Relative phase between two bullets of one barrel: land i of `a` pairs
/// with land (i + phase) mod n of `b`.
int true_phase(const SynthBullet& a, const SynthBullet& b);

struct ManifestRow {
    std::string bullet_a, land_a, bullet_b, land_b;
    bool same_source = false;
    std::string barrel_a, barrel_b;
    int rotation_a = 0, rotation_b = 0;
};

struct Dataset {
    SynthConfig config;
    std::uint64_t seed = 0;
    std::vector<Barrel> barrels;
    std::vector<SynthBullet> bullets;
    std::vector<std::string> train_barrels;
    std::vector<std::string> holdout_barrels;
    std::vector<ManifestRow> manifest;

    bool is_holdout(const std::string& barrel_id) const;
    const SynthBullet& bullet(const std::string& bullet_id) const;
};

/// Every land pair across distinct bullets, labelled by barrel identity and
/// rotation. Bullet ids are anonymous and do not reveal the barrel.
Dataset make_dataset(int n_barrels, int bullets_per_barrel, std::uint64_t seed, const SynthConfig& cfg);

void write_manifest_csv(std::ostream& out, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest_csv(std::istream& in);
std::uint64_t manifest_digest(const std::vector<ManifestRow>& rows);

/// Writes scans into the store.
void store_dataset(const Dataset& ds, ScanStore& store);

/// Writes <dir>/*.leascan, manifest.csv and barrels.csv (barrel_id,split).
void write_dataset(const Dataset& ds, const std::string& dir);

}  // namespace leamatch
