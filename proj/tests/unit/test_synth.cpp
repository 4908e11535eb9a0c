#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "leamatch/scan_store.hpp"
#include "leamatch/striae.hpp"
#include "leamatch/synth.hpp"
#include "leamatch/training.hpp"
#include "support.hpp"

using namespace leamatch;

namespace {

double pearson(const VectorXd& x, const VectorXd& y) {
    const VectorXd a = x.array() - x.mean();
    const VectorXd b = y.array() - y.mean();
    return a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
}

double sd(const VectorXd& x) { return std::sqrt((x.array() - x.mean()).square().mean()); }

}  // namespace

TEST(MakeBarrel, DeterministicWithSixLands) {
    SynthConfig cfg;
    const auto a = make_barrel(5, 6, cfg, "BX");
    const auto b = make_barrel(5, 6, cfg, "BX");
    ASSERT_EQ(a.latent.size(), 6u);
    for (int k = 0; k < 6; ++k) {
        EXPECT_EQ(a.latent[k], b.latent[k]);
        EXPECT_EQ(a.latent[k].size(), cfg.latent_length);
        EXPECT_GE(sd(a.latent[k]), 0.5);
        EXPECT_LE(sd(a.latent[k]), 5.0);
    }
    EXPECT_NE(make_barrel(6, 6, cfg, "BX").latent[0], a.latent[0]);
}

TEST(MakeBarrel, IndependentPatterns) {
    SynthConfig cfg;
    double worst = 0;
    for (int s = 0; s < 50; ++s) {
        const auto a = make_barrel(100 + s, 6, cfg);
        const auto b = make_barrel(900 + s, 6, cfg);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) {
                worst = std::max(worst, std::abs(pearson(a.latent[i], b.latent[j])));
                if (i < j) worst = std::max(worst, std::abs(pearson(a.latent[i], a.latent[j])));
            }
    }
    EXPECT_LT(worst, 0.3);
}

TEST(FireBullet, NoiselessRowFollowsLatent) {
    SynthConfig cfg;
    const auto barrel = make_barrel(7, 6, cfg, "BR");
    FiringSpec spec;
    spec.noise_sd_um = 0.0;
    spec.texture_sd_um = 0.0;
    spec.nose_texture_sd_um = 0.0;
    const auto sb = fire_bullet(barrel, spec, 3, cfg, "X");
    const VectorXd geom = synth_geometry(cfg, true, true);
    for (int j = 0; j < 6; ++j) {
        const auto& scan = *sb.bullet.lands[j];
        const auto& t = sb.truth[j];
        const Eigen::Index lo = t.left_shoulder, len = t.right_shoulder - t.left_shoulder + 1;
        for (Eigen::Index row : {Eigen::Index{0}, Eigen::Index{10}, Eigen::Index{80}}) {
            const VectorXd z = scan.heights.row(row).transpose().cast<double>() - geom;
            EXPECT_GE(pearson(z.segment(lo, len), t.latent_window.segment(lo, len)), 0.99);
        }
    }
}

TEST(FireBullet, RotationMapsLands) {
    SynthConfig cfg;
    const auto barrel = make_barrel(8, 6, cfg, "BR");
    FiringSpec r0, r2;
    r2.rotation = 2;
    const auto x = fire_bullet(barrel, r0, 1, cfg, "X");
    const auto y = fire_bullet(barrel, r2, 2, cfg, "Y");
    EXPECT_EQ(y.rotation, 2);
    EXPECT_EQ(true_phase(x, y), 2);
    EXPECT_EQ(true_phase(y, x), 4);
    for (int i = 0; i < 6; ++i) {
        EXPECT_EQ(x.truth[i].barrel_land, y.truth[(i + 2) % 6].barrel_land);
        EXPECT_EQ(y.truth[i].barrel_land, ((i - 2) % 6 + 6) % 6);
    }
}

TEST(FireBullet, DeterministicScans) {
    SynthConfig cfg;
    const auto barrel = make_barrel(9, 6, cfg, "BR");
    const auto a = fire_bullet(barrel, {}, 4, cfg, "X");
    const auto b = fire_bullet(barrel, {}, 4, cfg, "X");
    const auto c = fire_bullet(barrel, {}, 5, cfg, "X");
    for (int j = 0; j < 6; ++j) {
        EXPECT_EQ(scan_digest(*a.bullet.lands[j]), scan_digest(*b.bullet.lands[j]));
        EXPECT_NE(scan_digest(*a.bullet.lands[j]), scan_digest(*c.bullet.lands[j]));
    }
}

TEST(FireBullet, BreakOffFraction) {
    SynthConfig cfg;
    const auto barrel = make_barrel(10, 6, cfg, "BR");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        FiringSpec spec;
        spec.damage = Damage{DamageType::BreakOff, 0.15, {}};
        const auto b = fire_bullet(barrel, spec, seed, cfg, "X");
        for (const auto& land : b.bullet.lands) {
            const double f = land->masked_fraction();
            EXPECT_GE(f, 0.10);
            EXPECT_LE(f, 0.20);
            EXPECT_TRUE(land->mask(0, 0));
            EXPECT_FALSE(land->mask(cfg.rows - 1, cfg.cols - 1));
        }
    }
}

TEST(FireBullet, SmearChangesHeightsNotMask) {
    SynthConfig cfg;
    const auto barrel = make_barrel(11, 6, cfg, "BR");
    FiringSpec spec;
    spec.damage = Damage{DamageType::Smear, 0.15, {1}};
    const auto clean = fire_bullet(barrel, {}, 1, cfg, "X");
    const auto smeared = fire_bullet(barrel, spec, 1, cfg, "X");
    EXPECT_EQ(smeared.bullet.lands[1]->masked_fraction(), 0.0);
    EXPECT_NE(scan_digest(*smeared.bullet.lands[1]), scan_digest(*clean.bullet.lands[1]));
    EXPECT_EQ(scan_digest(*smeared.bullet.lands[0]), scan_digest(*clean.bullet.lands[0]));
}

TEST(FireBullet, SameBarrelHasHigherCcf) {
    SynthConfig scfg;
    SurfaceConfig cfg;
    double same = 0, diff = 0;
    const int trials = 100;
    for (int t = 0; t < trials; ++t) {
        const auto br1 = make_barrel(3000 + t, 6, scfg, "P");
        const auto br2 = make_barrel(7000 + t, 6, scfg, "Q");
        const int land = t % 6;
        const auto x = process_land(*fire_bullet(br1, {}, 1, scfg, "X").bullet.lands[land], cfg).signature;
        const auto y = process_land(*fire_bullet(br1, {}, 2, scfg, "Y").bullet.lands[land], cfg).signature;
        const auto z = process_land(*fire_bullet(br2, {}, 3, scfg, "Z").bullet.lands[land], cfg).signature;
        same += features(x, y, StriaeConfig{}).ccf;
        diff += features(x, z, StriaeConfig{}).ccf;
    }
    EXPECT_GT(same / trials, diff / trials + 0.3);
}

TEST(MakeDataset, CountsAndLabels) {
    SynthConfig cfg;
    const auto ds = make_dataset(10, 3, 42, cfg);
    EXPECT_EQ(ds.bullets.size(), 30u);
    std::size_t scans = 0;
    std::set<std::string> ids;
    for (const auto& b : ds.bullets) {
        scans += b.bullet.lands.size();
        ids.insert(b.bullet.bullet_id);
        EXPECT_EQ(b.bullet.bullet_id.find(b.barrel_id), std::string::npos);
    }
    EXPECT_EQ(scans, 180u);
    EXPECT_EQ(ids.size(), 30u);
    EXPECT_EQ(ds.manifest.size(), 30u * 29u / 2u * 36u);
    EXPECT_EQ(ds.train_barrels.size() + ds.holdout_barrels.size(), 10u);
    EXPECT_FALSE(ds.holdout_barrels.empty());

    std::map<std::pair<std::string, std::string>, int> same_per_pair;
    for (const auto& r : ds.manifest) {
        if (r.barrel_a == r.barrel_b) same_per_pair[{r.bullet_a, r.bullet_b}] += r.same_source;
        else
            EXPECT_FALSE(r.same_source);
    }
    EXPECT_EQ(same_per_pair.size(), 10u * 3u);
    for (const auto& [k, v] : same_per_pair) EXPECT_EQ(v, 6);

    const auto again = make_dataset(10, 3, 42, cfg);
    EXPECT_EQ(manifest_digest(again.manifest), manifest_digest(ds.manifest));
    EXPECT_NE(manifest_digest(make_dataset(4, 2, 43, cfg).manifest), manifest_digest(ds.manifest));
}

TEST(MakeDataset, HoldoutNeverInTraining) {
    const auto& ds = leamatch::testing::small_dataset();
    const std::set<std::string> train(ds.train_barrels.begin(), ds.train_barrels.end());
    const auto train_bullets = bullets_of_barrels(ds.manifest, train);
    for (const auto& b : ds.bullets) EXPECT_EQ(train_bullets.count(b.bullet.bullet_id) == 1, !ds.is_holdout(b.barrel_id));
}

TEST(ManifestCsv, RoundTrip) {
    const auto& ds = leamatch::testing::small_dataset();
    std::stringstream io;
    write_manifest_csv(io, ds.manifest);
    std::string header;
    std::getline(io, header);
    EXPECT_EQ(header, "bullet_a,land_a,bullet_b,land_b,label,barrel_a,barrel_b,rotation_a,rotation_b");
    io.seekg(0);
    const auto back = read_manifest_csv(io);
    ASSERT_EQ(back.size(), ds.manifest.size());
    EXPECT_EQ(manifest_digest(back), manifest_digest(ds.manifest));
}

TEST(StoreDataset, PutsEveryScan) {
    leamatch::testing::TempDir dir("synthstore");
    const auto ds = make_dataset(4, 1, 3, SynthConfig{});
    ScanStore store(dir.path().string());
    store_dataset(ds, store);
    for (const auto& b : ds.bullets)
        for (const auto& land : b.bullet.lands)
            EXPECT_EQ(scan_digest(store.get(b.bullet.bullet_id, land->land_id)), scan_digest(*land));
}
