#include "support.hpp"

#include <unistd.h>

#include <atomic>

#include "leamatch/numeric/correlation.hpp"
#include "leamatch/training.hpp"

namespace leamatch::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("leamatch_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

SurfaceScan plain_scan(int rows, int cols, const std::string& bullet, const std::string& land) {
    SurfaceScan s;
    s.bullet_id = bullet;
    s.land_id = land;
    s.x_res_um = 1.5625;
    s.y_res_um = 1.5625;
    s.heights.resize(rows, cols);
    s.mask.setConstant(rows, cols, false);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) s.heights(r, c) = static_cast<float>(5.0 + 0.01 * r + std::sin(c / 7.0));
    return s;
}

VectorXd smooth_noise(Eigen::Index n, std::uint64_t seed, int window, double sd) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sd);
    VectorXd x(n);
    for (auto& v : x) v = g(rng);
    if (window <= 1) return x;
    return moving_average(x, no_mask(n), window);
}

const Dataset& small_dataset() {
    static const Dataset ds = [] {
        SynthConfig cfg;
        cfg.holdout_fraction = 1.0 / 3.0;
        return make_dataset(6, 3, 1234, cfg);
    }();
    return ds;
}

const Forest& small_forest() {
    static const Forest forest = [] {
        const auto& ds = small_dataset();
        std::vector<Bullet> bullets;
        for (const auto& b : ds.bullets) bullets.push_back(b.bullet);
        Config cfg;
        cfg.forest.n_trees = 60;
        const auto processed = process_bullets(bullets, cfg.pipeline.surface);
        const std::set<std::string> train(ds.train_barrels.begin(), ds.train_barrels.end());
        return train_on_barrels(ds.manifest, processed, train, cfg);
    }();
    return forest;
}

}  // namespace leamatch::testing
