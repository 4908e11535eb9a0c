#include "leamatch/training.hpp"

#include <algorithm>
#include <istream>
#include <random>

namespace leamatch {

const ProcessedLand& find_land(const ProcessedBullet& bullet, const std::string& land_id) {
    for (const auto& land : bullet.lands)
        if (land.land_id == land_id) return land;
    throw Error(ErrorCode::UnknownId, bullet.bullet_id + "/" + land_id);
}

std::vector<LabeledFeatures> build_training_set(const std::vector<ManifestRow>& manifest,
                                                const std::map<std::string, ProcessedBullet>& bullets,
                                                const std::set<std::string>& barrels, const StriaeConfig& striae,
                                                const TrainingConfig& cfg) {
    std::vector<const ManifestRow*> positives, negatives;
    for (const auto& row : manifest) {
        if (!barrels.count(row.barrel_a) || !barrels.count(row.barrel_b)) continue;
        (row.same_source ? positives : negatives).push_back(&row);
    }
    if (cfg.negatives_per_positive > 0) {
        std::mt19937_64 rng(cfg.seed);
        std::shuffle(negatives.begin(), negatives.end(), rng);
        const auto keep = std::min(negatives.size(),
                                   positives.size() * static_cast<std::size_t>(cfg.negatives_per_positive));
        negatives.resize(keep);
    }

    std::vector<LabeledFeatures> out;
    out.reserve(positives.size() + negatives.size());
    auto add = [&](const ManifestRow& row) {
        const auto ia = bullets.find(row.bullet_a);
        const auto ib = bullets.find(row.bullet_b);
        if (ia == bullets.end() || ib == bullets.end())
            throw Error(ErrorCode::UnknownId, "manifest bullet not processed: " + row.bullet_a + "/" + row.bullet_b);
        const auto& la = find_land(ia->second, row.land_a);
        const auto& lb = find_land(ib->second, row.land_b);
        if (!la.artifacts || !lb.artifacts) return;
        try {
            out.push_back({features(la.artifacts->signature, lb.artifacts->signature, striae), row.same_source});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::FeatureUnavailable) throw;
        }
    };
    for (const auto* row : positives) add(*row);
    for (const auto* row : negatives) add(*row);
    return out;
}

std::map<std::string, ProcessedBullet> process_bullets(const std::vector<Bullet>& bullets, const SurfaceConfig& cfg) {
    std::map<std::string, ProcessedBullet> out;
    for (const auto& b : bullets) out.emplace(b.bullet_id, process_bullet(b, cfg));
    return out;
}

std::set<std::string> bullets_of_barrels(const std::vector<ManifestRow>& manifest, const std::set<std::string>& barrels) {
    std::set<std::string> out;
    for (const auto& row : manifest) {
        if (barrels.count(row.barrel_a)) out.insert(row.bullet_a);
        if (barrels.count(row.barrel_b)) out.insert(row.bullet_b);
    }
    return out;
}

Forest train_on_barrels(const std::vector<ManifestRow>& manifest, const std::map<std::string, ProcessedBullet>& bullets,
                        const std::set<std::string>& barrels, const Config& cfg) {
    const auto samples = build_training_set(manifest, bullets, barrels, cfg.pipeline.striae, cfg.training);
    return train_forest(samples, cfg.forest);
}

std::map<std::string, std::string> read_barrels_csv(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    if (!std::getline(in, line) || line.rfind("barrel_id,split", 0) != 0)
        throw Error(ErrorCode::BadRequest, "barrels.csv must start with barrel_id,split");
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw Error(ErrorCode::BadRequest, "bad barrels.csv line: " + line);
        out[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return out;
}

}  // namespace leamatch
