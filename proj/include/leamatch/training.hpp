#pragma once

#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "leamatch/config.hpp"

namespace leamatch {

/// Locates a land by id; throws Error(UnknownId).
const ProcessedLand& find_land(const ProcessedBullet& bullet, const std::string& land_id);

/// Labelled land-pair features from manifest rows whose two barrels are both
/// in `barrels`. Every same-source row is kept; different-source rows are
/// subsampled (seeded) to negatives_per_positive per positive. Rows whose
/// features are unavailable are skipped.
std::vector<LabeledFeatures> build_training_set(const std::vector<ManifestRow>& manifest,
                                                const std::map<std::string, ProcessedBullet>& bullets,
                                                const std::set<std::string>& barrels, const StriaeConfig& striae,
                                                const TrainingConfig& cfg);

/// bullet_id -> processed bullet.
std::map<std::string, ProcessedBullet> process_bullets(const std::vector<Bullet>& bullets, const SurfaceConfig& cfg);

/// Bullets that appear in manifest rows on the side of a barrel in `barrels`.
std::set<std::string> bullets_of_barrels(const std::vector<ManifestRow>& manifest, const std::set<std::string>& barrels);

/// build_training_set followed by train_forest.
Forest train_on_barrels(const std::vector<ManifestRow>& manifest, const std::map<std::string, ProcessedBullet>& bullets,
                        const std::set<std::string>& barrels, const Config& cfg);

/// barrels.csv as written by write_dataset: barrel_id -> split.
std::map<std::string, std::string> read_barrels_csv(std::istream& in);

}  // namespace leamatch
