#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "leamatch/forest.hpp"
#include "leamatch/striae.hpp"
#include "leamatch/surface.hpp"

namespace leamatch {

/// Per-land pipeline output for one bullet. A land whose pipeline failed
/// has no artifacts and records the error code.
struct ProcessedLand {
    std::string land_id;
    std::optional<LandArtifacts> artifacts;
    std::optional<ErrorCode> error;
    std::string error_detail;
};

struct ProcessedBullet {
    std::string bullet_id;
    std::vector<ProcessedLand> lands;

    int n_lands() const { return static_cast<int>(lands.size()); }
};

ProcessedBullet process_bullet(const Bullet& bullet, const SurfaceConfig& cfg);

struct PipelineConfig {
    SurfaceConfig surface;
    StriaeConfig striae;
};

struct ScoreMatrix {
    std::string bullet_a, bullet_b;
    std::vector<std::string> lands_a, lands_b;
    Eigen::MatrixXd scores;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> unavailable;
    /// comparisons[i][j] present iff the cell is available.
    std::vector<std::vector<std::optional<PairComparison>>> comparisons;

    int n() const { return static_cast<int>(scores.rows()); }
};

/// scores(i, j) = forest score of (a.land i, b.land j); a cell is marked
/// unavailable when either land has no signature or no lag is admissible.
ScoreMatrix land_matrix(const Forest& forest, const ProcessedBullet& a, const ProcessedBullet& b,
                        const StriaeConfig& cfg);

struct InPhasePair {
    int land_a = 0;
    int land_b = 0;
    double score = 0.0;
};

struct PhaseResult {
    int phase = 0;
    /// NaN for a phase whose cells are all unavailable.
    std::vector<double> per_phase_means;
    double bullet_score = 0.0;
    std::vector<InPhasePair> in_phase_pairs;
    /// Some cyclic diagonal has more than one unavailable cell.
    bool sparse_diagonal = false;
};

/// Mean score along each cyclic diagonal (i, (i+p) mod n); argmax with
/// ties to the smallest p. Throws Error(AllMasked).
PhaseResult best_phase(const ScoreMatrix& matrix);

/// Overload on a bare square score grid with an availability mask.
PhaseResult best_phase(const Eigen::MatrixXd& scores, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& unavailable);

struct BulletComparison {
    double score = 0.0;
    std::optional<int> phase;
    std::optional<ScoreMatrix> matrix;
    std::optional<PhaseResult> phase_result;
    /// Self-comparison reported as 1.0 without computing anything.
    bool by_convention = false;
};

BulletComparison bullet_score(const ProcessedBullet& a, const ProcessedBullet& b, const Forest& forest,
                              const StriaeConfig& cfg);

/// The n cells (i, (i + phase) mod n). Throws Error(BadPhase).
std::vector<std::pair<int, int>> expected_match_frame(int n, int phase);

/// Grid with land ids as header row and column; unavailable cells empty.
void write_score_matrix_csv(std::ostream& out, const ScoreMatrix& matrix);

}  // namespace leamatch
