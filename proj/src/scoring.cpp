#include "leamatch/scoring.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

namespace leamatch {

ProcessedBullet process_bullet(const Bullet& bullet, const SurfaceConfig& cfg) {
    ProcessedBullet out;
    out.bullet_id = bullet.bullet_id;
    for (const auto& scan : bullet.lands) {
        ProcessedLand land;
        land.land_id = scan->land_id;
        try {
            land.artifacts = process_land(*scan, cfg);
        } catch (const Error& e) {
            land.error = e.code();
            land.error_detail = e.what();
        }
        out.lands.push_back(std::move(land));
    }
    return out;
}

ScoreMatrix land_matrix(const Forest& forest, const ProcessedBullet& a, const ProcessedBullet& b,
                        const StriaeConfig& cfg) {
    ScoreMatrix m;
    m.bullet_a = a.bullet_id;
    m.bullet_b = b.bullet_id;
    const int na = a.n_lands(), nb = b.n_lands();
    for (const auto& l : a.lands) m.lands_a.push_back(l.land_id);
    for (const auto& l : b.lands) m.lands_b.push_back(l.land_id);
    m.scores = Eigen::MatrixXd::Zero(na, nb);
    m.unavailable.setConstant(na, nb, true);
    m.comparisons.assign(static_cast<std::size_t>(na), std::vector<std::optional<PairComparison>>(nb));

    for (int i = 0; i < na; ++i) {
        const auto& la = a.lands[static_cast<std::size_t>(i)].artifacts;
        if (!la) continue;
        for (int j = 0; j < nb; ++j) {
            const auto& lb = b.lands[static_cast<std::size_t>(j)].artifacts;
            if (!lb) continue;
            try {
                PairComparison pc = compare(la->signature, lb->signature, cfg);
                m.scores(i, j) = score_land_pair(forest, pc.features);
                m.unavailable(i, j) = false;
                m.comparisons[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::move(pc);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::FeatureUnavailable) throw;
            }
        }
    }
    return m;
}

PhaseResult best_phase(const Eigen::MatrixXd& scores, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& unavailable) {
    const auto n = static_cast<int>(scores.rows());
    if (n == 0 || scores.cols() != n) throw Error(ErrorCode::AllMasked, "score grid must be square and nonempty");
    PhaseResult out;
    out.per_phase_means.assign(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
    bool any = false;
    for (int p = 0; p < n; ++p) {
        double sum = 0.0;
        int count = 0;
        for (int i = 0; i < n; ++i) {
            const int j = (i + p) % n;
            if (unavailable(i, j)) continue;
            sum += scores(i, j);
            ++count;
        }
        if (n - count > 1) out.sparse_diagonal = true;
        if (count == 0) continue;
        const double mean = sum / count;
        out.per_phase_means[static_cast<std::size_t>(p)] = mean;
        if (!any || mean > out.bullet_score) {
            out.phase = p;
            out.bullet_score = mean;
            any = true;
        }
    }
    if (!any) throw Error(ErrorCode::AllMasked, "every cell of the score grid is unavailable");
    for (int i = 0; i < n; ++i) {
        const int j = (i + out.phase) % n;
        if (!unavailable(i, j)) out.in_phase_pairs.push_back({i, j, scores(i, j)});
    }
    return out;
}

PhaseResult best_phase(const ScoreMatrix& matrix) { return best_phase(matrix.scores, matrix.unavailable); }

BulletComparison bullet_score(const ProcessedBullet& a, const ProcessedBullet& b, const Forest& forest,
                              const StriaeConfig& cfg) {
    BulletComparison out;
    if (a.bullet_id == b.bullet_id) {
        out.score = 1.0;
        out.by_convention = true;
        return out;
    }
    out.matrix = land_matrix(forest, a, b, cfg);
    out.phase_result = best_phase(*out.matrix);
    out.phase = out.phase_result->phase;
    out.score = out.phase_result->bullet_score;
    return out;
}

std::vector<std::pair<int, int>> expected_match_frame(int n, int phase) {
    if (n < 1 || phase < 0 || phase >= n)
        throw Error(ErrorCode::BadPhase, "phase " + std::to_string(phase) + " outside [0," + std::to_string(n) + ")");
    std::vector<std::pair<int, int>> cells;
    cells.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) cells.emplace_back(i, (i + phase) % n);
    return cells;
}

void write_score_matrix_csv(std::ostream& out, const ScoreMatrix& m) {
    out << m.bullet_a << '\\' << m.bullet_b;
    for (const auto& id : m.lands_b) out << ',' << id;
    out << '\n';
    char buf[32];
    for (int i = 0; i < m.scores.rows(); ++i) {
        out << m.lands_a[static_cast<std::size_t>(i)];
        for (int j = 0; j < m.scores.cols(); ++j) {
            out << ',';
            if (m.unavailable(i, j)) continue;
            std::snprintf(buf, sizeof buf, "%.17g", m.scores(i, j));
            out << buf;
        }
        out << '\n';
    }
}

}  // namespace leamatch
