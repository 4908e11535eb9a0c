#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "leamatch/scan_store.hpp"
#include "leamatch/scoring.hpp"
#include "leamatch/session.hpp"

namespace leamatch {

/// One cell of the bullet-to-bullet grid. Diagonal cells are 1.0 by
/// convention; an off-diagonal cell without any available land pair has
/// no comparison and carries the error code instead.
struct BulletCell {
    std::optional<BulletComparison> comparison;
    std::optional<ErrorCode> error;
};

/// Everything computed for a case with one pipeline configuration and one
/// forest. Immutable once published.
struct CaseArtifacts {
    std::string case_id;
    std::vector<std::string> bullet_ids;
    std::vector<Bullet> scans;
    std::vector<ProcessedBullet> bullets;
    /// grid[i][j] compares bullet i (rows of its land matrix) with bullet j.
    std::vector<std::vector<BulletCell>> grid;
    std::uint64_t cfg_digest = 0;
    std::uint64_t forest_digest = 0;
    std::uint64_t artifact_digest = 0;

    int index_of(const std::string& bullet_id) const;
};

/// Canonical JSON of the computed artifacts; its FNV-1a digest is the
/// artifact digest.
nlohmann::json artifacts_json(const CaseArtifacts& artifacts);

CaseArtifacts compute_artifacts(const std::string& case_id, const std::vector<Bullet>& scans, const Forest& forest,
                                const PipelineConfig& cfg);

/// Level payloads are pure functions of the session state and the pinned
/// artifacts. Throws Error(LevelNotActive).
nlohmann::json level_payload(const ExaminerSession& session, const CaseArtifacts& artifacts, int level);

/// Block-mean downsampling so that neither dimension exceeds max_dim.
struct DownsampledGrid {
    Eigen::MatrixXd heights;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
    int factor = 1;
};

DownsampledGrid downsample(const SurfaceScan& scan, int max_dim);

struct ServiceOptions {
    /// Case definitions, artifacts and session event logs live here when set.
    std::optional<std::filesystem::path> state_dir;
    /// Milliseconds since the epoch; replaceable for tests.
    std::function<std::int64_t()> clock;
};

/// Holds cases and examiner sessions. Mutations of one session are
/// serialized; every successful mutation appends one line to the session's
/// event log before it becomes visible.
class ExaminerService {
public:
    ExaminerService(std::shared_ptr<ScanStore> store, Forest forest, PipelineConfig cfg, ServiceOptions options = {});

    ExaminerService(const ExaminerService&) = delete;
    ExaminerService& operator=(const ExaminerService&) = delete;

    /// Throws Error(UnknownId) for bullets missing from the store and
    /// Error(BadRequest) for empty or duplicated lists.
    void define_case(const std::string& case_id, const std::vector<std::string>& bullet_ids);
    bool has_case(const std::string& case_id) const;
    std::vector<std::string> case_ids() const;

    /// Runs the pipeline for every bullet of the case and publishes the
    /// artifacts. Throws Error(AllMasked) when no bullet pair has a score.
    std::shared_ptr<const CaseArtifacts> compute_case(const std::string& case_id);
    std::shared_ptr<const CaseArtifacts> artifacts(const std::string& case_id) const;
    nlohmann::json case_summary(const std::string& case_id) const;

    std::string create_session(const std::string& case_id, SessionMode mode);
    nlohmann::json add_level(const std::string& session_id, int level);
    nlohmann::json select_bullet_pair(const std::string& session_id, const std::string& a, const std::string& b);
    nlohmann::json select_land_pair(const std::string& session_id, int land_a, int land_b);
    nlohmann::json set_match_frame(const std::string& session_id, bool enabled, int hypothesis_phase);
    nlohmann::json record_conclusion(const std::string& session_id, AfteCategory category, const std::string& rationale);

    nlohmann::json session_state(const std::string& session_id) const;
    nlohmann::json level(const std::string& session_id, int level) const;
    std::vector<AuditEntry> audit(const std::string& session_id) const;
    ExaminerSession session(const std::string& session_id) const;
    std::vector<std::string> session_ids() const;

    const PipelineConfig& config() const { return cfg_; }
    const Forest& forest() const { return forest_; }
    const ScanStore& store() const { return *store_; }

private:
    struct CaseEntry {
        std::vector<std::string> bullet_ids;
        std::shared_ptr<const CaseArtifacts> artifacts;
    };
    struct Slot {
        explicit Slot(ExaminerSession s, std::shared_ptr<const CaseArtifacts> a)
            : session(std::move(s)), artifacts(std::move(a)) {}
        mutable std::mutex mutex;
        ExaminerSession session;
        std::shared_ptr<const CaseArtifacts> artifacts;
    };

    std::int64_t now() const;
    std::shared_ptr<Slot> slot(const std::string& session_id) const;
    nlohmann::json mutate(const std::string& session_id, const std::function<void(ExaminerSession&, std::int64_t)>& fn);
    void append_log(const ExaminerSession& session, std::size_t from) const;
    void save_case_definition(const std::string& case_id, const CaseEntry& entry) const;
    void restore();

    std::shared_ptr<ScanStore> store_;
    Forest forest_;
    PipelineConfig cfg_;
    ServiceOptions options_;

    mutable std::shared_mutex cases_mutex_;
    std::map<std::string, CaseEntry> cases_;
    std::mutex compute_mutex_;

    mutable std::shared_mutex sessions_mutex_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    int next_session_ = 1;
};

}  // namespace leamatch
