#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "leamatch/error.hpp"

namespace leamatch {

inline constexpr int kLevelCount = 6;

enum class SessionMode { Guided, Diagnostics };
enum class AfteCategory { Identification, Elimination, Inconclusive, Unsuitable };

std::string to_string(SessionMode mode);
std::string to_string(AfteCategory category);
/// Throws Error(BadRequest) for anything but the exact names.
SessionMode parse_mode(const std::string& text);
AfteCategory parse_category(const std::string& text);

struct AfteConclusion {
    AfteCategory category = AfteCategory::Inconclusive;
    std::string rationale;
    /// Every level added at some point, taken from the audit trail.
    std::set<int> levels_visited_at_decision;
};

struct Selection {
    std::optional<std::pair<std::string, std::string>> bullet_pair;
    std::optional<std::pair<int, int>> land_pair;
};

struct MatchFrame {
    bool enabled = false;
    int hypothesis_phase = 0;
};

struct AuditEntry {
    std::uint64_t seq = 0;
    std::int64_t timestamp_ms = 0;
    std::string action;
    nlohmann::json params;
};

nlohmann::json to_json(const AuditEntry& entry);
AuditEntry audit_entry_from_json(const nlohmann::json& j);

/// What a session needs to know about its case to validate selections.
struct CaseView {
    std::vector<std::string> bullet_ids;
    std::map<std::string, int> n_lands;
    /// Hex digest of the computed artifacts the session is pinned to.
    std::string artifact_digest;
};

/// Sequentially unlocked examination levels:
///   1 bullet-to-bullet scores, 2 land-to-land scores, 3 aligned signatures,
///   4 grooves on profiles, 5 side-by-side profiles, 6 scans.
///
/// Every mutation is validated first and then recorded as exactly one audit
/// entry; state changes only by applying audit entries, so replaying the
/// audit trail reproduces the state.
class ExaminerSession {
public:
    static ExaminerSession create(const std::string& session_id, const std::string& case_id, SessionMode mode,
                                  const CaseView& view, std::int64_t now_ms);
    /// Throws Error(BadRequest) when the log does not start with "created".
    static ExaminerSession replay(const std::vector<AuditEntry>& audit);

    void add_level(int level, std::int64_t now_ms);
    void select_bullet_pair(const std::string& a, const std::string& b, std::int64_t now_ms);
    void select_land_pair(int land_a, int land_b, std::int64_t now_ms);
    void set_match_frame(bool enabled, int hypothesis_phase, std::int64_t now_ms);
    void record_conclusion(AfteCategory category, const std::string& rationale, std::int64_t now_ms);

    /// Throws Error(LevelNotActive).
    void require_level(int level) const;
    bool level_active(int level) const { return active_.count(level) > 0; }

    const std::string& session_id() const { return session_id_; }
    const std::string& case_id() const { return case_id_; }
    SessionMode mode() const { return mode_; }
    const std::set<int>& active_levels() const { return active_; }
    const Selection& selection() const { return selection_; }
    const MatchFrame& match_frame() const { return frame_; }
    const std::vector<AuditEntry>& audit() const { return audit_; }
    const std::optional<AfteConclusion>& conclusion() const { return conclusion_; }
    const CaseView& case_view() const { return view_; }
    /// Lands per bullet of the selected pair (bullet a); 0 without a pair.
    int selected_lands() const;

    /// Canonical state document; equal states serialize to equal bytes.
    nlohmann::json state_json() const;

private:
    ExaminerSession() = default;

    void ensure_open() const;
    void commit(std::string action, nlohmann::json params, std::int64_t now_ms);
    void apply(const AuditEntry& entry);

    std::string session_id_;
    std::string case_id_;
    SessionMode mode_ = SessionMode::Guided;
    CaseView view_;
    std::set<int> active_;
    std::set<int> visited_;
    Selection selection_;
    MatchFrame frame_;
    std::vector<AuditEntry> audit_;
    std::optional<AfteConclusion> conclusion_;
};

}  // namespace leamatch
