#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "leamatch/service.hpp"
#include "leamatch/synth.hpp"

namespace leamatch {

/// bullet_scores.csv, land_scores_<a>_<b>.csv per bullet pair, features.csv
/// and artifacts.json.
void write_score_bundle(const CaseArtifacts& artifacts, const std::filesystem::path& dir);

/// Replays a session event log written by ExaminerService.
ExaminerSession load_session_log(const std::filesystem::path& path);

/// CSV audit timeline: seq,timestamp_ms,action,params.
void write_audit_csv(std::ostream& out, const std::vector<AuditEntry>& audit);

/// session.md and audit.csv. With `truth`, also truth.csv and a ground truth
/// section; only allowed for concluded sessions (Error(BadRequest)).
void write_session_report(const ExaminerSession& session, const std::filesystem::path& dir,
                          const std::vector<ManifestRow>* truth);

}  // namespace leamatch
