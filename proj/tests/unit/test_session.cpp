#include <gtest/gtest.h>

#include <random>

#include "leamatch/session.hpp"

using namespace leamatch;

namespace {

CaseView view() {
    CaseView v;
    v.bullet_ids = {"B1", "B2", "B3"};
    v.n_lands = {{"B1", 6}, {"B2", 6}, {"B3", 5}};
    v.artifact_digest = "00112233445566778899";
    return v;
}

ExaminerSession fresh(SessionMode mode) { return ExaminerSession::create("S0001", "C1", mode, view(), 1000); }

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Io;
}

std::set<int> S(std::initializer_list<int> xs) { return xs; }

/// Reference model of the level rules, written from the rule list rather
/// than from the implementation. Returns the expected error, if any, and
/// updates itself on success.
struct Model {
    SessionMode mode = SessionMode::Guided;
    std::set<int> active{1}, visited{1};
    std::optional<std::pair<std::string, std::string>> bp;
    std::optional<std::pair<int, int>> lp;
    bool frame = false;
    bool concluded = false;

    int lands(const std::string& id) const { return id == "B3" ? 5 : 6; }

    std::optional<ErrorCode> add(int k) {
        if (concluded) return ErrorCode::AlreadyConcluded;
        if (k < 1 || k > 6) return ErrorCode::BadLevel;
        if (active.count(k)) return ErrorCode::AlreadyActive;
        if (mode == SessionMode::Guided && k != *active.rbegin() + 1) return ErrorCode::OutOfOrder;
        if (k >= 2 && !bp) return ErrorCode::MissingSelection;
        if (k >= 3 && !lp) return ErrorCode::MissingSelection;
        active.insert(k);
        visited.insert(k);
        return std::nullopt;
    }
    std::optional<ErrorCode> bullets(const std::string& a, const std::string& b) {
        if (concluded) return ErrorCode::AlreadyConcluded;
        if (a.size() != 2 || b.size() != 2 || a[0] != 'B' || b[0] != 'B' || a[1] < '1' || a[1] > '3' || b[1] < '1' ||
            b[1] > '3')
            return ErrorCode::UnknownId;
        if (a == b) return ErrorCode::BadRequest;
        if (!bp || *bp != std::make_pair(a, b)) {
            bp = {a, b};
            lp.reset();
            frame = false;
            for (int k = 3; k <= 6; ++k) active.erase(k);
        }
        return std::nullopt;
    }
    std::optional<ErrorCode> land(int i, int j) {
        if (concluded) return ErrorCode::AlreadyConcluded;
        if (!active.count(2)) return ErrorCode::LevelNotActive;
        if (i < 0 || j < 0 || i >= lands(bp->first) || j >= lands(bp->second)) return ErrorCode::UnknownId;
        if (lp && *lp != std::make_pair(i, j) && mode == SessionMode::Guided)
            for (int k = 3; k <= 6; ++k) active.erase(k);
        lp = {i, j};
        return std::nullopt;
    }
    std::optional<ErrorCode> set_frame(bool on, int phase) {
        if (concluded) return ErrorCode::AlreadyConcluded;
        if (!active.count(2)) return ErrorCode::LevelNotActive;
        if (on && (phase < 0 || phase >= lands(bp->first))) return ErrorCode::BadPhase;
        frame = on;
        return std::nullopt;
    }
    std::optional<ErrorCode> conclude(AfteCategory c) {
        if (concluded) return ErrorCode::AlreadyConcluded;
        const bool definitive = c == AfteCategory::Identification || c == AfteCategory::Elimination;
        if (mode == SessionMode::Guided && definitive && visited.size() < 6) return ErrorCode::PrematureConclusion;
        concluded = true;
        return std::nullopt;
    }
};

}  // namespace

TEST(Session, CreateStartsAtLevelOne) {
    const auto s = fresh(SessionMode::Guided);
    EXPECT_EQ(s.active_levels(), S({1}));
    ASSERT_EQ(s.audit().size(), 1u);
    EXPECT_EQ(s.audit()[0].action, "created");
    EXPECT_EQ(s.audit()[0].seq, 0u);
    EXPECT_FALSE(s.conclusion().has_value());
    EXPECT_EQ(s.state_json()["artifact_digest"], view().artifact_digest);
}

TEST(Session, GuidedOrdering) {
    auto s = fresh(SessionMode::Guided);
    EXPECT_EQ(code_of([&] { s.add_level(2, 1); }), ErrorCode::MissingSelection);
    s.select_bullet_pair("B1", "B2", 2);
    s.add_level(2, 3);
    EXPECT_EQ(s.active_levels(), S({1, 2}));
    EXPECT_EQ(code_of([&] { s.add_level(4, 4); }), ErrorCode::OutOfOrder);
    EXPECT_EQ(code_of([&] { s.add_level(2, 4); }), ErrorCode::AlreadyActive);
    EXPECT_EQ(code_of([&] { s.add_level(7, 4); }), ErrorCode::BadLevel);
    EXPECT_EQ(code_of([&] { s.add_level(0, 4); }), ErrorCode::BadLevel);
    EXPECT_EQ(code_of([&] { s.add_level(3, 4); }), ErrorCode::MissingSelection);
    s.select_land_pair(0, 2, 5);
    for (int k = 3; k <= 5; ++k) s.add_level(k, 6);
    EXPECT_EQ(s.active_levels(), S({1, 2, 3, 4, 5}));
    s.select_land_pair(1, 3, 7);
    EXPECT_EQ(s.active_levels(), S({1, 2}));
    s.select_land_pair(1, 3, 8);  // same pair: nothing to truncate
    EXPECT_EQ(s.active_levels(), S({1, 2}));
}

TEST(Session, DiagnosticsAllowsSkipping) {
    auto s = fresh(SessionMode::Diagnostics);
    s.select_bullet_pair("B1", "B2", 1);
    s.add_level(2, 2);
    s.select_land_pair(0, 0, 3);
    s.add_level(5, 4);
    EXPECT_EQ(s.active_levels(), S({1, 2, 5}));
    s.select_land_pair(1, 1, 5);
    EXPECT_EQ(s.active_levels(), S({1, 2, 5}));
    s.add_level(3, 6);
    EXPECT_EQ(s.active_levels(), S({1, 2, 3, 5}));
}

TEST(Session, SelectionErrors) {
    auto s = fresh(SessionMode::Guided);
    EXPECT_EQ(code_of([&] { s.select_land_pair(0, 0, 1); }), ErrorCode::LevelNotActive);
    EXPECT_EQ(code_of([&] { s.select_bullet_pair("B1", "B9", 1); }), ErrorCode::UnknownId);
    EXPECT_EQ(code_of([&] { s.select_bullet_pair("B1", "B1", 1); }), ErrorCode::BadRequest);
    s.select_bullet_pair("B1", "B3", 1);
    s.add_level(2, 2);
    EXPECT_EQ(code_of([&] { s.select_land_pair(0, 5, 3); }), ErrorCode::UnknownId);
    EXPECT_EQ(code_of([&] { s.select_land_pair(-1, 0, 3); }), ErrorCode::UnknownId);
    s.select_land_pair(5, 4, 3);
    EXPECT_EQ(s.audit().size(), 4u);
}

TEST(Session, BulletPairChangeClearsDownstream) {
    auto s = fresh(SessionMode::Diagnostics);
    s.select_bullet_pair("B1", "B2", 1);
    s.add_level(2, 2);
    s.select_land_pair(2, 2, 3);
    s.add_level(6, 4);
    s.set_match_frame(true, 3, 5);
    s.select_bullet_pair("B2", "B3", 6);
    EXPECT_EQ(s.active_levels(), S({1, 2}));
    EXPECT_FALSE(s.selection().land_pair.has_value());
    EXPECT_FALSE(s.match_frame().enabled);
    EXPECT_EQ(s.selected_lands(), 6);
}

TEST(Session, MatchFrame) {
    auto s = fresh(SessionMode::Guided);
    EXPECT_EQ(code_of([&] { s.set_match_frame(true, 0, 1); }), ErrorCode::LevelNotActive);
    s.select_bullet_pair("B1", "B2", 1);
    s.add_level(2, 2);
    s.set_match_frame(true, 0, 3);
    EXPECT_TRUE(s.match_frame().enabled);
    EXPECT_EQ(code_of([&] { s.set_match_frame(true, 7, 4); }), ErrorCode::BadPhase);
    EXPECT_EQ(code_of([&] { s.set_match_frame(true, 6, 4); }), ErrorCode::BadPhase);
    s.set_match_frame(true, 5, 4);
    EXPECT_EQ(s.match_frame().hypothesis_phase, 5);
    s.set_match_frame(false, 99, 5);
    EXPECT_FALSE(s.match_frame().enabled);
    EXPECT_EQ(s.match_frame().hypothesis_phase, 0);
}

TEST(Session, ConclusionGating) {
    auto s = fresh(SessionMode::Guided);
    s.select_bullet_pair("B1", "B2", 1);
    s.add_level(2, 2);
    EXPECT_EQ(code_of([&] { s.record_conclusion(AfteCategory::Identification, "x", 3); }),
              ErrorCode::PrematureConclusion);
    s.select_land_pair(0, 0, 3);
    for (int k = 3; k <= 6; ++k) s.add_level(k, 4);
    // Truncation after visiting everything does not un-visit levels.
    s.select_land_pair(1, 1, 5);
    EXPECT_EQ(s.active_levels(), S({1, 2}));
    s.record_conclusion(AfteCategory::Elimination, "different", 6);
    ASSERT_TRUE(s.conclusion().has_value());
    EXPECT_EQ(s.conclusion()->category, AfteCategory::Elimination);
    EXPECT_EQ(s.conclusion()->levels_visited_at_decision, S({1, 2, 3, 4, 5, 6}));
    EXPECT_EQ(code_of([&] { s.record_conclusion(AfteCategory::Inconclusive, "", 7); }), ErrorCode::AlreadyConcluded);
    EXPECT_EQ(code_of([&] { s.add_level(3, 7); }), ErrorCode::AlreadyConcluded);
    EXPECT_EQ(code_of([&] { s.select_bullet_pair("B1", "B3", 7); }), ErrorCode::AlreadyConcluded);
    EXPECT_EQ(code_of([&] { s.set_match_frame(false, 0, 7); }), ErrorCode::AlreadyConcluded);
    EXPECT_EQ(s.audit().size(), 10u);
}

TEST(Session, InconclusiveAnytimeAndDiagnosticsFree) {
    auto g = fresh(SessionMode::Guided);
    g.record_conclusion(AfteCategory::Unsuitable, "smeared", 1);
    EXPECT_EQ(g.conclusion()->levels_visited_at_decision, S({1}));
    auto d = fresh(SessionMode::Diagnostics);
    d.record_conclusion(AfteCategory::Identification, "training run", 1);
    EXPECT_TRUE(d.conclusion().has_value());
}

TEST(Session, TimestampsAreMonotonic) {
    auto s = fresh(SessionMode::Guided);
    s.select_bullet_pair("B1", "B2", 500);  // clock went backwards
    s.add_level(2, 2000);
    EXPECT_EQ(s.audit()[1].timestamp_ms, 1000);
    EXPECT_EQ(s.audit()[2].timestamp_ms, 2000);
}

TEST(Session, IndependentSessions) {
    auto a = fresh(SessionMode::Guided);
    auto b = fresh(SessionMode::Guided);
    a.select_bullet_pair("B1", "B2", 1);
    EXPECT_FALSE(b.selection().bullet_pair.has_value());
    EXPECT_EQ(b.audit().size(), 1u);
}

TEST(Session, ParseNames) {
    EXPECT_EQ(parse_mode("Guided"), SessionMode::Guided);
    EXPECT_EQ(parse_mode("Diagnostics"), SessionMode::Diagnostics);
    EXPECT_THROW(parse_mode("guided"), Error);
    for (auto c : {AfteCategory::Identification, AfteCategory::Elimination, AfteCategory::Inconclusive,
                   AfteCategory::Unsuitable})
        EXPECT_EQ(parse_category(to_string(c)), c);
    EXPECT_THROW(parse_category("Probable"), Error);
}

TEST(Session, ReplayRejectsBadLogs) {
    auto s = fresh(SessionMode::Guided);
    s.select_bullet_pair("B1", "B2", 1);
    auto log = s.audit();
    EXPECT_EQ(code_of([&] { ExaminerSession::replay({}); }), ErrorCode::BadRequest);
    EXPECT_EQ(code_of([&] { ExaminerSession::replay({log[1]}); }), ErrorCode::BadRequest);
    auto gap = log;
    gap[1].seq = 5;
    EXPECT_EQ(code_of([&] { ExaminerSession::replay(gap); }), ErrorCode::BadRequest);
    auto garbled = log;
    garbled[1].params = {{"oops", 1}};
    EXPECT_EQ(code_of([&] { ExaminerSession::replay(garbled); }), ErrorCode::BadRequest);
}

TEST(Session, AuditEntryJsonRoundTrip) {
    auto s = fresh(SessionMode::Diagnostics);
    s.select_bullet_pair("B2", "B3", 1);
    for (const auto& e : s.audit()) {
        const auto back = audit_entry_from_json(to_json(e));
        EXPECT_EQ(to_json(back).dump(), to_json(e).dump());
    }
}

TEST(SessionProperties, RandomSequencesFollowModel) {
    std::mt19937_64 rng(99);
    const std::vector<std::string> ids{"B1", "B2", "B3", "B4"};
    const std::vector<AfteCategory> cats{AfteCategory::Identification, AfteCategory::Elimination,
                                         AfteCategory::Inconclusive, AfteCategory::Unsuitable};
    for (int seq = 0; seq < 1000; ++seq) {
        const auto mode = seq % 2 ? SessionMode::Diagnostics : SessionMode::Guided;
        auto s = fresh(mode);
        Model m;
        m.mode = mode;
        const int steps = 5 + static_cast<int>(rng() % 40);
        for (int step = 0; step < steps; ++step) {
            const auto before = s.state_json().dump();
            const auto audit_before = s.audit().size();
            std::optional<ErrorCode> expected, got;
            const int op = static_cast<int>(rng() % 100);
            auto run = [&](auto&& f) {
                try {
                    f();
                } catch (const Error& e) {
                    got = e.code();
                }
            };
            const std::int64_t now = 1000 + step;
            if (op < 40) {
                const int k = static_cast<int>(rng() % 8);
                expected = m.add(k);
                run([&] { s.add_level(k, now); });
            } else if (op < 55) {
                const auto a = ids[rng() % 4], b = ids[rng() % 4];
                expected = m.bullets(a, b);
                run([&] { s.select_bullet_pair(a, b, now); });
            } else if (op < 75) {
                const int i = static_cast<int>(rng() % 7), j = static_cast<int>(rng() % 7);
                expected = m.land(i, j);
                run([&] { s.select_land_pair(i, j, now); });
            } else if (op < 90) {
                const bool on = rng() % 2;
                const int p = static_cast<int>(rng() % 8);
                expected = m.set_frame(on, p);
                run([&] { s.set_match_frame(on, p, now); });
            } else if (op < 94) {
                const auto c = cats[rng() % 4];
                expected = m.conclude(c);
                run([&] { s.record_conclusion(c, "r", now); });
            }
            ASSERT_EQ(got, expected) << "sequence " << seq << " step " << step;
            if (got) {
                EXPECT_EQ(s.state_json().dump(), before);
                EXPECT_EQ(s.audit().size(), audit_before);
            } else if (op < 94) {
                EXPECT_EQ(s.audit().size(), audit_before + 1);
            }
            ASSERT_EQ(s.active_levels(), m.active);
            EXPECT_EQ(s.selection().bullet_pair, m.bp);
            EXPECT_EQ(s.selection().land_pair, m.lp);
            EXPECT_EQ(s.match_frame().enabled, m.frame);

            const auto& act = s.active_levels();
            if (mode == SessionMode::Guided) {
                ASSERT_EQ(*act.begin(), 1);
                ASSERT_EQ(*act.rbegin(), static_cast<int>(act.size()));
            }
            if (act.count(2)) {
                ASSERT_TRUE(s.selection().bullet_pair.has_value());
            }
            if (*act.rbegin() >= 3) {
                ASSERT_TRUE(s.selection().land_pair.has_value());
            }
            for (std::size_t k = 0; k < s.audit().size(); ++k) ASSERT_EQ(s.audit()[k].seq, k);
        }
        const auto replayed = ExaminerSession::replay(s.audit());
        ASSERT_EQ(replayed.state_json().dump(), s.state_json().dump()) << "sequence " << seq;
    }
}
