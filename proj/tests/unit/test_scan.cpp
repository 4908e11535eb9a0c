#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "leamatch/digest.hpp"
#include "leamatch/scan.hpp"
#include "leamatch/scan_store.hpp"
#include "leamatch/synth.hpp"
#include "support.hpp"

using namespace leamatch;
using leamatch::testing::plain_scan;
using leamatch::testing::TempDir;

namespace {

std::string raw_stream(const std::string& header, std::size_t n_floats, float fill = 1.0f) {
    std::string out = "LEASCAN1";
    const auto h = static_cast<std::uint32_t>(header.size());
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((h >> (8 * k)) & 0xFF));
    out += header;
    for (std::size_t i = 0; i < n_floats; ++i) {
        char b[4];
        std::memcpy(b, &fill, 4);
        out.append(b, 4);
    }
    return out;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorCode::Io;
}

}  // namespace

TEST(Fnv1a, KnownVectors) {
    EXPECT_EQ(fnv1a(std::string_view("")), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a(std::string_view("a")), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a(std::string_view("foobar")), 0x85944171f73967e8ULL);
    EXPECT_EQ(digest_hex(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
}

TEST(LoadScan, WellFormedRoundTrip500x300) {
    auto s = plain_scan(500, 300);
    std::stringstream buf;
    save_scan(s, buf);
    const auto back = load_scan(buf);
    EXPECT_EQ(back.rows(), 500);
    EXPECT_EQ(back.cols(), 300);
    EXPECT_EQ(back.mask.count(), 0);
    EXPECT_TRUE(bit_equal(s, back));
}

TEST(LoadScan, DeclaredSizeMismatch) {
    const auto bytes = raw_stream(R"({"bullet_id":"B","cols":10,"land_id":"L","rows":10,"x_res_um":1,"y_res_um":1})", 50);
    EXPECT_EQ(code_of([&] { decode_scan(bytes); }), ErrorCode::DimensionMismatch);
}

TEST(LoadScan, RejectsBadInputs) {
    EXPECT_EQ(code_of([] { decode_scan("LEASCAN2xxxxxxxx"); }), ErrorCode::BadMagic);
    EXPECT_EQ(code_of([] { decode_scan(raw_stream("{not json", 0)); }), ErrorCode::CorruptHeader);
    EXPECT_EQ(code_of([] { decode_scan(raw_stream(R"({"bullet_id":"B","rows":32})", 0)); }), ErrorCode::CorruptHeader);
    const std::string small = R"({"bullet_id":"B","cols":16,"land_id":"L","rows":16,"x_res_um":1,"y_res_um":1})";
    EXPECT_EQ(code_of([&] { decode_scan(raw_stream(small, 256)); }), ErrorCode::TooSmall);
    const std::string res = R"({"bullet_id":"B","cols":32,"land_id":"L","rows":32,"x_res_um":0,"y_res_um":1})";
    EXPECT_EQ(code_of([&] { decode_scan(raw_stream(res, 1024)); }), ErrorCode::BadResolution);
    const std::string ok = R"({"bullet_id":"B","cols":32,"land_id":"L","rows":32,"x_res_um":1,"y_res_um":1})";
    EXPECT_EQ(code_of([&] { decode_scan(raw_stream(ok, 1024, std::numeric_limits<float>::quiet_NaN())); }),
              ErrorCode::TooSparse);
    EXPECT_EQ(code_of([&] { decode_scan(raw_stream(ok, 1024, std::numeric_limits<float>::infinity())); }),
              ErrorCode::NonFiniteUnmasked);
    auto trailing = raw_stream(ok, 1024);
    trailing.push_back('\0');
    EXPECT_EQ(code_of([&] { decode_scan(trailing); }), ErrorCode::DimensionMismatch);
}

TEST(LoadScan, BreakOffMaskFractionIsReported) {
    SynthConfig cfg;
    const auto barrel = make_barrel(3, 6, cfg, "BR");
    FiringSpec spec;
    spec.damage = Damage{DamageType::BreakOff, 0.12, {0}};
    const auto b = fire_bullet(barrel, spec, 9, cfg, "B");
    const auto& scan = *b.bullet.lands[0];
    std::stringstream buf;
    save_scan(scan, buf);
    const auto back = load_scan(buf);
    const double counted = static_cast<double>(back.mask.count()) / static_cast<double>(back.mask.size());
    EXPECT_DOUBLE_EQ(back.masked_fraction(), counted);
    EXPECT_NEAR(counted, 0.12, 0.03);
    // The chip sits at the base: the lowest row is the most damaged.
    EXPECT_GT(back.mask.row(0).count(), back.mask.row(back.rows() - 1).count());
}

TEST(SaveScan, DigestStableAndSensitive) {
    auto s = plain_scan(40, 50);
    std::stringstream a, b;
    const auto d1 = save_scan(s, a);
    const auto d2 = save_scan(s, b);
    EXPECT_EQ(d1, d2);
    EXPECT_EQ(d1, scan_digest(s));
    EXPECT_EQ(d1, fnv1a(a.str().substr(8 + 4)));  // header json + payload

    auto masked = s;
    masked.mask(7, 9) = true;
    masked.canonicalize();
    EXPECT_NE(scan_digest(masked), d1);

    auto bumped = s;
    bumped.heights(3, 4) = std::nextafter(bumped.heights(3, 4), 100.0f);
    EXPECT_NE(scan_digest(bumped), d1);
}

TEST(SaveScan, RandomRoundTripProperty) {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        const int rows = 32 + static_cast<int>(rng() % 40);
        const int cols = 32 + static_cast<int>(rng() % 40);
        auto s = plain_scan(rows, cols, "B" + std::to_string(trial), "L" + std::to_string(trial % 6));
        if (trial % 2) s.barrel_id = "BR" + std::to_string(trial);
        std::normal_distribution<float> g(0, 3);
        std::bernoulli_distribution m(0.2);
        for (Eigen::Index i = 0; i < s.heights.size(); ++i) {
            s.heights.data()[i] = g(rng);
            s.mask.data()[i] = m(rng);
        }
        s.canonicalize();
        const auto back = decode_scan(encode_scan(s));
        ASSERT_TRUE(bit_equal(s, back)) << "trial " << trial;
        EXPECT_EQ(back.barrel_id, s.barrel_id);
        EXPECT_EQ(scan_digest(back), scan_digest(s));
        EXPECT_EQ(encode_scan(back), encode_scan(s));
    }
}

TEST(ValidateScan, Examples) {
    auto s = plain_scan(40, 40);
    EXPECT_TRUE(validate_scan(s).ok());

    auto bad = s;
    bad.heights(5, 6) = std::numeric_limits<float>::infinity();
    const auto r1 = validate_scan(bad);
    ASSERT_EQ(r1.violations.size(), 1u);
    EXPECT_EQ(r1.violations[0].code, ErrorCode::NonFiniteUnmasked);
    EXPECT_EQ(r1.violations[0].row, 5);
    EXPECT_EQ(r1.violations[0].col, 6);

    auto sparse = s;
    for (Eigen::Index i = 0; i < sparse.mask.size() * 95 / 100; ++i) sparse.mask.data()[i] = true;
    const auto r2 = validate_scan(sparse);
    ASSERT_FALSE(r2.ok());
    EXPECT_TRUE(std::any_of(r2.violations.begin(), r2.violations.end(),
                            [](const Violation& v) { return v.code == ErrorCode::TooSparse; }));
    // Never mutates its input.
    EXPECT_TRUE(std::isinf(bad.heights(5, 6)));
}

TEST(ValidateScan, MaskedNonFiniteIsFine) {
    auto s = plain_scan(40, 40);
    s.heights(1, 1) = std::numeric_limits<float>::infinity();
    s.mask(1, 1) = true;
    EXPECT_TRUE(validate_scan(s).ok());
}

TEST(MakeBullet, RejectsDuplicatesAndForeignLands) {
    auto a = std::make_shared<SurfaceScan>(plain_scan(32, 32, "B", "L1"));
    auto b = std::make_shared<SurfaceScan>(plain_scan(32, 32, "B", "L1"));
    auto c = std::make_shared<SurfaceScan>(plain_scan(32, 32, "X", "L2"));
    EXPECT_EQ(code_of([&] { make_bullet("B", {a, b}); }), ErrorCode::InvalidBullet);
    EXPECT_EQ(code_of([&] { make_bullet("B", {a, c}); }), ErrorCode::InvalidBullet);
    auto d = std::make_shared<SurfaceScan>(plain_scan(32, 32, "B", "L2"));
    EXPECT_EQ(make_bullet("B", {a, d}).n_lands(), 2);
}

TEST(ScanStore, PutGetAndReopen) {
    TempDir dir("store");
    std::vector<SurfaceScan> scans;
    {
        ScanStore store(dir.path());
        for (int b = 0; b < 2; ++b)
            for (int l = 3; l >= 1; --l) {
                scans.push_back(plain_scan(36, 40, "B" + std::to_string(b), "L" + std::to_string(l)));
                scans.back().heights(0, 0) = static_cast<float>(b * 10 + l);
                store.put(scans.back());
            }
        for (const auto& s : scans) EXPECT_TRUE(bit_equal(store.get(s.bullet_id, s.land_id), s));
        EXPECT_EQ(store.size(), 6u);
    }
    ScanStore reopened(dir.path());
    EXPECT_EQ(reopened.bullet_ids(), (std::vector<std::string>{"B0", "B1"}));
    const auto bullet = reopened.bullet("B1");
    ASSERT_EQ(bullet.n_lands(), 3);
    EXPECT_EQ(bullet.lands[0]->land_id, "L1");
    EXPECT_EQ(bullet.lands[2]->land_id, "L3");
    EXPECT_EQ(code_of([&] { reopened.get("B9", "L1"); }), ErrorCode::UnknownId);
}

TEST(ScanStore, PutReplacesSameKey) {
    TempDir dir("store_replace");
    ScanStore store(dir.path());
    auto s = plain_scan(36, 40);
    store.put(s);
    s.heights(2, 2) = 42.0f;
    store.put(s);
    EXPECT_EQ(store.size(), 1u);
    EXPECT_FLOAT_EQ(store.get("B1", "L1").heights(2, 2), 42.0f);
}

TEST(ScanStore, DetectsCorruptionOnOpen) {
    TempDir dir("store_corrupt");
    std::string file;
    {
        ScanStore store(dir.path());
        store.put(plain_scan(36, 40));
        file = store.index().begin()->second.file;
    }
    {
        std::fstream f(dir.path() / file, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-2, std::ios::end);
        f.put('\x7f');
    }
    EXPECT_EQ(code_of([&] { ScanStore reopened(dir.path()); }), ErrorCode::StoreCorrupt);
}

TEST(ScanStore, RejectsInvalidScan) {
    TempDir dir("store_invalid");
    ScanStore store(dir.path());
    auto s = plain_scan(36, 40);
    s.heights(1, 1) = std::numeric_limits<float>::quiet_NaN();
    EXPECT_EQ(code_of([&] { store.put(s); }), ErrorCode::NonFiniteUnmasked);
    EXPECT_EQ(store.size(), 0u);
}
