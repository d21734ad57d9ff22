#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <map>

#include "chase/dataset_io.hpp"
#include "chase/simulator.hpp"
#include "chase/tensor.hpp"
#include "sim_probe_util.hpp"

using namespace chase;

namespace {

SimConfig quiet_config() {
    SimConfig cfg;
    cfg.sigma_brownian = 0.0;
    cfg.sigma_obs = 0.0;
    cfg.drift_amplitude = 0.0;
    cfg.spring_k = 0.0;
    cfg.bridge_latent_noise = 0.0;
    return cfg;
}

ActivityProfile constant_profile(int frames, double value) {
    ActivityProfile p;
    p.regime = Regime::short_local;
    p.u.assign(static_cast<std::size_t>(frames), value);
    p.onsets = {0};
    p.lengths = {frames};
    return p;
}

}  // namespace

TEST_CASE("activity profiles satisfy their window invariants") {
    int short_ok = 0, inter_ok = 0;
    for (int i = 0; i < 1000; ++i) {
        Rng rng(1000 + static_cast<std::uint64_t>(i));
        auto sl = sample_activity_profile(Regime::short_local, 64, rng.stream("sl"));
        REQUIRE(sl.onsets.size() == 1);
        CHECK(sl.lengths[0] >= 8);
        CHECK(sl.lengths[0] <= 16);
        ++short_ok;

        auto in = sample_activity_profile(Regime::intermittent, 64, rng.stream("in"));
        REQUIRE(in.onsets.size() >= 2);
        REQUIRE(in.onsets.size() <= 4);
        double duty = in.duty_cycle();
        CHECK(duty >= 0.3);
        CHECK(duty <= 0.6);
        // windows must be disjoint and in order
        for (std::size_t w = 1; w < in.onsets.size(); ++w)
            CHECK(in.onsets[w] >= in.onsets[w - 1] + in.lengths[w - 1] + 2);
        ++inter_ok;

        for (double u : sl.u) {
            CHECK(u >= 0.0);
            CHECK(u <= 1.0);
        }
        for (double u : in.u) {
            CHECK(u >= 0.0);
            CHECK(u <= 1.0);
        }
    }
    CHECK(short_ok == 1000);
    CHECK(inter_ok == 1000);
}

TEST_CASE("stationary pair with all forces off") {
    SimConfig cfg = quiet_config();
    Rng rng(5);
    auto ctx = sample_pair_context(cfg, rng.stream("ctx"));
    auto profile = constant_profile(cfg.frames, 0.0);
    auto traj = simulate_pair(Label::connected, profile, 0.0, ctx, cfg, rng.stream("sim"));
    auto feats = extract_features(traj, 0.0, rng.stream("feat"));

    double d0 = feats[kFeatDistance];
    CHECK(d0 == doctest::Approx(ctx.initial_distance).epsilon(1e-12));
    for (int t = 0; t < cfg.frames; ++t) {
        CHECK(feats[static_cast<std::size_t>(t) * kFeatureDim + kFeatDistance] ==
              doctest::Approx(d0).epsilon(1e-12));
        CHECK(feats[static_cast<std::size_t>(t) * kFeatureDim + kFeatDistanceChange] ==
              doctest::Approx(0.0).epsilon(1e-12));
        // both velocities are zero -> relative motion defined as 0
        CHECK(feats[static_cast<std::size_t>(t) * kFeatureDim + kFeatRelativeMotion] == 0.0);
    }
}

TEST_CASE("pure spring relaxation approaches rest length monotonically") {
    SimConfig cfg = quiet_config();
    cfg.spring_k = 0.15;
    Rng rng(6);
    PairContext ctx = sample_pair_context(cfg, rng.stream("ctx"));
    ctx.initial_distance = ctx.r1 + ctx.r2 + cfg.rest_offset + 0.4;  // far beyond rest
    auto profile = constant_profile(cfg.frames, 1.0);
    auto traj = simulate_pair(Label::connected, profile, 0.0, ctx, cfg, rng.stream("sim"));
    auto feats = extract_features(traj, 0.0, rng.stream("feat"));

    double rest = traj.rest_length;
    double prev = feats[kFeatDistance];
    for (int t = 1; t < cfg.frames; ++t) {
        double d = feats[static_cast<std::size_t>(t) * kFeatureDim + kFeatDistance];
        CHECK(d <= prev + 1e-12);
        CHECK(d >= rest - 1e-9);
        prev = d;
    }
    CHECK(prev - rest < 0.02);  // essentially relaxed after 64 frames
}

TEST_CASE("matched pairs share activity timing and ambiguity") {
    SimConfig cfg;
    cfg.count = 480;
    cfg.seed = 11;
    Dataset ds = generate_dataset(cfg);
    REQUIRE(ds.records.size() == 480);
    for (int p = 0; p < 240; ++p) {
        const auto& a = ds.records[static_cast<std::size_t>(2 * p)];
        const auto& b = ds.records[static_cast<std::size_t>(2 * p) + 1];
        CHECK(a.pair_id == p);
        CHECK(b.pair_id == p);
        CHECK(a.label == Label::connected);
        CHECK(b.label == Label::not_connected);
        CHECK(a.alpha == b.alpha);
        CHECK(a.regime == b.regime);
    }
}

TEST_CASE("dataset layout: balance, strata, ambiguity flag") {
    SimConfig cfg;
    cfg.count = 480;
    cfg.seed = 12;
    Dataset ds = generate_dataset(cfg);

    int connected = 0, flagged = 0;
    std::map<std::pair<int, int>, int> cells;
    for (const auto& r : ds.records) {
        if (r.label == Label::connected) ++connected;
        if (r.ambiguous) ++flagged;
        CHECK(r.ambiguous == (r.alpha >= 0.75));
        CHECK(r.alpha >= 0.0);
        CHECK(r.alpha <= 1.0);
        ++cells[{static_cast<int>(r.label), static_cast<int>(r.regime)}];
        for (double v : r.features) CHECK(std::isfinite(v));
    }
    CHECK(connected == 240);
    CHECK(flagged == 120);  // one of four equal strata
    for (const auto& [cell, count] : cells) CHECK(count == 120);
}

TEST_CASE("generation is deterministic and serializes byte-identically") {
    SimConfig cfg;
    cfg.count = 64;
    cfg.seed = 99;
    Dataset a = generate_dataset(cfg);
    Dataset b = generate_dataset(cfg);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i)
        CHECK(a.records[i].features == b.records[i].features);

    std::string p1 = "/tmp/chase_test_ds1.jsonl";
    std::string p2 = "/tmp/chase_test_ds2.jsonl";
    write_dataset_jsonl(a, p1);
    write_dataset_jsonl(b, p2);
    CHECK(read_text_file(p1) == read_text_file(p2));
    CHECK(file_content_hash(p1) == file_content_hash(p2));

    Dataset rt = read_dataset_jsonl(p1);
    REQUIRE(rt.records.size() == a.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(rt.records[i].features == a.records[i].features);
        CHECK(rt.records[i].alpha == a.records[i].alpha);
        CHECK(rt.records[i].label == a.records[i].label);
    }
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("invalid generation configs are rejected") {
    SimConfig cfg;
    cfg.count = 30;  // not divisible by 4
    CHECK_THROWS_AS(generate_dataset(cfg), ConfigError);
    SimConfig cfg2;
    cfg2.count = 32;
    cfg2.split_counts = {{"train", 20}, {"test", 8}};  // sums to 28 != 32
    CHECK_THROWS_AS(generate_dataset(cfg2), ConfigError);
}

TEST_CASE("fixed split tagging keeps pairs together and honors counts") {
    SimConfig cfg;
    cfg.count = 80;
    cfg.split_counts = {{"train", 48}, {"val", 16}, {"test", 16}};
    Dataset ds = generate_dataset(cfg);
    std::map<std::string, int> counts;
    for (const auto& r : ds.records) ++counts[r.split];
    CHECK(counts["train"] == 48);
    CHECK(counts["val"] == 16);
    CHECK(counts["test"] == 16);
    for (int p = 0; p < 40; ++p)
        CHECK(ds.records[static_cast<std::size_t>(2 * p)].split ==
              ds.records[static_cast<std::size_t>(2 * p) + 1].split);
}

TEST_CASE("bridge evidence separates labels on clean sequences") {
    SimConfig cfg;
    Rng master(31);
    double fp_mean = 0.0, tp_mean = 0.0;
    const int n = 100;
    for (int i = 0; i < n; ++i) {
        Rng r = master.stream("mc").stream(static_cast<std::uint64_t>(i));
        auto ctx = sample_pair_context(cfg, r.stream("ctx"));
        // negatives at alpha = 0 must show essentially no bridge
        auto profile = sample_activity_profile(i % 2 ? Regime::intermittent : Regime::short_local,
                                               cfg.frames, r.stream("prof"));
        auto traj = simulate_pair(Label::not_connected, profile, 0.0, ctx, cfg, r.stream("neg"));
        auto feats = extract_features(traj, 0.0, r.stream("negf"));
        double m = 0.0;
        for (int t = 0; t < cfg.frames; ++t)
            m += feats[static_cast<std::size_t>(t) * kFeatureDim + kFeatBridgeScore];
        fp_mean += m / cfg.frames;

        // connected with u == 1 at alpha = 0 shows a strong bridge
        auto full = constant_profile(cfg.frames, 1.0);
        auto traj2 = simulate_pair(Label::connected, full, 0.0, ctx, cfg, r.stream("pos"));
        auto feats2 = extract_features(traj2, 0.0, r.stream("posf"));
        double m2 = 0.0;
        for (int t = 0; t < cfg.frames; ++t)
            m2 += feats2[static_cast<std::size_t>(t) * kFeatureDim + kFeatBridgeScore];
        tp_mean += m2 / cfg.frames;
    }
    CHECK(fp_mean / n < 0.05);
    CHECK(tp_mean / n > 0.7);
}

TEST_CASE("separability degrades with ambiguity") {
    SimConfig cfg;
    auto clean = chase_test::stratum_feature_means(cfg, 0.0, 0.25, 250, 41);
    auto vh = chase_test::stratum_feature_means(cfg, 0.75, 1.0, 250, 42);
    double clean_acc = chase_test::logistic_probe_accuracy(std::move(clean));
    double vh_acc = chase_test::logistic_probe_accuracy(std::move(vh));
    MESSAGE("probe accuracy clean=" << clean_acc << " vh=" << vh_acc);
    CHECK(clean_acc >= 0.9);
    CHECK(vh_acc <= 0.75);
}
