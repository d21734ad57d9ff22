#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "chase/rng.hpp"

namespace chase {

enum class Label : int { connected = 0, not_connected = 1 };
enum class Regime : int { intermittent = 0, short_local = 1 };

const char* to_string(Label l);
const char* to_string(Regime r);
Label label_from_string(const std::string& s);
Regime regime_from_string(const std::string& s);

// Feature column order used everywhere downstream.
enum FeatureColumn : int {
    kFeatDistance = 0,
    kFeatDistanceChange = 1,
    kFeatRelativeMotion = 2,
    kFeatSupportCount = 3,
    kFeatBridgeScore = 4,
    kFeatBridgeWidth = 5,
};
inline constexpr int kFeatureDim = 6;

struct SimConfig {
    int frames = 64;
    int count = 3360;  // total sequences; must be divisible by 4
    double box = 1.0;
    double radius_min = 0.04;
    double radius_max = 0.08;
    double sigma_brownian = 0.005;  // per frame per axis
    double spring_k = 0.15;
    double rest_offset = 0.02;        // rest length = r1 + r2 + offset
    double drift_amplitude = 0.01;    // per frame during active windows
    double sigma_obs = 0.002;         // base observation noise
    double proximity_pull = 0.5;      // negatives' one-sided pull, fraction of spring_k
    double bridge_latent_noise = 0.02;
    double ambiguous_threshold = 0.75;
    double regime_mix = 0.5;  // fraction of pairs in the intermittent regime
    std::uint64_t seed = 7;
    // Optional fixed split tagging: {train, val, test} sequence counts. Empty
    // means every record is tagged "full" and splitting is left to the harness.
    std::vector<std::pair<std::string, int>> split_counts;

    void validate() const;
};

struct ActivityProfile {
    Regime regime = Regime::intermittent;
    std::vector<double> u;        // per-frame activity in [0, 1]
    std::vector<int> onsets;      // raw window descriptors, pre-smoothing
    std::vector<int> lengths;

    double duty_cycle() const;
};

struct SequenceRecord {
    int id = 0;
    int pair_id = 0;
    Label label = Label::connected;
    Regime regime = Regime::intermittent;
    double alpha = 0.0;
    bool ambiguous = false;
    std::string split = "full";
    int frames = 0;
    std::vector<double> features;  // frames x kFeatureDim, row-major

    double feat(int t, int col) const { return features[static_cast<std::size_t>(t) * kFeatureDim + col]; }
};

// Two-vesicle trajectory before feature extraction.
struct PairTrajectory {
    int frames = 0;
    std::vector<double> true_pos;      // frames x 4: x1 y1 x2 y2
    std::vector<double> observed_pos;  // frames x 4, with alpha-scaled noise
    std::vector<double> bridge;        // frames: latent visibility b(t)
    double rest_length = 0.0;
};

ActivityProfile sample_activity_profile(Regime regime, int frames, Rng rng);

// Shared context drawn once per matched pair.
struct PairContext {
    double r1 = 0.05, r2 = 0.05;
    double initial_distance = 0.1;
    double drift_phase = 0.0;
    double drift_turn_rate = 0.0;  // radians per frame, signed
};
PairContext sample_pair_context(const SimConfig& cfg, Rng rng);

PairTrajectory simulate_pair(Label label, const ActivityProfile& profile, double alpha,
                             const PairContext& ctx, const SimConfig& cfg, Rng rng);

// Feature extraction from an observed trajectory plus the latent bridge state.
std::vector<double> extract_features(const PairTrajectory& traj, double alpha, Rng rng);

struct Dataset {
    std::vector<SequenceRecord> records;
    SimConfig config;
};

Dataset generate_dataset(const SimConfig& cfg);

}  // namespace chase
