#include "chase/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "chase/tensor.hpp"

namespace chase {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

// Splits total into `parts` sizes, each >= minimum, via sorted uniform cuts.
std::vector<int> partition_with_min(int total, int parts, int minimum, Rng& rng) {
    int extra = total - parts * minimum;
    std::vector<int> cuts(static_cast<std::size_t>(parts) - 1);
    for (auto& c : cuts) c = static_cast<int>(rng.below(static_cast<std::uint64_t>(extra) + 1));
    std::sort(cuts.begin(), cuts.end());
    std::vector<int> sizes(static_cast<std::size_t>(parts));
    int prev = 0;
    for (int i = 0; i < parts - 1; ++i) {
        sizes[static_cast<std::size_t>(i)] = minimum + cuts[static_cast<std::size_t>(i)] - prev;
        prev = cuts[static_cast<std::size_t>(i)];
    }
    sizes[static_cast<std::size_t>(parts) - 1] = minimum + extra - prev;
    return sizes;
}

void reflect_into(double& x, double lo, double hi) {
    for (int guard = 0; guard < 64 && (x < lo || x > hi); ++guard) {
        if (x < lo) x = 2.0 * lo - x;
        if (x > hi) x = 2.0 * hi - x;
    }
    x = std::clamp(x, lo, hi);
}

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

const char* to_string(Label l) { return l == Label::connected ? "connected" : "not_connected"; }
const char* to_string(Regime r) { return r == Regime::intermittent ? "intermittent" : "short_local"; }

Label label_from_string(const std::string& s) {
    if (s == "connected") return Label::connected;
    if (s == "not_connected") return Label::not_connected;
    throw ConfigError("unknown label: " + s);
}

Regime regime_from_string(const std::string& s) {
    if (s == "intermittent") return Regime::intermittent;
    if (s == "short_local") return Regime::short_local;
    throw ConfigError("unknown regime: " + s);
}

void SimConfig::validate() const {
    if (frames < 2) throw ConfigError("frames must be >= 2");
    if (count < 4 || count % 4 != 0)
        throw ConfigError("count must be positive and divisible by 4 (2 labels x 2 regimes)");
    if (sigma_brownian < 0 || sigma_obs < 0 || bridge_latent_noise < 0)
        throw ConfigError("noise scales must be >= 0");
    if (regime_mix < 0.0 || regime_mix > 1.0) throw ConfigError("regime_mix must be in [0,1]");
    if (!split_counts.empty()) {
        int total = 0;
        for (const auto& [name, c] : split_counts) {
            if (c < 0 || c % 2 != 0)
                throw ConfigError("split count for '" + name + "' must be even (pairs stay together)");
            total += c;
        }
        if (total != count) throw ConfigError("split counts must sum to count");
    }
}

double ActivityProfile::duty_cycle() const {
    int active = 0;
    for (int l : lengths) active += l;
    return u.empty() ? 0.0 : static_cast<double>(active) / static_cast<double>(u.size());
}

ActivityProfile sample_activity_profile(Regime regime, int frames, Rng rng) {
    ActivityProfile p;
    p.regime = regime;
    std::vector<int> raw(static_cast<std::size_t>(frames), 0);

    if (regime == Regime::short_local) {
        int len = static_cast<int>(rng.uniform_int(8, std::min(16, frames)));
        int onset = static_cast<int>(rng.uniform_int(0, frames - len));
        p.onsets = {onset};
        p.lengths = {len};
    } else {
        int nw = static_cast<int>(rng.uniform_int(2, 4));
        double duty = rng.uniform(0.35, 0.55);
        int active = std::max(4 * nw, static_cast<int>(std::lround(duty * frames)));
        Rng lens_rng = rng.stream("lengths");
        Rng gaps_rng = rng.stream("gaps");
        std::vector<int> lens = partition_with_min(active, nw, 4, lens_rng);
        // nw+1 gap slots; inner gaps >= 2 keep windows distinct.
        int free = frames - active - 2 * (nw - 1);
        std::vector<int> gaps = partition_with_min(free, nw + 1, 0, gaps_rng);
        for (int i = 1; i < nw; ++i) gaps[static_cast<std::size_t>(i)] += 2;
        int cursor = 0;
        for (int w = 0; w < nw; ++w) {
            cursor += gaps[static_cast<std::size_t>(w)];
            p.onsets.push_back(cursor);
            p.lengths.push_back(lens[static_cast<std::size_t>(w)]);
            cursor += lens[static_cast<std::size_t>(w)];
        }
    }

    for (std::size_t w = 0; w < p.onsets.size(); ++w)
        for (int t = p.onsets[w]; t < p.onsets[w] + p.lengths[w]; ++t)
            raw[static_cast<std::size_t>(t)] = 1;

    // 3-frame centered moving average smooths the transitions.
    p.u.resize(static_cast<std::size_t>(frames));
    for (int t = 0; t < frames; ++t) {
        double a = t > 0 ? raw[static_cast<std::size_t>(t) - 1] : 0.0;
        double b = raw[static_cast<std::size_t>(t)];
        double c = t + 1 < frames ? raw[static_cast<std::size_t>(t) + 1] : 0.0;
        p.u[static_cast<std::size_t>(t)] = (a + b + c) / 3.0;
    }
    return p;
}

PairContext sample_pair_context(const SimConfig& cfg, Rng rng) {
    PairContext ctx;
    ctx.r1 = rng.uniform(cfg.radius_min, cfg.radius_max);
    ctx.r2 = rng.uniform(cfg.radius_min, cfg.radius_max);
    double rest = ctx.r1 + ctx.r2 + cfg.rest_offset;
    ctx.initial_distance = rest + rng.uniform(0.02, 0.12);
    ctx.drift_phase = rng.uniform(0.0, kTwoPi);
    ctx.drift_turn_rate = (rng.uniform01() < 0.5 ? 1.0 : -1.0) * kTwoPi / 256.0;
    return ctx;
}

PairTrajectory simulate_pair(Label label, const ActivityProfile& profile, double alpha,
                             const PairContext& ctx, const SimConfig& cfg, Rng rng) {
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha must lie in [0,1]");
    const int T = cfg.frames;
    const double rest = ctx.r1 + ctx.r2 + cfg.rest_offset;

    PairTrajectory traj;
    traj.frames = T;
    traj.rest_length = rest;
    traj.true_pos.resize(static_cast<std::size_t>(T) * 4);
    traj.observed_pos.resize(static_cast<std::size_t>(T) * 4);
    traj.bridge.resize(static_cast<std::size_t>(T));

    Rng place = rng.stream("place");
    Rng motion = rng.stream("motion");
    Rng obs = rng.stream("obs");
    Rng bridge = rng.stream("bridge");

    // Pair centre placed away from the walls, random orientation.
    double margin = std::max(ctx.r1, ctx.r2) + ctx.initial_distance / 2.0 + 0.05;
    margin = std::min(margin, cfg.box * 0.45);
    double cx = place.uniform(margin, cfg.box - margin);
    double cy = place.uniform(margin, cfg.box - margin);
    double theta = place.uniform(0.0, kTwoPi);
    double ux = std::cos(theta), uy = std::sin(theta);
    double p1x = cx - 0.5 * ctx.initial_distance * ux;
    double p1y = cy - 0.5 * ctx.initial_distance * uy;
    double p2x = cx + 0.5 * ctx.initial_distance * ux;
    double p2y = cy + 0.5 * ctx.initial_distance * uy;

    auto store = [&](int t) {
        traj.true_pos[static_cast<std::size_t>(t) * 4 + 0] = p1x;
        traj.true_pos[static_cast<std::size_t>(t) * 4 + 1] = p1y;
        traj.true_pos[static_cast<std::size_t>(t) * 4 + 2] = p2x;
        traj.true_pos[static_cast<std::size_t>(t) * 4 + 3] = p2y;
    };
    store(0);

    for (int t = 1; t < T; ++t) {
        double u = profile.u[static_cast<std::size_t>(t)];
        p1x += cfg.sigma_brownian * motion.normal();
        p1y += cfg.sigma_brownian * motion.normal();
        p2x += cfg.sigma_brownian * motion.normal();
        p2y += cfg.sigma_brownian * motion.normal();
        // Ambient drift moves both members identically during active windows,
        // so it cancels in relative coordinates for either label.
        double phi = ctx.drift_phase + ctx.drift_turn_rate * t;
        double dx = cfg.drift_amplitude * u * std::cos(phi);
        double dy = cfg.drift_amplitude * u * std::sin(phi);
        p1x += dx;
        p1y += dy;
        p2x += dx;
        p2y += dy;
        // Label-specific coupling along the joining axis: a two-sided spring
        // for connected pairs, a weaker one-sided pull for matched negatives.
        double ex = p2x - p1x, ey = p2y - p1y;
        double d = std::sqrt(ex * ex + ey * ey);
        if (d > 1e-9) {
            ex /= d;
            ey /= d;
            double step = 0.0;
            if (label == Label::connected) {
                step = 0.5 * cfg.spring_k * u * (d - rest);
            } else if (d > rest) {
                step = 0.5 * cfg.proximity_pull * cfg.spring_k * u * (d - rest);
            }
            p1x += step * ex;
            p1y += step * ey;
            p2x -= step * ex;
            p2y -= step * ey;
            // Hard-core exclusion: vesicles cannot interpenetrate.
            double contact = ctx.r1 + ctx.r2;
            double dn = std::hypot(p2x - p1x, p2y - p1y);
            if (dn < contact && dn > 1e-9) {
                double push = 0.5 * (contact - dn);
                double nx = (p2x - p1x) / dn, ny = (p2y - p1y) / dn;
                p1x -= push * nx;
                p1y -= push * ny;
                p2x += push * nx;
                p2y += push * ny;
            }
        }
        reflect_into(p1x, ctx.r1, cfg.box - ctx.r1);
        reflect_into(p1y, ctx.r1, cfg.box - ctx.r1);
        reflect_into(p2x, ctx.r2, cfg.box - ctx.r2);
        reflect_into(p2y, ctx.r2, cfg.box - ctx.r2);
        store(t);
    }

    // Observation noise scales with ambiguity and lands on positions before
    // any feature is computed.
    double sigma = cfg.sigma_obs * (1.0 + 2.0 * alpha);
    for (int t = 0; t < T; ++t)
        for (int c = 0; c < 4; ++c)
            traj.observed_pos[static_cast<std::size_t>(t) * 4 + c] =
                traj.true_pos[static_cast<std::size_t>(t) * 4 + c] +
                (sigma > 0.0 ? sigma * obs.normal() : 0.0);

    // Latent bridge visibility from the true geometry. Negatives show a
    // false-positive bridge that grows with ambiguity and proximity.
    for (int t = 0; t < T; ++t) {
        double u = profile.u[static_cast<std::size_t>(t)];
        if (label == Label::connected) {
            traj.bridge[static_cast<std::size_t>(t)] =
                clip01(u * (1.0 - 0.9 * alpha) + cfg.bridge_latent_noise * bridge.normal());
        } else {
            double x1 = traj.true_pos[static_cast<std::size_t>(t) * 4 + 0];
            double y1 = traj.true_pos[static_cast<std::size_t>(t) * 4 + 1];
            double x2 = traj.true_pos[static_cast<std::size_t>(t) * 4 + 2];
            double y2 = traj.true_pos[static_cast<std::size_t>(t) * 4 + 3];
            double d = std::hypot(x2 - x1, y2 - y1);
            // Temporary proximity exists only inside the distractor windows,
            // so the misleading evidence shares the true bridge's timing.
            double prox = d < 1.5 * rest ? u * clip01((1.5 * rest - d) / (0.5 * rest)) : 0.0;
            traj.bridge[static_cast<std::size_t>(t)] = 0.5 * alpha * prox;
        }
    }
    return traj;
}

std::vector<double> extract_features(const PairTrajectory& traj, double alpha, Rng rng) {
    const int T = traj.frames;
    std::vector<double> f(static_cast<std::size_t>(T) * kFeatureDim, 0.0);
    Rng noise = rng.stream("feature_noise");

    double prev_d = 0.0;
    for (int t = 0; t < T; ++t) {
        const double* q = traj.observed_pos.data() + static_cast<std::size_t>(t) * 4;
        double d = std::hypot(q[2] - q[0], q[3] - q[1]);
        double* row = f.data() + static_cast<std::size_t>(t) * kFeatureDim;
        row[kFeatDistance] = d;
        row[kFeatDistanceChange] = t == 0 ? 0.0 : d - prev_d;
        prev_d = d;

        if (t == 0) {
            row[kFeatRelativeMotion] = 0.0;
        } else {
            const double* qp = traj.observed_pos.data() + (static_cast<std::size_t>(t) - 1) * 4;
            double v1x = q[0] - qp[0], v1y = q[1] - qp[1];
            double v2x = q[2] - qp[2], v2y = q[3] - qp[3];
            double n1 = std::hypot(v1x, v1y), n2 = std::hypot(v2x, v2y);
            row[kFeatRelativeMotion] =
                (n1 < 1e-12 || n2 < 1e-12) ? 0.0 : (v1x * v2x + v1y * v2y) / (n1 * n2);
        }

        double b = traj.bridge[static_cast<std::size_t>(t)];
        double support = static_cast<double>(std::lround(40.0 * b)) +
                         static_cast<double>(noise.uniform_int(-2, 2));
        row[kFeatSupportCount] = std::max(0.0, support);
        row[kFeatBridgeScore] = clip01(b + (0.05 + 0.2 * alpha) * noise.normal());
        row[kFeatBridgeWidth] = clip01(0.5 * b + (0.05 + 0.1 * alpha) * noise.normal());
    }
    return f;
}

Dataset generate_dataset(const SimConfig& cfg) {
    cfg.validate();
    const int n_pairs = cfg.count / 2;
    const int n_intermittent = static_cast<int>(std::lround(cfg.regime_mix * n_pairs));

    Rng master(cfg.seed);

    // Optional fixed split tagging; both members of a pair share the tag.
    std::vector<std::string> pair_split(static_cast<std::size_t>(n_pairs), "full");
    if (!cfg.split_counts.empty()) {
        std::vector<std::uint32_t> order(static_cast<std::size_t>(n_pairs));
        for (int i = 0; i < n_pairs; ++i)
            order[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i);
        Rng layout = master.stream("layout");
        layout.shuffle(order);
        std::size_t cursor = 0;
        for (const auto& [name, c] : cfg.split_counts)
            for (int k = 0; k < c / 2; ++k) pair_split[order[cursor++]] = name;
    }

    Dataset ds;
    ds.config = cfg;
    ds.records.resize(static_cast<std::size_t>(cfg.count));

    for (int p = 0; p < n_pairs; ++p) {
        Regime regime = p < n_intermittent ? Regime::intermittent : Regime::short_local;
        int index_in_block = p < n_intermittent ? p : p - n_intermittent;
        int bin = index_in_block % 4;

        // Every pair draws from its own derived stream, so generation order
        // (or a parallel schedule) cannot change the dataset.
        Rng pair_rng = master.stream("pair").stream(static_cast<std::uint64_t>(p));
        double alpha = pair_rng.stream("alpha").uniform(0.25 * bin, 0.25 * (bin + 1));
        ActivityProfile profile =
            sample_activity_profile(regime, cfg.frames, pair_rng.stream("profile"));
        PairContext ctx = sample_pair_context(cfg, pair_rng.stream("context"));

        for (int side = 0; side < 2; ++side) {
            Label label = side == 0 ? Label::connected : Label::not_connected;
            Rng rec_rng = pair_rng.stream(side == 0 ? "connected" : "negative");
            PairTrajectory traj = simulate_pair(label, profile, alpha, ctx, cfg, rec_rng);
            SequenceRecord rec;
            rec.id = 2 * p + side;
            rec.pair_id = p;
            rec.label = label;
            rec.regime = regime;
            rec.alpha = alpha;
            rec.ambiguous = alpha >= cfg.ambiguous_threshold;
            rec.split = pair_split[static_cast<std::size_t>(p)];
            rec.frames = cfg.frames;
            rec.features = extract_features(traj, alpha, rec_rng);
            ds.records[static_cast<std::size_t>(rec.id)] = std::move(rec);
        }
    }
    return ds;
}

}  // namespace chase
