#include "detmac/radio.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace detmac {

std::optional<double> RadioEnvironment::power(NodeId tx, NodeId rx) const
{
    if (tx == rx)
        return std::nullopt;
    if (auto it = matrix_.find({tx, rx}); it != matrix_.end())
        return it->second;
    return default_power_dbm;
}

void apply_log_distance(RadioEnvironment& env,
                        const std::map<NodeId, std::pair<double, double>>& positions,
                        double p0_dbm, double exponent, std::optional<double> floor_dbm)
{
    for (const auto& [tx, ptx] : positions) {
        for (const auto& [rx, prx] : positions) {
            if (tx == rx)
                continue;
            double d = std::max(1.0, std::hypot(ptx.first - prx.first, ptx.second - prx.second));
            double p = p0_dbm - 10.0 * exponent * std::log10(d);
            if (floor_dbm && p < *floor_dbm)
                continue;
            env.set_power(tx, rx, p);
        }
    }
}

Resolution resolve_slot(std::span<const Reception> receptions, const RadioEnvironment& env,
                        Rng* rng)
{
    Resolution out;
    if (receptions.empty())
        return out;

    std::size_t best = 0;
    for (std::size_t i = 1; i < receptions.size(); ++i) {
        const auto& r = receptions[i];
        const auto& b = receptions[best];
        if (r.power_dbm > b.power_dbm || (r.power_dbm == b.power_dbm && r.start < b.start))
            best = i;
    }

    if (receptions.size() > 1) {
        double strongest_other = -INFINITY;
        bool first = true;
        bool late = false;
        for (std::size_t i = 0; i < receptions.size(); ++i) {
            if (i == best)
                continue;
            strongest_other = std::max(strongest_other, receptions[i].power_dbm);
            if (receptions[i].start <= receptions[best].start)
                first = false;
            if (receptions[i].start < receptions[best].start)
                late = true;
        }
        double threshold = env.capture_margin_db;
        if (first)
            threshold -= env.sync_offset_bias_db;
        else if (late)
            threshold += env.sync_offset_bias_db;
        if (receptions[best].power_dbm < strongest_other + threshold) {
            out.outcome = ResolveOutcome::Collision;
            return out;
        }
    }

    if (!env.loss.ideal()) {
        if (!rng)
            throw std::invalid_argument("a lossy medium needs a random stream");
        std::bernoulli_distribution drop(env.loss.frame_error_rate);
        if (drop(*rng)) {
            out.outcome = ResolveOutcome::ChannelLoss;
            return out;
        }
    }
    out.outcome = ResolveOutcome::Decoded;
    out.decoded = best;
    return out;
}

std::optional<double> measure_power(const RadioEnvironment& env, NodeId rx, NodeId tx, Rng* rng)
{
    auto p = env.power(tx, rx);
    if (!p)
        return std::nullopt;
    if (env.noise_sigma_db > 0.0) {
        if (!rng)
            throw std::invalid_argument("noisy measurement needs a random stream");
        std::normal_distribution<double> noise(0.0, env.noise_sigma_db);
        return *p + noise(*rng);
    }
    return p;
}

std::vector<CapturePoint> sweep_capture(const CaptureSweepConfig& config)
{
    if (config.step_db <= 0.0 || config.to_db < config.from_db)
        throw std::invalid_argument("capture sweep needs from <= to and a positive step");
    if (config.trials < 1)
        throw std::invalid_argument("capture sweep needs at least one trial per point");

    const NodeId c1{1}, c2{2}, n1{11}, n2{12};
    const auto steps = static_cast<int>(std::floor((config.to_db - config.from_db) / config.step_db + 1e-9));

    std::vector<CapturePoint> curve;
    Rng rng = derive_stream(config.seed, 0);
    for (int i = 0; i <= steps; ++i) {
        const double delta = config.from_db + i * config.step_db;

        RadioEnvironment env;
        env.capture_margin_db = config.margin_db;
        env.sync_offset_bias_db = config.sync_offset_bias_db;
        env.noise_sigma_db = config.noise_sigma_db;
        env.set_power(n1, c1, config.own_power_dbm);
        env.set_power(n2, c1, config.own_power_dbm - delta);
        env.set_power(n2, c2, config.own_power_dbm);
        env.set_power(n1, c2, config.own_power_dbm - delta);

        const std::int64_t start1 = config.leader == LeadingLeaf::Second ? 1 : 0;
        const std::int64_t start2 = config.leader == LeadingLeaf::First ? 1 : 0;

        CapturePoint point;
        point.delta_db = delta;
        int ok1 = 0, ok2 = 0;
        double sum1 = 0.0, sum2 = 0.0;
        for (int t = 0; t < config.trials; ++t) {
            // Individual slots: each coordinator reads both leaves alone.
            double own1 = *measure_power(env, c1, n1, &rng);
            double own2 = *measure_power(env, c2, n2, &rng);
            double other1 = *measure_power(env, c1, n2, &rng);
            double other2 = *measure_power(env, c2, n1, &rng);
            sum1 += own1 - other1;
            sum2 += own2 - other2;

            // Simultaneous slot.
            std::array<Reception, 2> at_c1{Reception{n1, *measure_power(env, c1, n1, &rng), start1},
                                           Reception{n2, *measure_power(env, c1, n2, &rng), start2}};
            std::array<Reception, 2> at_c2{Reception{n1, *measure_power(env, c2, n1, &rng), start1},
                                           Reception{n2, *measure_power(env, c2, n2, &rng), start2}};
            if (resolve_slot(at_c1, env, &rng).outcome == ResolveOutcome::Decoded)
                ++ok1;
            if (resolve_slot(at_c2, env, &rng).outcome == ResolveOutcome::Decoded)
                ++ok2;
        }
        point.success_rate_c1 = static_cast<double>(ok1) / config.trials;
        point.success_rate_c2 = static_cast<double>(ok2) / config.trials;
        point.measured_delta_c1 = sum1 / config.trials;
        point.measured_delta_c2 = sum2 / config.trials;
        curve.push_back(point);
    }
    return curve;
}

}  // namespace detmac
