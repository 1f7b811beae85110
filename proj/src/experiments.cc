#include <algorithm>

#include "detmac/simulator.h"

namespace detmac {

namespace {

constexpr NodeId kSuper{0};
constexpr NodeId kCoordinator{1};

}  // namespace

Scenario coordinator_association_scenario(int bo, int nmax, int pds_level, Tick power_on)
{
    Scenario s;
    s.bo = bo;
    s.nmax = nmax;
    s.nodes = {NodeInfo{kSuper, NodeRole::Supercoordinator, std::nullopt},
               NodeInfo{kCoordinator, NodeRole::Coordinator, kSuper}};
    s.pds = {PdsPlan{kCoordinator, pds_level}};
    s.power_on = {PowerOnPlan{kCoordinator, power_on}};
    s.stop_when_associated = true;
    // Power-on within one hypercycle plus the worst-case wait, with slack.
    s.superframes = (std::int64_t{3} << nmax) + 4;
    return s;
}

AssociationSweepResult sweep_association(const AssociationSweepConfig& config)
{
    if (config.trials < 1)
        throw std::invalid_argument("an association sweep needs at least one trial");
    AssociationSweepResult out;
    out.pds_level = config.pds_level;
    out.bounds = pds_latency_bounds(BeaconOrder(config.bo), config.pds_level);
    out.latencies.reserve(static_cast<std::size_t>(config.trials));

    Rng arrivals = derive_stream(config.seed, static_cast<std::uint64_t>(config.pds_level) + 77);
    const std::int64_t boundaries = std::int64_t{kSlotsPerSuperframe} << config.nmax;
    std::uniform_int_distribution<std::int64_t> draw(0, boundaries - 1);
    const Tick slot = BeaconOrder(config.bo).slot_ticks();

    for (int t = 0; t < config.trials; ++t) {
        Scenario s = coordinator_association_scenario(config.bo, config.nmax, config.pds_level,
                                                      draw(arrivals) * slot);
        s.seed = config.seed + static_cast<std::uint64_t>(t);
        MetricsBundle m = run(s);
        out.frames.transmitted += m.frames.transmitted;
        out.frames.delivered += m.frames.delivered;
        out.frames.collided += m.frames.collided;
        out.frames.lost += m.frames.lost;
        if (m.associations.empty()) {
            ++out.incomplete;
            continue;
        }
        const auto& a = m.associations.front();
        out.latencies.push_back(a.latency());
        out.retransmissions += a.requests_sent - 1;
        if (!out.bounds.contains(a.latency()) || !a.deterministic)
            ++out.out_of_bounds;
    }
    return out;
}

Scenario contention_scenario(const ContentionConfig& config, std::uint64_t seed)
{
    Scenario s;
    s.bo = config.bo;
    s.nmax = config.nmax;
    s.seed = seed;
    s.nodes = {NodeInfo{kSuper, NodeRole::Supercoordinator, std::nullopt},
               NodeInfo{kCoordinator, NodeRole::Coordinator, kSuper}};
    s.preassociated = {kCoordinator};
    s.gbs = {GbsPlan{kCoordinator, 8}};
    for (int i = 0; i < config.cap_slots; ++i)
        s.cap.push_back(CapPlan{9 + i, 0, 0});
    for (int i = 0; i < config.leaves; ++i) {
        const auto leaf = NodeId(static_cast<std::uint16_t>(10 + i));
        s.nodes.push_back(NodeInfo{leaf, NodeRole::Leaf, kCoordinator});
        s.power_on.push_back(PowerOnPlan{leaf, std::nullopt});
        if (config.use_pds)
            s.pds.push_back(PdsPlan{leaf, config.pds_level});
        if (config.background_bytes > 0)
            s.flows.push_back(FlowPlan{leaf, 1, config.background_bytes, 0, FlowMode::Cap});
    }
    s.stop_when_associated = config.background_bytes == 0;
    s.superframes = config.max_superframes;
    return s;
}

ContentionResult run_contention(const ContentionConfig& config)
{
    ContentionResult out;
    out.bounds = pds_latency_bounds(BeaconOrder(config.bo), config.pds_level);
    for (int t = 0; t < config.trials; ++t) {
        MetricsBundle m = run(contention_scenario(config, config.seed + static_cast<std::uint64_t>(t)));
        out.csma_failures += m.csma_failures;
        out.incomplete += static_cast<std::int64_t>(m.unassociated.size());
        out.frames.transmitted += m.frames.transmitted;
        out.frames.delivered += m.frames.delivered;
        out.frames.collided += m.frames.collided;
        out.frames.lost += m.frames.lost;
        if (m.frames.conserved())
            ++out.trials_conserved;
        for (FrameType type : {FrameType::AssocRequest, FrameType::Data}) {
            auto it = m.frames_by_type.find(type);
            if (it == m.frames_by_type.end())
                continue;
            out.pds_frames.transmitted += it->second.transmitted;
            out.pds_frames.delivered += it->second.delivered;
            out.pds_frames.collided += it->second.collided;
            out.pds_frames.lost += it->second.lost;
        }
        for (const auto& a : m.associations) {
            out.latencies.push_back(a.latency());
            out.retransmissions += a.requests_sent - 1;
            if (!out.bounds.contains(a.latency()))
                ++out.out_of_bounds;
        }
    }
    return out;
}

}  // namespace detmac
