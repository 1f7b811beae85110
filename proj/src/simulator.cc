#include "detmac/simulator.h"

#include <algorithm>
#include <limits>
#include <memory>
#include <set>

#include "detmac/radio.h"
#include "detmac/random.h"

namespace detmac {

namespace {

enum class Fate { Delivered, Collided, Lost };

struct InFlight {
    Frame frame;
    bool resolved = false;
};

struct Runtime {
    NodeMachine* machine = nullptr;
    Rng rng;
    int lead = 0;
    std::optional<CsmaAgent> agent;
    std::optional<Frame> pending;
    bool awaiting_ack = false;
    bool ack_received = false;
    std::int64_t ack_deadline = 0;
    Frame sent;
};

class Engine {
public:
    Engine(const Scenario& scenario, const RunOptions& options);
    MetricsBundle run();

private:
    SlotContext context(SuperframeCounter k, int s) const;
    bool in_outage(NodeId n, SuperframeCounter k) const;
    bool listening(NodeId n, SuperframeCounter k) const;
    bool is_cap(SuperframeCounter k, int s) const;
    void cap_run(SuperframeCounter k, int s, std::int64_t& begin, std::int64_t& end) const;

    void superframe_events(SuperframeCounter k);
    void step_slot(SuperframeCounter k, int s);
    void check_ownership(const Frame& f, SuperframeCounter k, SlotIndex s) const;
    void transmit(Frame f, const SlotContext& ctx);
    bool channel_busy(NodeId node, std::int64_t period) const;
    void resolve_until(std::int64_t boundary, const SlotContext& ctx, bool exact);
    Fate resolve_at(const Frame& f, NodeId rx, const SlotContext& ctx, std::size_t* audible);
    void resolve_frame(std::size_t index, const SlotContext& ctx);
    void settle_acks(std::int64_t boundary, const SlotContext& ctx);
    void collect_events(const SlotContext& ctx);
    void prune();
    bool all_associated() const;

    void trace(const SlotContext& ctx, NodeId node, std::string_view event, std::string detail);
    bool tracing() const { return scenario_.trace_capacity > 0 || static_cast<bool>(options_.sink); }

    const Scenario& scenario_;
    const RunOptions& options_;
    ProtocolConfig config_;
    Topology topology_;
    RadioEnvironment radio_;
    Supercoordinator* super_ = nullptr;
    std::vector<std::unique_ptr<NodeMachine>> machines_;
    std::map<NodeId, Runtime> runtime_;
    std::map<NodeId, Coordinator*> coordinators_;
    std::map<NodeId, int> leads_;

    Tick slot_ticks_;
    int periods_per_slot_;
    std::multimap<Tick, NodeId> power_on_;
    std::set<NodeId> expected_;
    std::map<SuperframeCounter, std::vector<NodeId>> restarts_;
    std::vector<NodeId> postponed_restarts_;

    std::vector<InFlight> medium_;
    std::uint64_t next_frame_ = 1;
    Rng loss_rng_;
    Rng noise_rng_;

    TrafficLog log_;
    MetricsBundle metrics_;
};

Engine::Engine(const Scenario& scenario, const RunOptions& options)
    : scenario_(scenario),
      options_(options),
      topology_(build_topology(scenario)),
      radio_(build_radio(scenario)),
      slot_ticks_(Tick{1} << scenario.bo),
      periods_per_slot_(scenario.csma.periods_per_tick << scenario.bo),
      loss_rng_(derive_stream(scenario.seed, 2)),
      noise_rng_(derive_stream(scenario.seed, 3))
{
    config_.bo = BeaconOrder(scenario.bo);
    config_.nmax = scenario.nmax;
    config_.csma = scenario.csma;
    config_.sizes = scenario.sizes;
    config_.desync_threshold = scenario.desync_threshold;
    config_.sgts_freshness = scenario.sgts_freshness;

    for (const auto& l : scenario.leads)
        leads_[l.node] = l.lead;

    Scheduler sched = build_scheduler(scenario);
    const NodeId sc = topology_.supercoordinator();
    for (NodeId n : scenario.preassociated)
        sched.mark_associated(n);
    for (const auto& info : topology_.nodes()) {
        std::unique_ptr<NodeMachine> m;
        switch (info.role) {
        case NodeRole::Supercoordinator: {
            auto s = std::make_unique<Supercoordinator>(info.id, config_, sched);
            super_ = s.get();
            m = std::move(s);
            break;
        }
        case NodeRole::Coordinator: {
            auto c = std::make_unique<Coordinator>(info.id, *info.parent, config_);
            coordinators_[info.id] = c.get();
            m = std::move(c);
            break;
        }
        case NodeRole::Leaf:
            m = std::make_unique<Leaf>(info.id, *info.parent, config_);
            break;
        }
        Runtime rt;
        rt.machine = m.get();
        rt.rng = derive_stream(scenario.seed, 1000 + static_cast<std::uint64_t>(to_int(info.id)));
        rt.lead = leads_.count(info.id) ? leads_[info.id] : 0;
        runtime_.emplace(info.id, std::move(rt));
        machines_.push_back(std::move(m));
    }

    Rng arrivals = derive_stream(scenario.seed, 1);
    const std::int64_t boundaries = std::int64_t{kSlotsPerSuperframe} << scenario.nmax;
    std::uniform_int_distribution<std::int64_t> draw(0, boundaries - 1);
    std::set<NodeId> planned;
    for (const auto& p : scenario.power_on) {
        Tick t = p.tick ? *p.tick : draw(arrivals) * slot_ticks_;
        power_on_.emplace(t, p.node);
        planned.insert(p.node);
    }
    std::set<NodeId> pre(scenario.preassociated.begin(), scenario.preassociated.end());
    for (const auto& info : topology_.nodes()) {
        if (info.id == sc || pre.count(info.id))
            continue;
        if (!planned.count(info.id))
            power_on_.emplace(0, info.id);
        expected_.insert(info.id);
    }
    for (const auto& r : scenario.restarts)
        restarts_[r.at].push_back(r.node);
}

SlotContext Engine::context(SuperframeCounter k, int s) const
{
    SlotContext ctx;
    ctx.superframe = k;
    ctx.slot = SlotIndex(s);
    ctx.slot_ticks = slot_ticks_;
    ctx.tick = (k * kSlotsPerSuperframe + s) * slot_ticks_;
    ctx.periods_per_slot = periods_per_slot_;
    ctx.start_period = (k * kSlotsPerSuperframe + s) * periods_per_slot_;
    return ctx;
}

bool Engine::in_outage(NodeId n, SuperframeCounter k) const
{
    for (const auto& o : scenario_.outages)
        if (o.node == n && k >= o.from && k < o.from + o.count)
            return true;
    return false;
}

bool Engine::listening(NodeId n, SuperframeCounter k) const
{
    return runtime_.at(n).machine->powered() && !in_outage(n, k);
}

bool Engine::is_cap(SuperframeCounter k, int s) const
{
    if (s <= 0 || s >= kSlotsPerSuperframe)
        return false;
    for (const auto* a : super_->scheduler().table().at(k, SlotIndex(s)))
        if (a->kind == AssignmentKind::Cap)
            return true;
    return false;
}

void Engine::cap_run(SuperframeCounter k, int s, std::int64_t& begin, std::int64_t& end) const
{
    int first = s, last = s;
    while (is_cap(k, first - 1))
        --first;
    while (is_cap(k, last + 1))
        ++last;
    const std::int64_t base = k * kSlotsPerSuperframe * periods_per_slot_;
    begin = base + std::int64_t{first} * periods_per_slot_;
    end = base + std::int64_t{last + 1} * periods_per_slot_;
}

void Engine::trace(const SlotContext& ctx, NodeId node, std::string_view event, std::string detail)
{
    TraceRecord r{ctx.tick, ctx.superframe, ctx.slot.value(), node, std::string(event), std::move(detail)};
    if (options_.sink)
        options_.sink(r);
    if (scenario_.trace_capacity > 0) {
        metrics_.trace.push_back(std::move(r));
        while (metrics_.trace.size() > static_cast<std::size_t>(scenario_.trace_capacity))
            metrics_.trace.pop_front();
    }
}

void Engine::check_ownership(const Frame& f, SuperframeCounter k, SlotIndex s) const
{
    const Scheduler& sched = super_->scheduler();
    auto allowed = [&](const SlotAssignment& a) {
        if (!a.owned_by(f.src) || !occupies(a, k) || !a.covers(s))
            return false;
        switch (f.type) {
        case FrameType::SuperBeacon: return a.kind == AssignmentKind::SuperBeacon;
        case FrameType::Beacon: return a.kind == AssignmentKind::Gbs;
        case FrameType::AssocRequest:
        case FrameType::GtsRequestCmd:
        case FrameType::Data:
            return a.kind == AssignmentKind::Gts || a.kind == AssignmentKind::Pds ||
                   a.kind == AssignmentKind::Sgts;
        case FrameType::Ack: return false;
        }
        return false;
    };
    for (const auto& a : sched.table().assignments())
        if (allowed(a))
            return;
    for (const auto& q : sched.quarantined())
        if (k < q.until && allowed(q.assignment))
            return;
    throw OwnershipViolation("node " + to_string(f.src) + " sent " + std::string(to_string(f.type)) +
                             " in superframe " + std::to_string(k) + " slot " + std::to_string(s.value()) +
                             " without owning that instance");
}

void Engine::transmit(Frame f, const SlotContext& ctx)
{
    f.id = next_frame_++;
    f.lead = runtime_.at(f.src).lead;
    if (!f.dst) {
        if (f.type == FrameType::SuperBeacon) {
            for (const auto& [id, c] : coordinators_)
                f.listeners.push_back(id);
        } else if (f.type == FrameType::Beacon) {
            f.listeners = topology_.children(f.src);
            f.listeners.push_back(topology_.supercoordinator());
            std::sort(f.listeners.begin(), f.listeners.end());
        }
    }
    const std::int64_t slot_index = f.start_period / periods_per_slot_;
    f.superframe = slot_index / kSlotsPerSuperframe;
    f.slot = SlotIndex(static_cast<int>(slot_index % kSlotsPerSuperframe));
    log_.record(f.superframe, f.slot, f.src);

    ++metrics_.frames.transmitted;
    ++metrics_.frames_by_type[f.type].transmitted;
    if (tracing())
        trace(ctx, f.src, "tx",
              std::string(to_string(f.type)) + (f.dst ? " to " + to_string(*f.dst) : std::string(" broadcast")) +
                  " periods " + std::to_string(f.start_period) + "-" + std::to_string(f.end_period));
    medium_.push_back(InFlight{std::move(f), false});
}

bool Engine::channel_busy(NodeId node, std::int64_t period) const
{
    for (const auto& m : medium_) {
        const Frame& f = m.frame;
        if (f.start_period <= period && period < f.end_period && (f.src == node || radio_.in_range(f.src, node)))
            return true;
    }
    return false;
}

Fate Engine::resolve_at(const Frame& f, NodeId rx, const SlotContext& ctx, std::size_t* audible)
{
    *audible = 0;
    if (!listening(rx, f.superframe) || !radio_.in_range(f.src, rx))
        return Fate::Lost;
    std::vector<Reception> receptions;
    std::size_t target = 0;
    for (const auto& m : medium_) {
        const Frame& g = m.frame;
        if (g.start_period >= f.end_period || f.start_period >= g.end_period)
            continue;
        if (g.src == rx)
            return Fate::Collided;
        auto p = radio_.power(g.src, rx);
        if (!p)
            continue;
        double dbm = *p;
        if (radio_.noise_sigma_db > 0.0) {
            std::normal_distribution<double> noise(0.0, radio_.noise_sigma_db);
            dbm += noise(noise_rng_);
        }
        if (g.id == f.id)
            target = receptions.size();
        receptions.push_back(Reception{g.src, dbm, g.start_period * 4096 + g.lead});
    }
    *audible = receptions.size();
    Resolution r = resolve_slot(receptions, radio_, &loss_rng_);
    (void)ctx;
    switch (r.outcome) {
    case ResolveOutcome::Decoded:
        return *r.decoded == target ? Fate::Delivered : Fate::Collided;
    case ResolveOutcome::Collision:
        return Fate::Collided;
    case ResolveOutcome::ChannelLoss:
        return Fate::Lost;
    }
    return Fate::Lost;
}

void Engine::resolve_frame(std::size_t index, const SlotContext& ctx)
{
    medium_[index].resolved = true;
    const Frame f = medium_[index].frame;

    std::vector<NodeId> receivers;
    if (f.dst)
        receivers.push_back(*f.dst);
    else
        for (NodeId l : f.listeners)
            if (listening(l, f.superframe))
                receivers.push_back(l);

    Fate fate = Fate::Delivered;
    bool any_collided = false, any_lost = false;
    std::vector<NodeId> decoded_by;
    for (NodeId rx : receivers) {
        std::size_t audible = 0;
        Fate at = resolve_at(f, rx, ctx, &audible);
        if (at == Fate::Delivered)
            decoded_by.push_back(rx);
        else if (at == Fate::Collided)
            any_collided = true;
        else
            any_lost = true;
    }
    if (f.dst)
        fate = decoded_by.empty() ? (any_collided ? Fate::Collided : Fate::Lost) : Fate::Delivered;
    else if (any_collided)
        fate = Fate::Collided;
    else if (any_lost)
        fate = Fate::Lost;

    auto& total = metrics_.frames;
    auto& by_type = metrics_.frames_by_type[f.type];
    switch (fate) {
    case Fate::Delivered: ++total.delivered; ++by_type.delivered; break;
    case Fate::Collided: ++total.collided; ++by_type.collided; break;
    case Fate::Lost: ++total.lost; ++by_type.lost; break;
    }
    if (tracing() && fate != Fate::Delivered)
        trace(ctx, f.src, fate == Fate::Collided ? "collision" : "loss", std::string(to_string(f.type)));

    // Power observations by coordinators of leaf frames heard alone in reserved slots.
    if (!f.contention && topology_.at(f.src).role == NodeRole::Leaf) {
        for (auto& [cid, coord] : coordinators_) {
            if (!listening(cid, f.superframe))
                continue;
            std::size_t audible = 0;
            bool alone = true;
            for (const auto& m : medium_) {
                const Frame& g = m.frame;
                if (g.id != f.id && g.start_period < f.end_period && f.start_period < g.end_period &&
                    (g.src == cid || radio_.in_range(g.src, cid)))
                    alone = false;
            }
            (void)audible;
            if (!alone)
                continue;
            if (auto p = measure_power(radio_, cid, f.src, &noise_rng_))
                coord->on_overhear(f.src, *p, f.superframe);
        }
    }

    for (NodeId rx : decoded_by) {
        Runtime& rt = runtime_.at(rx);
        if (f.type == FrameType::Ack) {
            if (rt.awaiting_ack && rt.sent.id == f.acked_frame)
                rt.ack_received = true;
            continue;
        }
        if (tracing())
            trace(ctx, rx, "rx", std::string(to_string(f.type)) + " from " + to_string(f.src));
        rt.machine->on_receive(f, ctx);
        if (f.contention && f.dst) {
            Frame ack;
            ack.type = FrameType::Ack;
            ack.src = rx;
            ack.dst = f.src;
            ack.contention = true;
            ack.bytes = scenario_.sizes.ack_bytes;
            ack.acked_frame = f.id;
            ack.start_period = f.end_period;
            ack.end_period = f.end_period + scenario_.sizes.periods(ack.bytes);
            transmit(std::move(ack), ctx);
        }
    }
}

void Engine::resolve_until(std::int64_t boundary, const SlotContext& ctx, bool exact)
{
    // Acks created while resolving can end later; loop until no eligible frame is left.
    for (;;) {
        std::optional<std::size_t> next;
        for (std::size_t i = 0; i < medium_.size(); ++i) {
            const auto& m = medium_[i];
            if (m.resolved)
                continue;
            if (exact ? m.frame.end_period != boundary : m.frame.end_period > boundary)
                continue;
            if (!next) {
                next = i;
                continue;
            }
            const Frame& a = m.frame;
            const Frame& b = medium_[*next].frame;
            if (std::tie(a.end_period, a.start_period, a.id) < std::tie(b.end_period, b.start_period, b.id))
                next = i;
        }
        if (!next)
            return;
        resolve_frame(*next, ctx);
    }
}

void Engine::settle_acks(std::int64_t boundary, const SlotContext& ctx)
{
    for (auto& [id, rt] : runtime_) {
        if (!rt.awaiting_ack || rt.ack_deadline > boundary)
            continue;
        rt.awaiting_ack = false;
        const bool ok = rt.ack_received;
        rt.ack_received = false;
        rt.machine->on_contention_result(rt.sent, ok, ctx);
    }
}

void Engine::prune()
{
    std::int64_t horizon = std::numeric_limits<std::int64_t>::max();
    for (const auto& m : medium_)
        if (!m.resolved)
            horizon = std::min(horizon, m.frame.start_period);
    std::erase_if(medium_, [horizon](const InFlight& m) { return m.resolved && m.frame.end_period <= horizon; });
}

void Engine::collect_events(const SlotContext& ctx)
{
    for (auto& m : machines_) {
        NodeEvents& ev = m->events();
        for (const auto& a : ev.associations) {
            metrics_.associations.push_back(a);
            if (tracing())
                trace(ctx, a.node, "associated",
                      "latency " + std::to_string(a.latency()) + (a.deterministic ? " pds" : " cap"));
        }
        for (const auto& [tick, g] : ev.grants_issued) {
            GrantRecord r;
            r.tick = tick;
            r.requester = g.requester();
            r.granted = g.is_granted();
            if (r.granted) {
                r.slot = g.assignment().slot.value();
                r.level = g.assignment().level.n();
                r.phase = g.assignment().phase;
            } else {
                r.reason = std::string(to_string(g.reason()));
            }
            metrics_.grants.push_back(std::move(r));
        }
        metrics_.malformed += ev.malformed;
        ev = NodeEvents{};
    }
}

bool Engine::all_associated() const
{
    for (NodeId n : expected_)
        if (runtime_.at(n).machine->association().phase != AssociationPhase::Associated)
            return false;
    return true;
}

void Engine::superframe_events(SuperframeCounter k)
{
    const SlotContext ctx = context(k, 0);

    std::vector<NodeId> due;
    due.swap(postponed_restarts_);
    if (auto it = restarts_.find(k); it != restarts_.end())
        due.insert(due.end(), it->second.begin(), it->second.end());
    for (NodeId n : due) {
        Runtime& rt = runtime_.at(n);
        if (!rt.machine->can_leave()) {
            postponed_restarts_.push_back(n);
            continue;
        }
        rt.agent.reset();
        rt.pending.reset();
        rt.awaiting_ack = false;
        super_->scheduler().mark_unassociated(n);
        rt.machine->restart(ctx);
        if (tracing())
            trace(ctx, n, "restart", "");
    }

    for (const auto& f : scenario_.flows)
        if (k >= f.start && (k - f.start) % f.every == 0)
            runtime_.at(f.node).machine->enqueue_data(f.bytes, f.mode == FlowMode::Cap);

    for (const auto& r : scenario_.requests) {
        if (r.at != k)
            continue;
        for (int i = 0; i < r.count; ++i)
            runtime_.at(r.node).machine->enqueue_request(
                GtsRequest{r.node, std::nullopt, ReservationLevel(r.level), 1, r.priority});
    }

    for (const auto& g : scenario_.sgts) {
        if (g.at != k)
            continue;
        SgtsRecord rec{k, g.c1, g.c2, g.f1, g.f2, false, ""};
        auto outcome = negotiate_sgts(g.c1, coordinators_.at(g.c1)->observations(), g.c2,
                                      coordinators_.at(g.c2)->observations(), g.f1, g.f2, scenario_.margin_db,
                                      k, scenario_.sgts_freshness);
        if (const auto* rej = std::get_if<SgtsRejection>(&outcome)) {
            rec.detail = "rejected by " + to_string(rej->coordinator) + ": " + rej->reason;
            if (rej->delta_db == rej->delta_db)
                rec.detail += " (delta " + std::to_string(rej->delta_db) + " dB)";
            metrics_.sgts.push_back(std::move(rec));
            continue;
        }
        const auto& table = super_->scheduler().table();
        const SlotAssignment* a = nullptr;
        const SlotAssignment* b = nullptr;
        for (const auto& e : table.assignments())
            if (e.kind == AssignmentKind::Gts && e.owned_by(g.f1) && !a)
                a = &e;
        for (const auto& e : table.assignments())
            if (e.kind == AssignmentKind::Gts && e.owned_by(g.f2) && a && e.level == a->level && !b)
                b = &e;
        if (!a || !b) {
            rec.detail = "no GTS pair of equal level";
            metrics_.sgts.push_back(std::move(rec));
            continue;
        }
        super_->submit_sgts(SgtsSubmission{a->id, b->id, std::get<CaptureEvidence>(outcome)});
        rec.detail = "submitted";
        metrics_.sgts.push_back(std::move(rec));
    }
}

void Engine::step_slot(SuperframeCounter k, int s)
{
    const SlotContext ctx = context(k, s);

    for (auto [it, end] = power_on_.equal_range(ctx.tick); it != end; ++it) {
        NodeMachine* m = runtime_.at(it->second).machine;
        if (!m->powered()) {
            m->power_on(ctx);
            if (tracing())
                trace(ctx, it->second, "power_on", "");
        }
    }

    const std::size_t sgts_before = super_->sgts_outcomes().size();
    std::vector<Frame> out;
    for (auto& m : machines_) {
        if (!m->powered())
            continue;
        out.clear();
        m->begin_slot(ctx, out);
        if (in_outage(m->id(), k))
            continue;
        for (Frame& f : out) {
            check_ownership(f, k, ctx.slot);
            f.contention = false;
            f.start_period = ctx.start_period;
            f.end_period = ctx.start_period + periods_per_slot_;
            transmit(std::move(f), ctx);
        }
    }
    if (super_->sgts_outcomes().size() > sgts_before) {
        std::size_t i = sgts_before;
        for (auto& rec : metrics_.sgts) {
            if (rec.superframe != k || rec.detail != "submitted" || i >= super_->sgts_outcomes().size())
                continue;
            const auto& d = super_->sgts_outcomes()[i++];
            rec.merged = d.is_granted();
            rec.detail = rec.merged ? "merged on slot " + std::to_string(d.assignment().slot.value())
                                    : "denied (" + std::string(to_string(d.reason())) + ")";
        }
    }

    const std::int64_t slot_end = ctx.start_period + periods_per_slot_;
    if (is_cap(k, s)) {
        for (auto& [id, rt] : runtime_) {
            if (rt.agent || rt.awaiting_ack || !listening(id, k))
                continue;
            if (!rt.pending)
                rt.pending = rt.machine->take_contention_frame();
            if (!rt.pending)
                continue;
            int needed = scenario_.sizes.periods(std::max(rt.pending->bytes, 1));
            if (rt.pending->dst)
                needed += scenario_.sizes.periods(scenario_.sizes.ack_bytes);
            rt.agent.emplace(scenario_.csma, needed, rt.rng);
        }

        const bool active = std::any_of(runtime_.begin(), runtime_.end(), [](const auto& e) {
            return e.second.agent.has_value() || e.second.awaiting_ack;
        }) || std::any_of(medium_.begin(), medium_.end(), [](const InFlight& m) { return !m.resolved; });

        if (active) {
            std::int64_t run_begin = 0, run_end = 0;
            cap_run(k, s, run_begin, run_end);
            for (std::int64_t p = ctx.start_period; p < slot_end; ++p) {
                const int remaining = static_cast<int>(run_end - p);
                const int run_length = static_cast<int>(run_end - run_begin);
                for (auto& [id, rt] : runtime_) {
                    if (!rt.agent)
                        continue;
                    const bool busy = channel_busy(id, p);
                    switch (rt.agent->step(busy, remaining, run_length, p == run_begin, rt.rng)) {
                    case CsmaAction::Transmit: {
                        Frame f = std::move(*rt.pending);
                        rt.pending.reset();
                        rt.agent.reset();
                        f.contention = true;
                        f.start_period = p + 1;
                        f.end_period = p + 1 + scenario_.sizes.periods(std::max(f.bytes, 1));
                        if (f.dst) {
                            rt.awaiting_ack = true;
                            rt.ack_received = false;
                            rt.ack_deadline = f.end_period + scenario_.sizes.periods(scenario_.sizes.ack_bytes);
                            rt.sent = f;
                            transmit(std::move(f), ctx);
                            rt.sent.id = next_frame_ - 1;
                        } else {
                            Frame copy = f;
                            transmit(std::move(f), ctx);
                            rt.machine->on_contention_result(copy, true, ctx);
                        }
                        break;
                    }
                    case CsmaAction::Failure: {
                        ++metrics_.csma_failures;
                        Frame f = std::move(*rt.pending);
                        rt.pending.reset();
                        rt.agent.reset();
                        if (tracing())
                            trace(ctx, id, "csma_failure", std::string(to_string(f.type)));
                        rt.machine->on_contention_failure(f, ctx);
                        break;
                    }
                    case CsmaAction::Wait:
                    case CsmaAction::Cca:
                        break;
                    }
                }
                resolve_until(p + 1, ctx, true);
                settle_acks(p + 1, ctx);
            }
        }
    }

    resolve_until(slot_end, ctx, false);
    settle_acks(slot_end, ctx);
    prune();

    for (auto& m : machines_)
        if (m->powered())
            m->end_slot(ctx);
    collect_events(ctx);
}

MetricsBundle Engine::run()
{
    SuperframeCounter k = 0;
    for (const auto& m : machines_)
        if (m->role() == NodeRole::Supercoordinator)
            m->power_on(context(0, 0));
    std::set<NodeId> pre(scenario_.preassociated.begin(), scenario_.preassociated.end());
    for (auto& m : machines_)
        if (pre.count(m->id()))
            m->preassociate(context(0, 0));

    for (; k < scenario_.superframes; ++k) {
        if (scenario_.stop_when_associated && k > 0 && all_associated() && postponed_restarts_.empty() &&
            power_on_.lower_bound(context(k, 0).tick) == power_on_.end() &&
            restarts_.lower_bound(k) == restarts_.end())
            break;
        superframe_events(k);
        for (int s = 0; s < kSlotsPerSuperframe; ++s)
            step_slot(k, s);
    }

    const SlotContext last = context(k, 0);
    resolve_until(std::numeric_limits<std::int64_t>::max(), last, false);
    settle_acks(std::numeric_limits<std::int64_t>::max(), last);
    collect_events(last);

    metrics_.superframes_run = k;
    metrics_.end_tick = last.tick;
    log_.first_superframe = 0;
    log_.superframe_count = k;
    metrics_.utilization = utilization(super_->scheduler().table(), log_);
    for (const auto& m : machines_) {
        if (!m->association().trace.empty())
            metrics_.association_traces[m->id()] = m->association().trace;
        if (expected_.count(m->id()) && m->association().phase != AssociationPhase::Associated)
            metrics_.unassociated.push_back(m->id());
    }
    return std::move(metrics_);
}

}  // namespace

MetricsBundle run(const Scenario& scenario, const RunOptions& options)
{
    if (auto diagnostics = validate(scenario); !diagnostics.empty())
        throw ScenarioError(std::move(diagnostics));
    Engine engine(scenario, options);
    return engine.run();
}

std::vector<HistogramBin> latency_histogram(std::span<const Tick> samples, Tick bin_width)
{
    if (samples.empty())
        return {};
    if (bin_width <= 0)
        throw std::invalid_argument("histogram bin width must be positive");
    auto floor_div = [bin_width](Tick t) { return t >= 0 ? t / bin_width : -((-t + bin_width - 1) / bin_width); };
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    const Tick first = floor_div(*lo), last = floor_div(*hi);
    std::vector<HistogramBin> bins;
    for (Tick b = first; b <= last; ++b)
        bins.push_back(HistogramBin{b * bin_width, (b + 1) * bin_width, 0, 0.0});
    for (Tick t : samples)
        ++bins[static_cast<std::size_t>(floor_div(t) - first)].count;
    for (auto& b : bins)
        b.proportion = static_cast<double>(b.count) / static_cast<double>(samples.size());
    return bins;
}

std::int64_t nonempty_bins(std::span<const HistogramBin> bins)
{
    return std::count_if(bins.begin(), bins.end(), [](const HistogramBin& b) { return b.count > 0; });
}

LatencyBounds pds_latency_bounds(BeaconOrder bo, int pds_level)
{
    const Tick t = bo.slot_ticks();
    return LatencyBounds{17 * t, 16 * t * ((Tick{1} << pds_level) + 1)};
}

}  // namespace detmac
