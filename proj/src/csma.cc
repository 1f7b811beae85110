#include "detmac/csma.h"

#include <algorithm>
#include <stdexcept>

namespace detmac {

void CsmaParams::validate() const
{
    if (min_be < 0 || max_be < min_be)
        throw std::invalid_argument("CSMA needs 0 <= macMinBE <= macMaxBE");
    if (max_backoffs < 1)
        throw std::invalid_argument("CSMA needs at least one backoff round");
    if (cw < 1)
        throw std::invalid_argument("CSMA contention window must be >= 1");
    if (periods_per_tick < 1)
        throw std::invalid_argument("at least one backoff period per tick");
}

CsmaAgent::CsmaAgent(const CsmaParams& params, int needed_periods, Rng& rng)
    : params_(params), needed_(needed_periods), be_(params.min_be), cw_left_(params.cw)
{
    params_.validate();
    if (needed_periods < 1)
        throw std::invalid_argument("a frame needs at least one backoff period");
    draw_backoff(rng);
}

void CsmaAgent::draw_backoff(Rng& rng)
{
    std::uniform_int_distribution<int> dist(0, (1 << be_) - 1);
    backoff_left_ = dist(rng);
    cw_left_ = params_.cw;
}

CsmaAction CsmaAgent::step(bool busy, int remaining, int run_length, bool run_start, Rng& rng)
{
    switch (state_) {
    case State::Done:
        return CsmaAction::Wait;
    case State::Backoff:
        if (backoff_left_ > 0) {
            --backoff_left_;
            return CsmaAction::Wait;
        }
        return assess(busy, remaining, run_length, rng);
    case State::Deferred:
        if (!run_start)
            return CsmaAction::Wait;
        return assess(busy, remaining, run_length, rng);
    case State::Cca:
        if (busy)
            return fail_round(rng);
        if (--cw_left_ == 0) {
            state_ = State::Done;
            return CsmaAction::Transmit;
        }
        return CsmaAction::Cca;
    }
    return CsmaAction::Wait;
}

CsmaAction CsmaAgent::assess(bool busy, int remaining, int run_length, Rng& rng)
{
    // The CCAs, the frame and its acknowledgement must all fit in this run.
    if (state_ != State::Cca && remaining < params_.cw + needed_) {
        if (run_length < params_.cw + needed_) {
            state_ = State::Done;
            return CsmaAction::Failure;
        }
        state_ = State::Deferred;
        return CsmaAction::Wait;
    }
    if (busy)
        return fail_round(rng);
    if (--cw_left_ == 0) {
        state_ = State::Done;
        return CsmaAction::Transmit;
    }
    state_ = State::Cca;
    return CsmaAction::Cca;
}

CsmaAction CsmaAgent::fail_round(Rng& rng)
{
    ++failed_rounds_;
    be_ = std::min(be_ + 1, params_.max_be);
    if (failed_rounds_ >= params_.max_backoffs) {
        state_ = State::Done;
        return CsmaAction::Failure;
    }
    state_ = State::Backoff;
    draw_backoff(rng);
    return CsmaAction::Cca;
}

CsmaResult csma_transmit(const CsmaParams& params, int needed_periods,
                         const std::function<bool(std::int64_t)>& is_cap,
                         const std::function<bool(std::int64_t)>& busy, Rng& rng,
                         std::int64_t first_period, std::int64_t horizon)
{
    CsmaAgent agent(params, needed_periods, rng);
    CsmaResult result;
    for (std::int64_t p = first_period; p < first_period + horizon; ++p) {
        if (!is_cap(p))
            continue;
        bool run_start = !is_cap(p - 1);
        constexpr std::int64_t kScan = 1 << 16;
        std::int64_t begin = p;
        while (p - begin < kScan && is_cap(begin - 1))
            --begin;
        std::int64_t end = p;
        while (end - p < kScan && is_cap(end))
            ++end;
        const int remaining = static_cast<int>(end - p);
        const int run_length = static_cast<int>(end - begin);

        switch (agent.step(busy(p), remaining, run_length, run_start, rng)) {
        case CsmaAction::Transmit:
            result.success = true;
            result.start_period = p + 1;
            result.start_tick = (p + 1) / params.periods_per_tick;
            result.failed_rounds = agent.failed_rounds();
            return result;
        case CsmaAction::Failure:
            result.failed_rounds = agent.failed_rounds();
            return result;
        case CsmaAction::Wait:
        case CsmaAction::Cca:
            break;
        }
    }
    result.failed_rounds = agent.failed_rounds();
    return result;
}

}  // namespace detmac
