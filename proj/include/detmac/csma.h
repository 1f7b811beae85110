#ifndef DETMAC_CSMA_H
#define DETMAC_CSMA_H

#include <cstdint>
#include <functional>

#include "detmac/random.h"

namespace detmac {

/// Slotted CSMA/CA parameters. Time unit is the backoff period; a beacon
/// order 0 slot holds periods_per_tick of them.
struct CsmaParams {
    int min_be = 3;
    int max_be = 5;
    int max_backoffs = 4;
    int cw = 2;
    int periods_per_tick = 3;

    /// Throws std::invalid_argument on inconsistent values.
    void validate() const;
    friend bool operator==(const CsmaParams&, const CsmaParams&) = default;
};

enum class CsmaAction {
    Wait,      ///< counting down or deferred to the next CAP run
    Cca,       ///< performed a clear-channel assessment this period
    Transmit,  ///< last CCA passed; the frame starts at the next period
    Failure,   ///< channel access failure
};

/// One pending transmission. The owner calls step() once per CAP backoff
/// period, in time order; periods outside the CAP are simply not stepped,
/// which pauses the countdown.
class CsmaAgent {
public:
    /// needed_periods covers the frame plus the acknowledgement it must leave room for.
    CsmaAgent(const CsmaParams& params, int needed_periods, Rng& rng);

    /// busy: channel sensed busy during this period.
    /// remaining: CAP periods left in the current contiguous run, this one included.
    /// run_length: total length of the current run.
    /// run_start: this is the first period of a run.
    CsmaAction step(bool busy, int remaining, int run_length, bool run_start, Rng& rng);

    int failed_rounds() const { return failed_rounds_; }
    int backoff_exponent() const { return be_; }
    bool finished() const { return state_ == State::Done; }

private:
    enum class State { Backoff, Deferred, Cca, Done };

    CsmaAction assess(bool busy, int remaining, int run_length, Rng& rng);
    CsmaAction fail_round(Rng& rng);
    void draw_backoff(Rng& rng);

    CsmaParams params_;
    int needed_;
    State state_ = State::Backoff;
    int be_;
    int failed_rounds_ = 0;
    int backoff_left_ = 0;
    int cw_left_;
};

struct CsmaResult {
    bool success = false;
    /// Backoff period in which the frame starts (valid on success).
    std::int64_t start_period = 0;
    /// Tick containing the frame start.
    std::int64_t start_tick = 0;
    int failed_rounds = 0;
};

/// Runs one channel access against a fixed channel view, starting at `first_period`.
/// is_cap tells whether a period belongs to the contention access period; busy
/// whether the channel is sensed busy there. Gives up after `horizon` periods.
CsmaResult csma_transmit(const CsmaParams& params, int needed_periods,
                         const std::function<bool(std::int64_t)>& is_cap,
                         const std::function<bool(std::int64_t)>& busy, Rng& rng,
                         std::int64_t first_period = 0, std::int64_t horizon = 1'000'000);

}  // namespace detmac

#endif  // DETMAC_CSMA_H
