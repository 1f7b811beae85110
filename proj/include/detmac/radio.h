#ifndef DETMAC_RADIO_H
#define DETMAC_RADIO_H

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "detmac/core.h"
#include "detmac/random.h"

namespace detmac {

struct LossModel {
    /// Probability that a frame which survived capture arbitration is still lost. 0 is the ideal medium.
    double frame_error_rate = 0.0;

    bool ideal() const { return frame_error_rate <= 0.0; }
    friend bool operator==(const LossModel&, const LossModel&) = default;
};

/// Received power between every in-range pair plus the capture parameters.
class RadioEnvironment {
public:
    double capture_margin_db = 10.0;
    /// Advantage, in dB, of a frame that starts strictly before its competitors.
    double sync_offset_bias_db = 0.0;
    /// Standard deviation of Gaussian noise on power readings.
    double noise_sigma_db = 0.0;
    LossModel loss;
    /// Power for pairs without an explicit entry. Unset means such pairs are out of range.
    std::optional<double> default_power_dbm = -60.0;

    void set_power(NodeId tx, NodeId rx, double dbm) { matrix_[{tx, rx}] = dbm; }
    void clear_power(NodeId tx, NodeId rx) { matrix_.erase({tx, rx}); }
    std::optional<double> power(NodeId tx, NodeId rx) const;
    bool in_range(NodeId tx, NodeId rx) const { return power(tx, rx).has_value(); }
    const std::map<std::pair<NodeId, NodeId>, double>& matrix() const { return matrix_; }

    friend bool operator==(const RadioEnvironment&, const RadioEnvironment&) = default;

private:
    std::map<std::pair<NodeId, NodeId>, double> matrix_;
};

/// Fills the matrix from positions with p(d) = p0 - 10 * exponent * log10(d / 1 m).
/// Pairs weaker than the floor are left out of range.
void apply_log_distance(RadioEnvironment& env,
                        const std::map<NodeId, std::pair<double, double>>& positions,
                        double p0_dbm, double exponent, std::optional<double> floor_dbm);

/// A frame as heard by one receiver.
struct Reception {
    NodeId sender{};
    double power_dbm = 0.0;
    /// Start time on an arbitrary but common scale; smaller starts first.
    std::int64_t start = 0;
};

enum class ResolveOutcome { Decoded, Collision, ChannelLoss };

struct Resolution {
    ResolveOutcome outcome = ResolveOutcome::Collision;
    /// Index into the receptions when decoded.
    std::optional<std::size_t> decoded;
};

/// Capture arbitration among simultaneous frames at one receiver.
///
/// The strongest frame (ties: earliest, then lowest index) is decoded when it
/// exceeds every other frame by the capture margin. A frame that started
/// strictly first needs margin - bias; one that started after another needs
/// margin + bias. The decoded frame is then subject to the loss model, which
/// draws from rng only when the model is not ideal.
Resolution resolve_slot(std::span<const Reception> receptions, const RadioEnvironment& env,
                        Rng* rng = nullptr);

/// Power reading at rx of tx transmitting alone, nullopt when out of range.
/// Noise is drawn from rng only when noise_sigma_db > 0.
std::optional<double> measure_power(const RadioEnvironment& env, NodeId rx, NodeId tx,
                                    Rng* rng = nullptr);

enum class LeadingLeaf { None, First, Second };

struct CaptureSweepConfig {
    double from_db = -30.0;
    double to_db = 30.0;
    double step_db = 1.0;
    int trials = 100;
    double margin_db = 10.0;
    double sync_offset_bias_db = 0.0;
    double noise_sigma_db = 0.0;
    /// Power of each leaf at its own coordinator.
    double own_power_dbm = -60.0;
    /// Which leaf's frame starts first in the simultaneous slot.
    LeadingLeaf leader = LeadingLeaf::First;
    std::uint64_t seed = 1;
};

struct CapturePoint {
    double delta_db = 0.0;
    /// Fraction of simultaneous-slot instances in which C1 (resp. C2) decoded a frame.
    double success_rate_c1 = 0.0;
    double success_rate_c2 = 0.0;
    /// Mean delta measured from the individual transmissions.
    double measured_delta_c1 = 0.0;
    double measured_delta_c2 = 0.0;
};

/// Two stars (C1/N1, C2/N2). For each delta, N1 and N2 first transmit alone so that
/// each coordinator reads both powers, then both transmit in the same slot. Delta is
/// N1 - N2 at C1 and N2 - N1 at C2.
std::vector<CapturePoint> sweep_capture(const CaptureSweepConfig& config);

}  // namespace detmac

#endif  // DETMAC_RADIO_H
