#ifndef DETMAC_CAPTURE_EVIDENCE_H
#define DETMAC_CAPTURE_EVIDENCE_H

#include <optional>

#include "detmac/core.h"

namespace detmac {

/// One coordinator's measurement of its own leaf against the other star's leaf,
/// both observed while transmitting alone in their individual GTS.
struct CaptureMeasurement {
    NodeId coordinator{};
    NodeId own_leaf{};
    NodeId other_leaf{};
    double own_dbm = 0.0;
    double other_dbm = 0.0;
    double margin_db = 0.0;
    SuperframeCounter measured_at = 0;

    double delta_db() const { return own_dbm - other_dbm; }
    /// PF_own > PF_other + margin.
    bool satisfied() const { return delta_db() > margin_db; }

    friend bool operator==(const CaptureMeasurement&, const CaptureMeasurement&) = default;
};

/// Two-sided certificate that two leaves of distinct stars may share a slot
/// instance. The proposer measured first; the confirmer repeated the test.
struct CaptureEvidence {
    std::optional<CaptureMeasurement> proposer;
    std::optional<CaptureMeasurement> confirmer;

    bool two_sided() const { return proposer.has_value() && confirmer.has_value(); }

    /// Both sides present, consistent, satisfied with the same margin, and
    /// measured no more than freshness_window superframes before now.
    bool valid(SuperframeCounter now, SuperframeCounter freshness_window) const;

    friend bool operator==(const CaptureEvidence&, const CaptureEvidence&) = default;
};

}  // namespace detmac

#endif  // DETMAC_CAPTURE_EVIDENCE_H
