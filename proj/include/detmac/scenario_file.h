#ifndef DETMAC_SCENARIO_FILE_H
#define DETMAC_SCENARIO_FILE_H

#include <string>
#include <string_view>

#include "detmac/scenario.h"

namespace detmac {

/// Parses the sectioned scenario text. Every syntax problem is reported at
/// once through ScenarioError; semantic checks are left to validate().
Scenario parse_scenario(std::string_view text);

/// Canonical text form; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const Scenario& scenario);

/// Throws ScenarioError (line 0) when the file cannot be read.
Scenario load_scenario(const std::string& path);

/// Shortest text that reads back as the same double.
std::string format_double(double value);

}  // namespace detmac

#endif  // DETMAC_SCENARIO_FILE_H
