#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "signalcraft/mechanism.hpp"

namespace signalcraft {

struct Diagnostics {
    std::vector<std::string> notes;
    std::map<std::string, double> metrics;
};

struct DesignResult {
    std::optional<IntervalMechanism> mechanism;
    DirectMechanism direct;
    double value = 0.0;
    std::string regime;
    Diagnostics diagnostics;
};

}  // namespace signalcraft
