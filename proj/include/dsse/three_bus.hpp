#pragma once

#include "dsse/common.hpp"

namespace dsse {

// Closed-form companion model: a lossless star with bus 1 feeding buses 2
// and 3 through pure reactances of susceptance magnitude B.

struct ThreeBusState {
    double v1 = 1.0, v2 = 1.0, v3 = 1.0; // magnitudes
    double th12 = 0.0, th13 = 0.0;       // theta_1 - theta_j, radians
};

struct ThreeBusReadings {
    double p12 = 0.0, q12 = 0.0;
    double p13 = 0.0, q13 = 0.0;
};

//   P_1j = B |v1| |vj| sin(theta_1j)
//   Q_1j = |v1|^2 - B |v1| |vj| cos(theta_1j)
ThreeBusReadings forward_3bus(const ThreeBusState& s, double B);

// Recovers the angles from the active flows and known magnitudes.  Flows
// outside the +-B |v1| |vj| reachable band raise a numeric error.
ThreeBusState inverse_3bus(double p12, double p13, double v1, double v2,
                           double v3, double B);

} // namespace dsse
