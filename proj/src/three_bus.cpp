#include "dsse/three_bus.hpp"

#include <cmath>

namespace dsse {

ThreeBusReadings forward_3bus(const ThreeBusState& s, double B) {
    if (B <= 0.0) fail_input("three_bus: susceptance must be positive");
    ThreeBusReadings r;
    r.p12 = B * s.v1 * s.v2 * std::sin(s.th12);
    r.q12 = s.v1 * s.v1 - B * s.v1 * s.v2 * std::cos(s.th12);
    r.p13 = B * s.v1 * s.v3 * std::sin(s.th13);
    r.q13 = s.v1 * s.v1 - B * s.v1 * s.v3 * std::cos(s.th13);
    return r;
}

ThreeBusState inverse_3bus(double p12, double p13, double v1, double v2,
                           double v3, double B) {
    if (B <= 0.0) fail_input("three_bus: susceptance must be positive");
    if (v1 <= 0.0 || v2 <= 0.0 || v3 <= 0.0)
        fail_input("three_bus: magnitudes must be positive");
    ThreeBusState s;
    s.v1 = v1;
    s.v2 = v2;
    s.v3 = v3;
    const double a12 = p12 / (B * v1 * v2);
    const double a13 = p13 / (B * v1 * v3);
    if (std::abs(a12) > 1.0 || std::abs(a13) > 1.0)
        fail_numeric("three_bus: flow outside the reachable band");
    s.th12 = std::asin(a12);
    s.th13 = std::asin(a13);
    return s;
}

} // namespace dsse
