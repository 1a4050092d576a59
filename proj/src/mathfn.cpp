#include "fedhunter/mathfn.hpp"

#include <cmath>

namespace fedhunter {

namespace {

constexpr double kTwoOverSqrtPi = 1.1283791670955125738961589031215;
constexpr double kOneOverSqrtPi = 0.56418958354775628694807945156077;

// erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
double erf_series(double x) {
    const double x2 = x * x;
    double term = x;
    double sum = x;
    for (int n = 1; n < 200; ++n) {
        term *= -x2 / n;
        const double add = term / (2 * n + 1);
        sum += add;
        if (std::fabs(add) <= 1e-18 * std::fabs(sum)) {
            break;
        }
    }
    return kTwoOverSqrtPi * sum;
}

// erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
// evaluated with the modified Lentz algorithm; converges quickly for x >= 3.
double erfc_tail(double x) {
    const double tiny = 1e-300;
    double f = x;
    double c = x;
    double d = 0.0;
    for (int n = 1; n < 300; ++n) {
        const double a = 0.5 * n;
        d = x + a * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = x + a / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = c * d;
        f *= delta;
        if (std::fabs(delta - 1.0) < 1e-17) {
            break;
        }
    }
    return kOneOverSqrtPi * std::exp(-x * x) / f;
}

}  // namespace

double erf_stable(double x) {
    const double ax = std::fabs(x);
    double r;
    if (ax < 3.0) {
        r = erf_series(ax);
    } else if (ax < 27.0) {
        r = 1.0 - erfc_tail(ax);
    } else {
        r = 1.0;  // erfc(27) < 1e-300
    }
    return x < 0.0 ? -r : r;
}

}  // namespace fedhunter
