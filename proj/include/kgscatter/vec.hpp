#pragma once

#include <Eigen/Dense>
#include <cmath>

namespace kgs {

using Vec3 = Eigen::Vector3d;

// Deterministic unit vector orthogonal to v (v need not be normalized).
inline Vec3 any_perpendicular(const Vec3& v)
{
    const Vec3 n = v.normalized();
    Vec3 trial = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    Vec3 p = trial - trial.dot(n) * n;
    return p.normalized();
}

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

// Reduce an angle to [0, period).
inline double wrap_positive(double x, double period = kTwoPi)
{
    double r = std::fmod(x, period);
    if (r < 0) r += period;
    if (r >= period) r -= period;
    return r;
}

// Reduce to (-period/2, period/2].
inline double wrap_centered(double x, double period = kTwoPi)
{
    double r = wrap_positive(x, period);
    if (r > 0.5 * period) r -= period;
    return r;
}

}  // namespace kgs
