#pragma once

#include <functional>

#include "kgscatter/errors.hpp"
#include "kgscatter/geometry.hpp"
#include "kgscatter/potentials.hpp"

namespace kgs::testing {

inline Obstacle unit_torus()
{
    return Obstacle({}, {Torus{Vec3::Zero(), Vec3::UnitZ(), 2.0, 0.5}});
}

inline ErrorKind kind_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::Config;
}

// lambda_inf(v) = v_z
inline SpherePolynomial pz() { return SpherePolynomial{{{1.0, 0, 0, 1}}}; }

}  // namespace kgs::testing
