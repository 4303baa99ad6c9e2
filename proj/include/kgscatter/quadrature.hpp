#pragma once

#include <functional>
#include <utility>
#include <vector>

namespace kgs {

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
};

// Adaptive Gauss-Kronrod (G7/K15) on a finite interval. tol is absolute.
QuadResult integrate(const std::function<double(double)>& f, double a, double b, double tol,
                     int max_depth = 20);

// Sum of adaptive integrals between consecutive breakpoints.
QuadResult integrate_pieces(const std::function<double(double)>& f,
                            const std::vector<double>& breakpoints, double tol);

// Integral over the whole real line through t = L tan(u).
QuadResult integrate_real_line(const std::function<double(double)>& f, double length_scale,
                               double tol, int max_depth = 24);

// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n);

// Richardson table for samples at h, h/2, h/4, ... of F(h) = F0 + c1 h + c2 h^2 + ...
// Returns the most extrapolated value and the difference of the last two diagonal entries.
std::pair<double, double> richardson(const std::vector<double>& samples, double ratio = 2.0,
                                     int first_order = 1);

}  // namespace kgs
