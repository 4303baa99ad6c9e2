#include "kgscatter/quadrature.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <queue>
#include <vector>

#include "kgscatter/errors.hpp"

namespace kgs {

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

struct Piece {
    double a, b, value, error;
    int depth;
    bool operator<(const Piece& o) const { return error < o.error; }
};

Piece rule(const std::function<double(double)>& f, double a, double b, int depth)
{
    double err = 0.0, l1 = 0.0;
    double val = GK::integrate(f, a, b, 0, 0.0, &err, &l1);
    // Below roundoff the estimate cannot improve; treat the piece as settled.
    if (err <= 64.0 * std::numeric_limits<double>::epsilon() * l1) err = 0.0;
    return {a, b, val, err, depth};
}

constexpr std::size_t kMaxPieces = 4000;

}  // namespace

// Global adaptive bisection: always split the piece with the largest error estimate.
QuadResult integrate(const std::function<double(double)>& f, double a, double b, double tol,
                     int max_depth)
{
    if (a == b) return {};
    // Pre-split so narrow features are not skipped by a single coarse rule.
    constexpr int kPieces = 8;
    std::priority_queue<Piece> open;
    std::vector<Piece> done;
    double total_err = 0.0;
    const double h = (b - a) / kPieces;
    for (int i = 0; i < kPieces; ++i) {
        const double lo = a + i * h, hi = (i + 1 == kPieces) ? b : lo + h;
        Piece p = rule(f, lo, hi, 0);
        total_err += p.error;
        if (p.error > 0.0) open.push(p);
        else done.push_back(p);
    }
    while (total_err > tol && !open.empty() && open.size() + done.size() < kMaxPieces) {
        Piece p = open.top();
        open.pop();
        if (p.depth >= max_depth) {
            done.push_back(p);
            continue;
        }
        const double m = 0.5 * (p.a + p.b);
        Piece l = rule(f, p.a, m, p.depth + 1), r = rule(f, m, p.b, p.depth + 1);
        total_err += l.error + r.error - p.error;
        for (const Piece& q : {l, r}) {
            if (q.error > 0.0) open.push(q);
            else done.push_back(q);
        }
    }
    QuadResult out;
    for (const auto& p : done) {
        out.value += p.value;
        out.error += p.error;
    }
    for (; !open.empty(); open.pop()) {
        out.value += open.top().value;
        out.error += open.top().error;
    }
    return out;
}

QuadResult integrate_pieces(const std::function<double(double)>& f,
                            const std::vector<double>& breakpoints, double tol)
{
    QuadResult out;
    if (breakpoints.size() < 2) return out;
    const double each = tol / (breakpoints.size() - 1);
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        QuadResult r = integrate(f, breakpoints[i], breakpoints[i + 1], each);
        out.value += r.value;
        out.error += r.error;
    }
    return out;
}

QuadResult integrate_real_line(const std::function<double(double)>& f, double length_scale,
                               double tol, int max_depth)
{
    const double L = length_scale;
    auto g = [&](double u) {
        double c = std::cos(u);
        double t = L * std::tan(u);
        double v = f(t);
        if (v == 0.0) return 0.0;
        return v * L / (c * c);
    };
    const double h = 0.5 * M_PI;
    return integrate(g, -h, h, tol, max_depth);
}

std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n)
{
    static std::mutex mu;
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    {
        std::lock_guard<std::mutex> lock(mu);
        auto it = cache.find(n);
        if (it != cache.end()) return it->second;
    }
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    std::lock_guard<std::mutex> lock(mu);
    cache[n] = {x, w};
    return {x, w};
}

std::pair<double, double> richardson(const std::vector<double>& samples, double ratio,
                                     int first_order)
{
    const std::size_t n = samples.size();
    if (n == 0) throw Error(ErrorKind::InvalidArgument, "richardson: no samples");
    if (n == 1) return {samples[0], std::numeric_limits<double>::infinity()};
    std::vector<std::vector<double>> T(n);
    for (std::size_t i = 0; i < n; ++i) {
        T[i].resize(i + 1);
        T[i][0] = samples[i];
        for (std::size_t k = 1; k <= i; ++k) {
            double f = std::pow(ratio, static_cast<double>(first_order + k - 1));
            T[i][k] = T[i][k - 1] + (T[i][k - 1] - T[i - 1][k - 1]) / (f - 1.0);
        }
    }
    double best = T[n - 1][n - 1];
    double diff = std::abs(T[n - 1][n - 1] - T[n - 2][n - 2]);
    return {best, diff};
}

}  // namespace kgs
