#pragma once

// Globally adaptive 15-point Gauss-Kronrod quadrature over a list of
// sub-intervals, in the spirit of QUADPACK's QAG: the interval with the largest
// error estimate is bisected until the summed error meets the tolerance.
//
// Interval edges flagged SqrtBranch get the substitution x = edge +/- h*t^2,
// which turns a square-root branch point (a light line) into a smooth
// integrand in t.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <queue>
#include <span>
#include <sstream>
#include <vector>

#include "speds/error.hpp"

namespace speds::quadrature {

enum class Edge : unsigned char { Regular, SqrtBranch };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    Edge lo_edge = Edge::Regular;
    Edge hi_edge = Edge::Regular;
};

struct Options {
    double relative_tolerance = 1e-10;
    double absolute_tolerance = 1e-14;
    std::size_t max_subdivisions = 50000;
};

struct Result {
    double value = 0.0;
    double error = 0.0;
    std::size_t evaluations = 0;
    std::size_t subdivisions = 0;
};

namespace detail {

// Kronrod abscissae (descending, last is the centre) and weights; every other
// abscissa is also a 7-point Gauss node.
inline constexpr std::array<double, 8> kXgk{
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk{
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg{
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
    double a = 0.0;  // in the substituted variable t
    double b = 0.0;
    double value = 0.0;
    double error = 0.0;
    std::size_t interval = 0;
};

struct ByError {
    bool operator()(const Piece& x, const Piece& y) const {
        if (x.error != y.error) return x.error < y.error;
        if (x.interval != y.interval) return x.interval > y.interval;
        return x.a > y.a;
    }
};

template <class G>
Piece gk15(G& g, double a, double b, std::size_t interval) {
    const double centre = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = g(centre);
    double kronrod = fc * kWgk[7];
    double gauss = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = half * kXgk[j];
        const double sum = g(centre - dx) + g(centre + dx);
        kronrod += kWgk[j] * sum;
        if (j % 2 == 1) gauss += kWg[j / 2] * sum;
    }
    Piece p;
    p.a = a;
    p.b = b;
    p.value = kronrod * half;
    p.error = std::abs((kronrod - gauss) * half);
    p.interval = interval;
    return p;
}

}  // namespace detail

template <class F>
Result integrate(F&& f, std::span<const Interval> intervals, const Options& options = {}) {
    // Split intervals with branch points at both ends so each piece carries at most one.
    std::vector<Interval> work;
    for (const auto& iv : intervals) {
        if (!(iv.hi > iv.lo)) continue;
        if (iv.lo_edge == Edge::SqrtBranch && iv.hi_edge == Edge::SqrtBranch) {
            const double mid = 0.5 * (iv.lo + iv.hi);
            work.push_back({iv.lo, mid, Edge::SqrtBranch, Edge::Regular});
            work.push_back({mid, iv.hi, Edge::Regular, Edge::SqrtBranch});
        } else {
            work.push_back(iv);
        }
    }

    Result result;
    auto transformed = [&](std::size_t k) {
        const Interval iv = work[k];
        const double h = iv.hi - iv.lo;
        return [&f, &result, iv, h](double t) {
            ++result.evaluations;
            if (iv.lo_edge == Edge::SqrtBranch) return f(iv.lo + h * t * t) * 2.0 * h * t;
            if (iv.hi_edge == Edge::SqrtBranch) {
                const double s = 1.0 - t;
                return f(iv.hi - h * s * s) * 2.0 * h * s;
            }
            return f(iv.lo + h * t) * h;
        };
    };

    std::priority_queue<detail::Piece, std::vector<detail::Piece>, detail::ByError> queue;
    std::vector<detail::Piece> settled;  // too narrow to split further
    double total = 0.0;
    double total_error = 0.0;
    for (std::size_t k = 0; k < work.size(); ++k) {
        auto g = transformed(k);
        auto p = detail::gk15(g, 0.0, 1.0, k);
        total += p.value;
        total_error += p.error;
        queue.push(p);
    }

    auto satisfied = [&] {
        return total_error <= std::max(options.absolute_tolerance, options.relative_tolerance * std::abs(total));
    };

    while (!satisfied() && !queue.empty()) {
        if (result.subdivisions >= options.max_subdivisions) break;
        const detail::Piece worst = queue.top();
        queue.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e-14) {
            settled.push_back(worst);
            continue;
        }
        auto g = transformed(worst.interval);
        const auto left = detail::gk15(g, worst.a, mid, worst.interval);
        const auto right = detail::gk15(g, mid, worst.b, worst.interval);
        total += left.value + right.value - worst.value;
        total_error += left.error + right.error - worst.error;
        queue.push(left);
        queue.push(right);
        ++result.subdivisions;
    }

    // Re-sum in a fixed order so the result does not carry the update history.
    std::vector<detail::Piece> all = std::move(settled);
    while (!queue.empty()) {
        all.push_back(queue.top());
        queue.pop();
    }
    std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) {
        return x.interval != y.interval ? x.interval < y.interval : x.a < y.a;
    });
    result.value = 0.0;
    result.error = 0.0;
    for (const auto& p : all) {
        result.value += p.value;
        result.error += p.error;
    }

    const double allowed = std::max(options.absolute_tolerance, options.relative_tolerance * std::abs(result.value));
    if (!std::isfinite(result.value) || result.error > 10.0 * allowed) {
        const auto worst = std::max_element(all.begin(), all.end(),
                                            [](const auto& x, const auto& y) { return x.error < y.error; });
        std::ostringstream msg;
        msg << std::setprecision(12) << "adaptive quadrature did not converge: value " << result.value << ", error "
            << result.error << " (allowed " << allowed << ") after " << result.subdivisions << " subdivisions";
        if (worst != all.end()) {
            const auto& iv = work[worst->interval];
            msg << "; worst piece in [" << iv.lo << ", " << iv.hi << "] at t in [" << worst->a << ", " << worst->b
                << "] with error " << worst->error;
        }
        throw NumericalFailure(msg.str());
    }
    return result;
}

template <class F>
Result integrate(F&& f, double lo, double hi, const Options& options = {}) {
    const Interval iv{lo, hi};
    return integrate(std::forward<F>(f), std::span<const Interval>(&iv, 1), options);
}

}  // namespace speds::quadrature
