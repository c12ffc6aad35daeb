#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "stableou/errors.hpp"

namespace stableou::detail {

// QUADPACK qk21 abscissae/weights. The 10-point Gauss rule uses the odd Kronrod nodes.
inline constexpr std::array<double, 11> gk21_nodes = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
inline constexpr std::array<double, 11> gk21_kronrod_weights = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525584425, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> gk21_gauss_weights = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651146};

// 4-point Gauss-Legendre on [-1, 1].
inline constexpr std::array<double, 4> gl4_nodes = {-0.86113631159405257522, -0.33998104358485626480,
                                                    0.33998104358485626480, 0.86113631159405257522};
inline constexpr std::array<double, 4> gl4_weights = {0.34785484513745385737, 0.65214515486254614263,
                                                      0.65214515486254614263, 0.34785484513745385737};

/// A flattened quadrature rule: nodes and weights on some interval.
struct Rule {
    std::vector<double> nodes;
    std::vector<double> weights;

    std::size_t size() const { return nodes.size(); }

    void append_gk21(double a, double b) {
        const double c = 0.5 * (a + b), r = 0.5 * (b - a);
        for (std::size_t i = 0; i < 10; ++i) {
            nodes.push_back(c - r * gk21_nodes[i]);
            weights.push_back(r * gk21_kronrod_weights[i]);
            nodes.push_back(c + r * gk21_nodes[i]);
            weights.push_back(r * gk21_kronrod_weights[i]);
        }
        nodes.push_back(c);
        weights.push_back(r * gk21_kronrod_weights[10]);
    }
};

/// Adaptive Gauss-Kronrod integration of a vector-valued integrand over a list of
/// initial panels. `Fn(double x, double* out)` writes `M` values.
///
/// The per-panel error estimate is the QUADPACK heuristic
/// `mag * min(1, (200 |K - G| / mag)^1.5)`. A panel is accepted when it is below
/// `abs_tol + rel_tol * mag` for every component; otherwise it is bisected, down
/// to `max_depth` levels.
template <std::size_t M, class Fn>
std::array<double, M> integrate_panels(Fn&& fn, const std::vector<double>& breaks, double abs_tol,
                                       double rel_tol, int max_depth = 30) {
    std::array<double, M> total{};
    struct Panel {
        double a, b;
        int depth;
    };
    std::vector<Panel> stack;
    for (std::size_t i = breaks.size(); i-- > 1;) stack.push_back({breaks[i - 1], breaks[i], 0});

    std::array<double, M> fl{}, fr{};
    while (!stack.empty()) {
        const Panel p = stack.back();
        stack.pop_back();
        const double c = 0.5 * (p.a + p.b), r = 0.5 * (p.b - p.a);
        std::array<double, M> kron{}, gauss{}, mag{};
        fn(c, fl.data());
        for (std::size_t m = 0; m < M; ++m) {
            kron[m] = gk21_kronrod_weights[10] * fl[m];
            mag[m] = gk21_kronrod_weights[10] * std::abs(fl[m]);
        }
        for (std::size_t i = 0; i < 10; ++i) {
            fn(c - r * gk21_nodes[i], fl.data());
            fn(c + r * gk21_nodes[i], fr.data());
            for (std::size_t m = 0; m < M; ++m) {
                const double s = fl[m] + fr[m];
                kron[m] += gk21_kronrod_weights[i] * s;
                mag[m] += gk21_kronrod_weights[i] * (std::abs(fl[m]) + std::abs(fr[m]));
                if (i % 2 == 1) gauss[m] += gk21_gauss_weights[i / 2] * s;
            }
        }
        bool ok = true;
        for (std::size_t m = 0; m < M; ++m) {
            const double scale = r * mag[m];
            double err = r * std::abs(kron[m] - gauss[m]);
            if (scale > 0.0) err = scale * std::min(1.0, std::pow(200.0 * err / scale, 1.5));
            if (!(err <= abs_tol + rel_tol * scale)) ok = false;
        }
        if (ok) {
            for (std::size_t m = 0; m < M; ++m) total[m] += r * kron[m];
        } else if (p.depth >= max_depth) {
            throw AccuracyError("adaptive quadrature did not converge on panel [" + std::to_string(p.a) +
                                ", " + std::to_string(p.b) + "]");
        } else {
            stack.push_back({c, p.b, p.depth + 1});
            stack.push_back({p.a, c, p.depth + 1});
        }
    }
    return total;
}

}  // namespace stableou::detail
