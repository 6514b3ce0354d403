#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace levymc::quad {

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Adaptive Gauss-Kronrod 15(7) on [a,b].
double gauss_kronrod(const std::function<double(double)>& f, double a, double b,
                     double rel_tol = 1e-10, double abs_tol = 1e-14, int max_depth = 60);

// Adaptive Simpson; independent rule used as the second arm of dual-quadrature
// oracles.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double rel_tol = 1e-10, double abs_tol = 1e-14, int max_depth = 60);

// \int_a^\infty f, via the substitution r = a + s/(1-s) on (0,1).
double semi_infinite(const std::function<double(double)>& f, double a,
                     double rel_tol = 1e-10);

// Sum_{n=1}^\infty f(n) for eventually geometrically decaying f; stops when the
// running tail bound drops below rel_tol * |sum|.
double series_sum(const std::function<double(int)>& f, double rel_tol = 1e-14,
                  int max_terms = 100000);

}  // namespace levymc::quad
