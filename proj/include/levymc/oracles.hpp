#pragma once

#include <Eigen/Core>

#include "levymc/rng.hpp"

// Exact-law oracles used by tests and the exact arms of experiments. The path
// integrator never touches these.
namespace levymc::oracle {

// K(d, alpha) with psi(u) = c_r * K(d,alpha) * |u|^alpha for the isotropic
// measure with radial density c_r * r^(-alpha-1) and uniform directions.
double isotropic_psi_coefficient(int d, double alpha);

// Chambers-Mallows-Stuck: symmetric alpha-stable, E e^{iuX} = e^{-|u|^alpha}.
double cms_symmetric_stable(double alpha, PathRng& rng);

// Kanter: positive (index a) stable with E e^{-l A} = e^{-l^a}, 0 < a < 1.
double kanter_positive_stable(double a, PathRng& rng);

// Isotropic alpha-stable vector with E e^{i<u,X>} = exp(-c |u|^alpha)
// (d = 1 via CMS, d >= 2 via Gaussian subordination).
Eigen::VectorXd isotropic_stable_vector(double alpha, int d, double c, PathRng& rng);

// density at the origin of the law with characteristic function e^{-c|u|^alpha}
// on R^d: (2pi)^-d S_{d-1} Gamma(d/alpha) c^{-d/alpha} / alpha
double stable_density_at_zero(double alpha, int d, double c);

// 1-D density and CDF by Fourier quadrature (c as above)
double stable_density_1d(double x, double alpha, double c);
double stable_cdf_1d(double x, double alpha, double c);

// dual-quadrature evaluation (Gauss-Kronrod vs adaptive Simpson agreeing to
// rel_check) of int_0^1 (1-s) (1 + s(e^{-n alpha} - 1))^(-d/alpha) ds
double dilation_pair_integral(int n, double alpha, int d, double rel_check = 1e-8);

}  // namespace levymc::oracle
