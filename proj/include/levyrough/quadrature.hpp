#pragma once

#include <Eigen/Dense>

namespace levyrough {

struct QuadratureRule {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

// Golub-Welsch. Legendre on [-1, 1]; Hermite for the standard normal law.
QuadratureRule gauss_legendre(int n);
QuadratureRule gauss_hermite_normal(int n);

} // namespace levyrough
