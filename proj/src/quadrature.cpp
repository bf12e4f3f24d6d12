#include "levyrough/quadrature.hpp"

#include "levyrough/errors.hpp"

#include <cmath>

namespace levyrough {

namespace {

QuadratureRule golub_welsch(const Eigen::VectorXd& offdiag, double mu0) {
    const Eigen::Index n = offdiag.size() + 1;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) J(i, i + 1) = J(i + 1, i) = offdiag[i];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
    QuadratureRule q;
    q.nodes = es.eigenvalues();
    q.weights = mu0 * es.eigenvectors().row(0).transpose().array().square();
    return q;
}

} // namespace

QuadratureRule gauss_legendre(int n) {
    if (n < 1) throw ValidationError("quadrature order must be positive");
    Eigen::VectorXd b(n - 1);
    for (int k = 1; k < n; ++k) b[k - 1] = k / std::sqrt(4.0 * k * k - 1.0);
    return golub_welsch(b, 2.0);
}

QuadratureRule gauss_hermite_normal(int n) {
    if (n < 1) throw ValidationError("quadrature order must be positive");
    // probabilists' Hermite recurrence, weight exp(-x^2/2)/sqrt(2 pi)
    Eigen::VectorXd b(n - 1);
    for (int k = 1; k < n; ++k) b[k - 1] = std::sqrt(static_cast<double>(k));
    return golub_welsch(b, 1.0);
}

} // namespace levyrough
