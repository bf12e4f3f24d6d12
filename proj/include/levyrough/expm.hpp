#pragma once

#include <Eigen/Dense>

#include <complex>

namespace levyrough {

using CMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

// Scaling and squaring with the degree-13 Pade approximant.
CMatrix expm(const CMatrix& A);
Eigen::MatrixXd expm(const Eigen::MatrixXd& A);

// Closed form for 2x2 via Cayley-Hamilton.
Eigen::Matrix2cd expm2(const Eigen::Matrix2cd& X);

double op_norm(const CMatrix& A);
double op_norm(const Eigen::MatrixXd& A);

} // namespace levyrough
