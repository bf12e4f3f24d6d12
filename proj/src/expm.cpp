#include "levyrough/expm.hpp"

#include <cmath>

namespace levyrough {

namespace {

constexpr double kTheta13 = 5.371920351148152;
constexpr double kPade13[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                              1187353796428800.0,  129060195264000.0,   10559470521600.0,
                              670442572800.0,      33522128640.0,       1323241920.0,
                              40840800.0,          960960.0,            16380.0,
                              182.0,               1.0};

template <class Mat>
Mat expm_pade13(const Mat& A0) {
    const Eigen::Index n = A0.rows();
    const double norm1 = A0.cwiseAbs().colwise().sum().maxCoeff();
    int s = 0;
    if (norm1 > kTheta13) s = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    const Mat A = A0 / std::ldexp(1.0, s);
    const Mat I = Mat::Identity(n, n);
    const Mat A2 = A * A;
    const Mat A4 = A2 * A2;
    const Mat A6 = A4 * A2;
    const double* b = kPade13;
    const Mat U = A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    const Mat V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
    Mat R = (V - U).partialPivLu().solve(V + U);
    for (int k = 0; k < s; ++k) R = R * R;
    return R;
}

} // namespace

CMatrix expm(const CMatrix& A) {
    if (A.rows() == 2) return expm2(A);
    return expm_pade13(A);
}

Eigen::MatrixXd expm(const Eigen::MatrixXd& A) { return expm_pade13(A); }

Eigen::Matrix2cd expm2(const Eigen::Matrix2cd& X) {
    const Complex mu = 0.5 * (X(0, 0) + X(1, 1));
    Eigen::Matrix2cd Y = X;
    Y(0, 0) -= mu;
    Y(1, 1) -= mu;
    // Y^2 = s^2 I
    const Complex s2 = Y(0, 0) * Y(0, 0) + Y(0, 1) * Y(1, 0);
    const Complex s = std::sqrt(s2);
    Complex ch, sh;
    if (std::abs(s) < 1e-4) {
        ch = 1.0 + s2 / 2.0 + s2 * s2 / 24.0 + s2 * s2 * s2 / 720.0;
        sh = 1.0 + s2 / 6.0 + s2 * s2 / 120.0 + s2 * s2 * s2 / 5040.0;
    } else {
        ch = std::cosh(s);
        sh = std::sinh(s) / s;
    }
    const Complex e = std::exp(mu);
    Eigen::Matrix2cd R;
    R(0, 0) = e * (ch + sh * Y(0, 0));
    R(0, 1) = e * sh * Y(0, 1);
    R(1, 0) = e * sh * Y(1, 0);
    R(1, 1) = e * (ch + sh * Y(1, 1));
    return R;
}

double op_norm(const CMatrix& A) {
    if (A.size() == 0) return 0.0;
    Eigen::JacobiSVD<CMatrix> svd(A);
    return svd.singularValues()(0);
}

double op_norm(const Eigen::MatrixXd& A) {
    if (A.size() == 0) return 0.0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    return svd.singularValues()(0);
}

} // namespace levyrough
