#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "numerics.hpp"

namespace prandtl {

/// Chebyshev differentiation matrix on the Gauss-Lobatto points x_j = cos(pi j / N).
inline Eigen::MatrixXd chebyshev_D(int N, Eigen::VectorXd& x)
{
    x.resize(N + 1);
    for (int j = 0; j <= N; ++j)
        x(j) = std::cos(pi * j / N);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(N + 1, N + 1);
    auto c = [N](int j) { return (j == 0 || j == N) ? 2.0 : 1.0; };
    for (int i = 0; i <= N; ++i)
        for (int j = 0; j <= N; ++j)
            if (i != j)
                D(i, j) = c(i) / c(j) * ((i + j) % 2 ? -1.0 : 1.0) / (x(i) - x(j));
    for (int i = 0; i <= N; ++i)
        D(i, i) = -D.row(i).sum();
    return D;
}

struct CollocationResult {
    cplx tau_tilde;
    int iterations;
    double last_step;
};

/// Independent check of tau~: Chebyshev collocation of the X equation on [-L, L] with
/// X(+-L) = 0. The quadratic eigenproblem in tau~ is linearised and solved densely; the
/// eigenvalue nearest `guess` is then polished by Newton on det A(tau~).
inline CollocationResult collocation_tau(cplx guess, int N = 160, double L = 9.0, int max_iter = 20)
{
    Eigen::VectorXd x;
    Eigen::MatrixXd D = chebyshev_D(N, x) / L;
    Eigen::MatrixXd D2 = D * D;
    const int n = N - 1; // interior unknowns
    Eigen::VectorXcd z = (L * x.segment(1, n)).cast<cplx>();
    Eigen::MatrixXcd D1i = D.block(1, 1, n, n).cast<cplx>();
    Eigen::MatrixXcd D2i = D2.block(1, 1, n, n).cast<cplx>();
    Eigen::MatrixXcd Zd = z.asDiagonal();

    // tau^2 A2 + tau A1 + A0, A2 = Id
    Eigen::MatrixXcd A0 = -I * Zd * Zd * D2i - 6.0 * I * Zd * D1i;
    for (int i = 0; i < n; ++i)
        A0(i, i) += std::pow(z(i), 4) - 6.0 * I;
    Eigen::MatrixXcd A1 = I * D2i - Zd * Zd * 2.0;
    Eigen::MatrixXcd C = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
    C.block(0, n, n, n).setIdentity();
    C.block(n, 0, n, n) = -A0;
    C.block(n, n, n, n) = -A1;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(C, false);
    if (es.info() != Eigen::Success)
        throw Error(Errc::newton_diverged, "collocation eigen-solve failed");
    cplx tau = es.eigenvalues()(0);
    for (int i = 1; i < 2 * n; ++i)
        if (std::abs(es.eigenvalues()(i) - guess) < std::abs(tau - guess))
            tau = es.eigenvalues()(i);

    double step = INFINITY;
    for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXcd A = A0 + tau * A1;
        Eigen::MatrixXcd At = A1;
        for (int i = 0; i < n; ++i) {
            A(i, i) += tau * tau;
            At(i, i) += 2.0 * tau;
        }
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(A);
        const cplx dtau = 1.0 / lu.solve(At).trace();
        step = std::abs(dtau);
        if (!std::isfinite(step) || step > 1e-2)
            break;
        tau -= dtau;
        if (step < 1e-14)
            return {tau, it + 1, step};
    }
    return {tau, max_iter, step};
}

} // namespace prandtl
