#pragma once

#include "mz/dynamics.hpp"

#include <optional>

namespace mz {

// Relative Frobenius errors with uniform quadrature weights. The kernel sum
// runs over lags 1..N_T-1: the lag-0 cell only carries a dt/2 (or dt) weight
// in the discrete memory sum and is first-order accurate by construction.
double error_K(const std::vector<Mat>& K, const std::vector<Mat>& Kref);
double error_R(const std::vector<Mat>& R, const std::vector<Mat>& Rref);
// Nodes 1..N_T; node 0 is the shared initial condition.
double error_Phi(const std::vector<Mat>& pred, const std::vector<Mat>& truth);

double error_K(const OperatorSequence& recon, const OperatorSequence& ref);
double error_R(const OperatorSequence& recon, const OperatorSequence& ref);

// Lag j of a coarse grid corresponds to lag j * stride on the fine grid.
std::vector<Mat> restrict_lags(const std::vector<Mat>& Kfine, int stride, int count = -1);

std::vector<std::optional<double>> convergence_rates(const std::vector<double>& errors);

enum class ReferenceKind { Analytic, SelfConvergence };

struct ErrorReport {
    double E_K = 0.0, E_R = 0.0, E_Phi = 0.0;
    std::optional<double> rate_K, rate_R;
    ReferenceKind reference = ReferenceKind::Analytic;
    Scheme quadrature = Scheme::Midpoint;
};

struct ConditioningReport {
    // kappa_2 of F^R_{n+1} = [Phi_{n+1}, PhiTilde_{n+1}] and its bound.
    std::vector<double> kappa_step, bound_step;
    double kappa_global = 0.0, bound_global = 0.0;
    double kappa_KB = 0.0, bound_KB = 0.0;
    double kappa_F0 = 0.0;
    // Extremal eigenvalues of (A + A^T)/2 on the refined grid.
    std::vector<double> t_fine, lambda_max, lambda_min;
    // Cumulative integrals at grid nodes.
    std::vector<double> I_max, I_min;
    int rank_F0 = 0;
    double sigma_min_noise = 0.0;
    int rank_KB = 0;
    bool assumption_i = false, assumption_ii = false, assumption_iii = false;

    // Steps with kappa above bound * (1 + rel_tol). Steps whose bound exceeds
    // `resolvable` are skipped: kappa beyond ~1/eps is not computable.
    int step_violations(double rel_tol = 1e-8, double resolvable = 1e14) const;
    int resolvable_steps(double resolvable = 1e14) const;
};

// slack widens every exponent integral by the given relative amount.
ConditioningReport conditioning_diagnostics(const SystemSpec& sys, const SnapshotEnsemble& ens, double slack = 0.0,
                                            bool global = true, double rank_tol = 1e-10, int refine = 10);

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::string markdown() const;
    std::string csv() const;
};

std::string fmt_sci(double v, int digits = 2);
std::string fmt_rate(const std::optional<double>& r);
// Values >= 1 render as ">= 1".
std::string fmt_clamped(double v);

}  // namespace mz
