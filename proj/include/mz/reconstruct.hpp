#pragma once

#include "mz/linalg.hpp"

namespace mz {

enum class DerivativeSource {
    Difference,  // (Phi_{n+1} - Phi_n) / dt, consistent with the time-marching scheme
    Exact        // stored right-hand-side values, averaged to half nodes for midpoint
};

struct SolveOptions {
    Scheme scheme = Scheme::Midpoint;
    DerivativeSource derivative = DerivativeSource::Difference;
    double rank_tol = 1e-10;
};

// Node sampling and quadrature weights of a time-marching scheme.
struct SchemeRules {
    double theta;   // weight of phi_{n+1} in the equation-node state
    double c0;      // quadrature weight of the lag-0 kernel cell
    double alpha0;  // weight of dt * gTilde_0 in the noise column at n = 0
    double alpha;   // same for n >= 1
    int hist_e0;    // first B node entering the forcing history sum
    bool has_K0;    // false when the lag-0 kernel never appears
};

SchemeRules scheme_rules(Scheme s);

// Equation-node view of an ensemble: S_n is the resolved state where the
// n-th discrete equation is enforced, Zr_n = derivative - forcing there.
class EquationData {
public:
    EquationData(const SnapshotEnsemble& ens, const SolveOptions& opt);

    int NT() const { return NT_; }
    int Ns() const { return Ns_; }
    int d() const { return d_; }
    int d_tilde() const { return dtl_; }
    double dt() const { return dt_; }
    const SchemeRules& rules() const { return rules_; }
    bool forced() const { return forced_; }

    Mat S(int n) const;
    Mat S_tilde(int n) const;
    const Mat& Zr(int n) const { return Zr_[n]; }
    Mat init(int n) const;
    const Mat& phi_tilde0() const { return ens_.PhiTilde.front(); }

    // sum_{j=1}^{jmax} S_{n-j} Y_j^T with Ystack blocks Y_j^T at rows j*d.
    Mat memory_history(int n, int jmax, const Mat& Ystack) const;
    // dt * sum_{e=e0}^{n-1} gTilde_{n-e} B_e^T with Bstack blocks B_e^T at rows e*d_tilde.
    Mat noise_history(int n, const Mat& Bstack) const;

    const Mat& S_reversed() const { return Srev_; }

private:
    const SnapshotEnsemble& ens_;
    SolveOptions opt_;
    SchemeRules rules_;
    int NT_, Ns_, d_, dtl_;
    double dt_;
    bool forced_;
    Mat Srev_;   // [S_{NT-1}, ..., S_0]
    Mat GTrev_;  // [gTilde_{NT}, ..., gTilde_0]
    std::vector<Mat> Zr_;
};

struct RSolution {
    std::vector<Mat> R;
    std::vector<Mat> Rtilde;
    std::vector<LsDiagnostics> diag;
};

enum class SolveMode { Full, Partial, PartialRegularized, FiniteMemory };
std::string to_string(SolveMode m);

struct ReconstructionReport {
    OperatorSequence ops;
    SolveMode mode = SolveMode::Full;
    std::vector<LsDiagnostics> steps;   // per-step design diagnostics
    std::vector<double> residuals;      // per-step ||Z - F X||_F
    LsDiagnostics kb_design;            // reused greedy design matrix (full data)
    int lsqr_iterations = 0;
    double lambda_R = 0.0;
    double lambda_K = 0.0;
    int m_support = -1;
    bool rank_deficient = false;
};

RSolution solve_R_per_step(const SnapshotEnsemble& ens, const SolveOptions& opt = {});
RSolution solve_R_global(const SnapshotEnsemble& ens, const SolveOptions& opt = {});

ReconstructionReport solve_KB_greedy(const SnapshotEnsemble& ens, const std::vector<Mat>& R, const SolveOptions& opt = {});

// Full-data pipeline: global R for time-invariant data, per-step otherwise.
ReconstructionReport reconstruct_full(const SnapshotEnsemble& ens, bool global_R, const SolveOptions& opt = {});

ReconstructionReport solve_partial_greedy(const SnapshotEnsemble& ens, bool merge_R_into_K0, const SolveOptions& opt = {});

// scaled_kernel_penalty: penalise dt*K differences (the unknown blocks of the
// design matrix) rather than K differences.
ReconstructionReport solve_partial_regularized(const SnapshotEnsemble& ens, double lambda_R, double lambda_K,
                                               const SolveOptions& opt = {}, bool scaled_kernel_penalty = true);

// Global operator [Diag(PhiTilde_0) F^trunc] for lag bound m; unknown
// ordering [B_0^T; ...; B_{NT-1}^T; (dt K_{j0})^T; ...; (dt K_m)^T].
struct FiniteMemoryProblem {
    LinearOperator op;
    Mat rhs;
    Vec col_norms;  // Euclidean norm of every column of the operator
    int m = 0;
    int j0 = 0;
};
FiniteMemoryProblem finite_memory_problem(const EquationData& eq, const std::vector<Mat>& R, int m);

// precondition: LSQR runs on the operator times a block-diagonal right
// preconditioner (inverse triangular factor of PhiTilde_0 on every B block,
// unit column norms on the kernel block); the iterate is mapped back.
ReconstructionReport solve_finite_memory(const SnapshotEnsemble& ens, const std::vector<Mat>& R, int m, int max_iter,
                                         const SolveOptions& opt = {}, double atol = 1e-14, bool precondition = true);
// Same problem, materialised and solved by the dense minimum-norm solver.
ReconstructionReport solve_finite_memory_dense(const SnapshotEnsemble& ens, const std::vector<Mat>& R, int m,
                                               const SolveOptions& opt = {});

// Numerical rank of [PhiTilde_0, S_0, ..., S_n] for n = 0..n_max.
std::vector<LsDiagnostics> demo_nonstationary_illposedness(const SnapshotEnsemble& ens, int n_max, const SolveOptions& opt = {});

}  // namespace mz
