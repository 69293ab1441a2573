#include "mz/metrics.hpp"
#include "mz/linalg.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace mz {

namespace {

double ratio(double num, double den)
{
    if (!(den > 0.0)) throw std::domain_error("relative error undefined: reference has zero norm");
    return std::sqrt(num / den);
}

}  // namespace

double error_K(const std::vector<Mat>& K, const std::vector<Mat>& Kref)
{
    if (K.size() != Kref.size()) throw ShapeError("error_K: sequence lengths differ");
    double num = 0.0, den = 0.0;
    for (size_t j = 1; j < K.size(); ++j) {
        num += (K[j] - Kref[j]).squaredNorm();
        den += Kref[j].squaredNorm();
    }
    return ratio(num, den);
}

double error_R(const std::vector<Mat>& R, const std::vector<Mat>& Rref)
{
    if (R.size() != Rref.size()) throw ShapeError("error_R: sequence lengths differ");
    double num = 0.0, den = 0.0;
    for (size_t n = 0; n < R.size(); ++n) {
        num += (R[n] - Rref[n]).squaredNorm();
        den += Rref[n].squaredNorm();
    }
    return ratio(num, den);
}

double error_Phi(const std::vector<Mat>& pred, const std::vector<Mat>& truth)
{
    if (pred.size() != truth.size()) throw ShapeError("error_Phi: trajectory lengths differ");
    double num = 0.0, den = 0.0;
    for (size_t n = 1; n < pred.size(); ++n) {
        if (pred[n].rows() != truth[n].rows() || pred[n].cols() != truth[n].cols()) throw ShapeError("error_Phi: shape mismatch");
        num += (pred[n] - truth[n]).squaredNorm();
        den += truth[n].squaredNorm();
    }
    return ratio(num, den);
}

double error_K(const OperatorSequence& recon, const OperatorSequence& ref)
{
    if (recon.grid.NT != ref.grid.NT) throw ShapeError("error_K: grids differ");
    return error_K(recon.K, ref.K);
}

double error_R(const OperatorSequence& recon, const OperatorSequence& ref)
{
    if (recon.grid.NT != ref.grid.NT || recon.scheme != ref.scheme) throw ShapeError("error_R: grids or node conventions differ");
    return error_R(recon.R, ref.R);
}

std::vector<Mat> restrict_lags(const std::vector<Mat>& Kfine, int stride, int count)
{
    if (stride < 1) throw std::invalid_argument("restrict_lags: stride must be positive");
    if (count < 0) {
        if (Kfine.size() % stride != 0) throw std::invalid_argument("restrict_lags: stride must divide the lag count");
        count = static_cast<int>(Kfine.size()) / stride;
    }
    if (count > 0 && static_cast<size_t>(count - 1) * stride >= Kfine.size()) throw std::invalid_argument("restrict_lags: not enough fine lags");
    std::vector<Mat> out;
    for (int j = 0; j < count; ++j) out.push_back(Kfine[static_cast<size_t>(j) * stride]);
    return out;
}

std::vector<std::optional<double>> convergence_rates(const std::vector<double>& e)
{
    std::vector<std::optional<double>> r;
    for (size_t i = 0; i + 1 < e.size(); ++i) {
        if (e[i] > 0.0 && e[i + 1] > 0.0)
            r.push_back(std::log2(e[i] / e[i + 1]));
        else
            r.push_back(std::nullopt);
    }
    return r;
}

ConditioningReport conditioning_diagnostics(const SystemSpec& sys, const SnapshotEnsemble& ens, double slack, bool global,
                                            double rank_tol, int refine)
{
    if (ens.mode != Observation::Full) throw std::invalid_argument("conditioning diagnostics need full observation data");
    ConditioningReport rep;
    const int NT = ens.grid.NT;
    const double dt = ens.grid.dt();

    auto full = [&](int n) {
        Mat F(ens.Ns, ens.d + ens.d_tilde);
        F << ens.Phi[n], ens.PhiTilde[n];
        return F;
    };
    auto svals = [](const Mat& F) { return singular_values(F); };

    Mat F0 = full(0);
    Vec s0 = svals(F0);
    rep.kappa_F0 = s0[0] / s0[s0.size() - 1];
    for (Eigen::Index i = 0; i < s0.size(); ++i)
        if (s0[i] >= rank_tol * s0[0]) ++rep.rank_F0;
    rep.assumption_i = rep.rank_F0 == F0.cols() && F0.rows() >= F0.cols();

    Mat noise = ens.PhiTilde[0];
    if (ens.forced()) noise += dt * ens.GTilde[0];
    Vec sn = svals(noise);
    rep.sigma_min_noise = noise.cols() > noise.rows() ? 0.0 : sn[sn.size() - 1];
    rep.assumption_ii = rep.sigma_min_noise > rank_tol * sn[0];
    Mat KB0(ens.Ns, ens.d + ens.d_tilde);
    KB0 << ens.Phi[0], noise;
    Vec sk0 = svals(KB0);
    for (Eigen::Index i = 0; i < sk0.size(); ++i)
        if (sk0[i] >= rank_tol * sk0[0]) ++rep.rank_KB;
    rep.assumption_iii = rep.rank_KB == KB0.cols();

    // lambda(H) on a refined grid, cumulative trapezoid integrals at the nodes.
    const int M = refine * NT;
    const double h = dt / refine;
    auto eig = [&](double t) {
        Mat A = sys.A(t);
        Mat H = 0.5 * (A + A.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> es(H, Eigen::EigenvaluesOnly);
        return std::make_pair(es.eigenvalues()[H.rows() - 1], es.eigenvalues()[0]);
    };
    std::pair<double, double> fixed{0.0, 0.0};
    if (sys.time_invariant) fixed = eig(0.0);
    for (int i = 0; i <= M; ++i) {
        double t = i * h;
        auto lm = sys.time_invariant ? fixed : eig(t);
        rep.t_fine.push_back(t);
        rep.lambda_max.push_back(lm.first);
        rep.lambda_min.push_back(lm.second);
    }
    rep.I_max.assign(NT + 1, 0.0);
    rep.I_min.assign(NT + 1, 0.0);
    double imax = 0.0, imin = 0.0;
    for (int i = 1; i <= M; ++i) {
        imax += 0.5 * h * (rep.lambda_max[i - 1] + rep.lambda_max[i]);
        imin += 0.5 * h * (rep.lambda_min[i - 1] + rep.lambda_min[i]);
        if (i % refine == 0) {
            rep.I_max[i / refine] = imax;
            rep.I_min[i / refine] = imin;
        }
    }
    auto up = [slack](double x) { return x + slack * std::abs(x); };
    auto down = [slack](double x) { return x - slack * std::abs(x); };

    for (int n = 0; n < NT; ++n) {
        Vec s = svals(full(n + 1));
        rep.kappa_step.push_back(s[s.size() - 1] > 0.0 ? s[0] / s[s.size() - 1] : std::numeric_limits<double>::infinity());
        rep.bound_step.push_back(rep.kappa_F0 * std::exp(up(rep.I_max[n + 1]) - down(rep.I_min[n + 1])));
    }
    if (global) {
        Mat FR(static_cast<Eigen::Index>(NT) * ens.Ns, ens.d + ens.d_tilde);
        for (int n = 0; n < NT; ++n) FR.middleRows(static_cast<Eigen::Index>(n) * ens.Ns, ens.Ns) = full(n + 1);
        Vec s = svals(FR);
        rep.kappa_global = s[0] / s[s.size() - 1];
        // Sums of exponentials evaluated relative to their largest term.
        double amax = -std::numeric_limits<double>::infinity(), amin = amax;
        for (int n = 1; n <= NT; ++n) {
            amax = std::max(amax, 2.0 * up(rep.I_max[n]));
            amin = std::max(amin, 2.0 * down(rep.I_min[n]));
        }
        double num = 0.0, den = 0.0;
        for (int n = 1; n <= NT; ++n) {
            num += std::exp(2.0 * up(rep.I_max[n]) - amax);
            den += std::exp(2.0 * down(rep.I_min[n]) - amin);
        }
        rep.bound_global = rep.kappa_F0 * std::sqrt(num / den) * std::exp(0.5 * (amax - amin));
    }
    Mat KB(ens.Ns, ens.d + ens.d_tilde);
    KB << ens.Phi[1], noise;
    Vec sk = svals(KB);
    rep.kappa_KB = sk[0] / sk[sk.size() - 1];
    rep.bound_KB = rep.kappa_F0 * std::max(std::exp(up(rep.I_max[1])), 1.0) / std::min(std::exp(down(rep.I_min[1])), 1.0);
    return rep;
}

int ConditioningReport::step_violations(double rel_tol, double resolvable) const
{
    int v = 0;
    for (size_t n = 0; n < kappa_step.size(); ++n)
        if (bound_step[n] <= resolvable && kappa_step[n] > bound_step[n] * (1.0 + rel_tol)) ++v;
    return v;
}

int ConditioningReport::resolvable_steps(double resolvable) const
{
    int c = 0;
    for (double b : bound_step)
        if (b <= resolvable) ++c;
    return c;
}

std::string Table::markdown() const
{
    std::ostringstream os;
    os << "|";
    for (const auto& h : header) os << " " << h << " |";
    os << "\n|";
    for (size_t i = 0; i < header.size(); ++i) os << "---|";
    os << "\n";
    for (const auto& r : rows) {
        os << "|";
        for (const auto& c : r) os << " " << c << " |";
        os << "\n";
    }
    return os.str();
}

std::string Table::csv() const
{
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& v) {
        for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
        os << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return os.str();
}

std::string fmt_sci(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*e", digits, v);
    return buf;
}

std::string fmt_rate(const std::optional<double>& r)
{
    if (!r) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *r);
    return buf;
}

std::string fmt_clamped(double v)
{
    if (!(v < 1.0)) return ">= 1";
    return fmt_sci(v);
}

}  // namespace mz
