#include "ls_instances.hpp"
#include "mz/experiment.hpp"
#include "mz/oracle.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace mz;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

const std::string kConfigDir = std::string(MZ_SOURCE_DIR) + "/configs/";

ExperimentConfig load_case(const std::string& file, const std::string& label, bool ladder)
{
    for (auto& c : load_configs(kConfigDir + file)) {
        if (c.case_label != label) continue;
        finalize(c, ladder);
        return c;
    }
    throw std::runtime_error("no " + label + " entry in " + file);
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool in_range(double v, double lo, double hi) { return v >= lo && v <= hi; }

// Convergence results are shared between the first two criteria.
std::map<std::string, std::pair<ConvergenceResult, double>> g_convergence;

const std::pair<ConvergenceResult, double>& convergence(const std::string& file, const std::string& label)
{
    auto it = g_convergence.find(label);
    if (it != g_convergence.end()) return it->second;
    auto cfg = load_case(file, label, true);
    auto t0 = std::chrono::steady_clock::now();
    auto res = run_convergence(cfg);
    return g_convergence[label] = {std::move(res), seconds_since(t0)};
}

Outcome criterion1()
{
    struct Ref {
        std::string label;
        std::vector<double> EK, ER;
    };
    const std::vector<Ref> refs = {
        {"rda:a", {4.57e-2, 1.13e-2, 2.83e-3}, {1.82e-2, 4.49e-3, 1.12e-3}},
        {"rda:b", {1.85e-2, 4.50e-3, 1.10e-3}, {2.11e-2, 5.44e-3, 1.37e-3}},
        {"rda:c", {6.56e-3, 1.64e-3, 4.10e-4}, {3.06e-2, 7.59e-3, 1.89e-3}},
    };
    Outcome o{true, ""};
    std::ostringstream os;
    for (const auto& ref : refs) {
        const auto& [res, secs] = convergence("rda_convergence.json", ref.label);
        bool ok = res.rows.size() == ref.EK.size() && secs < 300.0;
        double rmin = 1e9, rmax = -1e9, fmax = 0.0;
        for (size_t i = 0; ok && i < res.rows.size(); ++i) {
            const auto& r = res.rows[i];
            fmax = std::max({fmax, std::max(r.E_K / ref.EK[i], ref.EK[i] / r.E_K), std::max(r.E_R / ref.ER[i], ref.ER[i] / r.E_R)});
            if (i == 0) continue;
            if (!r.rate_K || !r.rate_R) {
                ok = false;
                break;
            }
            rmin = std::min({rmin, *r.rate_K, *r.rate_R});
            rmax = std::max({rmax, *r.rate_K, *r.rate_R});
        }
        ok = ok && rmin >= 1.8 && rmax <= 2.3 && fmax <= 2.0;
        o.pass = o.pass && ok;
        os << ref.label << " rates [" << fmt_rate(rmin) << ", " << fmt_rate(rmax) << "] max factor " << fmt_rate(fmax) << " in "
           << static_cast<int>(secs) << "s; ";
    }
    o.detail = os.str();
    return o;
}

Outcome criterion2()
{
    Outcome o{true, ""};
    std::ostringstream os;
    double worst = 0.0;
    std::string worst_case;
    auto check = [&](const std::string& file, const std::string& label) {
        double e;
        auto it = g_convergence.find(label);
        if (it != g_convergence.end()) {
            e = it->second.first.rows.back().E_Phi;
        } else {
            auto cfg = load_case(file, label, true);
            cfg.dt_list = {cfg.dt_list.back()};
            e = run_convergence(cfg).rows.back().E_Phi;
        }
        if (!(e <= 1e-8)) {
            o.pass = false;
            os << label << " E_Phi " << fmt_sci(e) << "; ";
        }
        if (!(e <= worst)) {
            worst = e;
            worst_case = label;
        }
    };
    for (char c = 'a'; c <= 'h'; ++c) check("rda_convergence.json", std::string("rda:") + c);
    for (char c = 'a'; c <= 'c'; ++c) check("wave_convergence.json", std::string("wave:") + c);
    os << "largest E_Phi " << fmt_sci(worst) << " (" << worst_case << ") at the finest dt";
    o.detail = os.str();
    return o;
}

Outcome criterion3()
{
    Outcome o{true, ""};
    std::ostringstream os;
    auto t0 = std::chrono::steady_clock::now();
    std::map<std::string, FiniteMemoryResult> res;
    for (const char* label : {"rda:b", "rda:d", "rda:f"}) res[label] = run_finite_memory(load_case("rda_finite_memory.json", label, false));
    const double secs = seconds_since(t0);

    const auto& d = res["rda:d"].rows;
    const bool d_small = !d.empty() && d.front().fraction == 0.1 && d.front().E_Phi < 5e-3;
    os << "(d) m=0.1N_T " << fmt_sci(d.front().E_Phi) << (d_small ? "" : " [>= 5e-3]") << "; ";
    bool f_diverges = true;
    for (const auto& r : res["rda:f"].rows) {
        if (r.m < res["rda:f"].NT && !(r.E_Phi >= 1.0)) {
            f_diverges = false;
            os << "(f) m=" << r.m << " " << fmt_sci(r.E_Phi) << " [< 1]; ";
        }
    }
    auto monotone = [&](const std::string& label) {
        const auto& rows = res[label].rows;
        bool ok = true;
        for (size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].E_Phi > rows[i - 1].E_Phi) {
                ok = false;
                os << label << " rises " << fmt_sci(rows[i - 1].E_Phi, 3) << " -> " << fmt_sci(rows[i].E_Phi, 3) << " at m="
                   << rows[i].m << "; ";
            }
        }
        return ok;
    };
    const bool mono_b = monotone("rda:b"), mono_d = monotone("rda:d");
    o.pass = d_small && f_diverges && mono_b && mono_d && secs < 600.0;
    os << "sweep " << static_cast<int>(secs) << "s";
    o.detail = os.str();
    return o;
}

Outcome criterion4()
{
    auto cfg = load_case("rda_regularization.json", "rda:e", false);
    auto res = run_regularization(cfg);
    const auto& E = res.E_Phi;
    std::ostringstream os;
    // Diverged cells of the reference grid, rows lambda_R, cols lambda_K over {0, 1e-8, 1e-4, 1e-2, 1}.
    const bool ref[5][5] = {{1, 1, 1, 1, 1}, {0, 1, 1, 1, 1}, {0, 0, 1, 1, 1}, {0, 0, 0, 1, 1}, {0, 0, 0, 0, 0}};
    if (res.lambdas != std::vector<double>{0.0, 1e-8, 1e-4, 1e-2, 1.0}) return {false, "unexpected lambda grid"};
    const bool diag = E(1, 1) <= 1e-8;
    bool row0 = true, col0 = true;
    for (int j = 1; j < 5; ++j) row0 = row0 && E(0, j) >= 1.0;
    for (int i = 1; i < 5; ++i) col0 = col0 && E(i, 0) <= 1e-4;
    int mismatch = 0;
    std::string cells;
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            if ((E(i, j) >= 1.0) != ref[i][j]) {
                ++mismatch;
                cells += " (" + fmt_sci(res.lambdas[i], 0) + "," + fmt_sci(res.lambdas[j], 0) + ")=" + fmt_clamped(E(i, j));
            }
    os << "(1e-8,1e-8) " << fmt_sci(E(1, 1)) << (diag ? "" : " [> 1e-8]") << "; lambda_R=0 row " << (row0 ? "diverges" : "[not all >= 1]")
       << "; lambda_K=0 column " << (col0 ? "<= 1e-4" : "[> 1e-4]") << "; partition mismatches " << mismatch << "/25";
    if (mismatch) os << ":" << cells;
    return {diag && row0 && col0 && mismatch == 0, os.str()};
}

// Relative Frobenius error over all nodes.
double rel_all(const std::vector<Mat>& X, const std::vector<Mat>& Y)
{
    double num = 0.0, den = 0.0;
    for (size_t n = 0; n < X.size(); ++n) {
        num += (X[n] - Y[n]).squaredNorm();
        den += Y[n].squaredNorm();
    }
    return std::sqrt(num / den);
}

Outcome criterion5()
{
    std::ostringstream os;
    bool pass = true;
    auto ladder = [&](const SystemSpec& sys, double T, const std::vector<int>& NTs, int Ns, bool r_absolute, const std::string& name) {
        const int Nfine = NTs.back();
        auto F0 = sample_system_initial_conditions(sys, Ns, 21);
        EnsembleGenConfig gen;
        gen.Ns = Ns;
        auto fine = integrate_ensemble(sys, sys.default_projection, TimeGrid(T, Nfine), F0, gen);
        std::vector<double> eR, eK, eB;
        for (int NT : NTs) {
            auto ens = subsample(fine, Nfine / NT);
            auto ops = reconstruct_full(ens, true).ops;
            auto ref = exact_operators_time_invariant(sys, sys.default_projection, ens.grid, Scheme::Midpoint);
            eK.push_back(error_K(ops.K, ref.K));
            eB.push_back(rel_all(ops.B, ref.B));
            double r = 0.0;
            for (int n = 0; n < NT; ++n) r = std::max(r, (ops.R[n] - ref.R[n]).norm());
            eR.push_back(r_absolute ? r : error_R(ops.R, ref.R));
        }
        auto ratios = [&](const std::vector<double>& e, const char* what) {
            os << name << " " << what << " ratios";
            for (size_t i = 1; i < e.size(); ++i) {
                const double q = e[i - 1] / e[i];
                os << " " << fmt_rate(q);
                if (!in_range(q, 3.4, 4.6)) pass = false;
            }
            os << "; ";
        };
        ratios(eK, "K");
        ratios(eB, "B");
        if (r_absolute) {
            const double worst = *std::max_element(eR.begin(), eR.end());
            os << name << " R abs error " << fmt_sci(worst) << "; ";
            if (!(worst <= 1e-10)) pass = false;
        } else {
            ratios(eR, "R");
        }
    };
    ladder(rotation_system(), 2.0, {20, 40, 80, 160}, 4, true, "rotation");
    ladder(build_wave_system('a', 16), 2.0, {32, 64, 128, 256}, 64, false, "wave(a) N=16");
    return {pass, os.str()};
}

Outcome criterion6()
{
    std::ostringstream os;
    bool pass = true;
    int resolvable = 0, total = 0;
    auto check = [&](const std::string& label, double dt, int N) {
        ExperimentConfig cfg;
        cfg.case_label = label;
        cfg.N = N;
        cfg.dt_list = {dt};
        finalize(cfg, false);
        auto data = generate_data(cfg);
        auto rep = conditioning_diagnostics(data.sys, data.train.front(), 0.01, true);
        const int steps = rep.step_violations();
        resolvable += rep.resolvable_steps();
        total += static_cast<int>(rep.kappa_step.size());
        if (steps) {
            pass = false;
            os << label << " per-step bound exceeded at " << steps << " steps; ";
        }
        if (rep.kappa_global > rep.bound_global * (1 + 1e-8)) {
            pass = false;
            os << label << " global kappa " << fmt_sci(rep.kappa_global, 3) << " > bound " << fmt_sci(rep.bound_global, 3) << "; ";
        }
        if (rep.kappa_KB > rep.bound_KB * (1 + 1e-8)) {
            pass = false;
            os << label << " KB kappa " << fmt_sci(rep.kappa_KB, 3) << " > bound " << fmt_sci(rep.bound_KB, 3) << "; ";
        }
        return rep;
    };
    int cases = 0;
    for (char c = 'a'; c <= 'f'; ++c, ++cases) check(std::string("rda:") + c, 3.125e-2, 0);
    for (char c = 'a'; c <= 'c'; ++c, ++cases) check(std::string("wave:") + c, 6.25e-2, 0);
    check("rotation", 0.1, 0);
    ++cases;

    // Pure diffusion: the case (g) generator without its forcing.
    auto g = build_rda_system('g', 30);
    auto diff = constant_system(g.A(0.0), g.default_projection, "diffusion");
    EnsembleGenConfig gen;
    gen.Ns = 35;
    auto ens = integrate_ensemble(diff, diff.default_projection, TimeGrid(0.25, 40), sample_system_initial_conditions(g, 35, 1), gen);
    auto rep = conditioning_diagnostics(diff, ens, 0.01, true);
    double worst = 1.0;
    int used = 0;
    if (rep.step_violations()) pass = false;
    for (size_t n = 0; n < rep.kappa_step.size(); ++n) {
        if (rep.bound_step[n] > 1e10) continue;  // kappa loses accuracy well before 1/eps
        worst = std::max(worst, rep.bound_step[n] / rep.kappa_step[n]);
        ++used;
    }
    const bool tight = used > 0 && worst <= 3.0;
    os << cases << " zero-forcing cases, " << resolvable << " of " << total << " steps resolvable; diffusion bound/kappa <= " << fmt_rate(worst) << " over " << used << " steps";
    return {pass && tight, os.str()};
}

Outcome criterion7()
{
    std::ostringstream os;
    bool pass = true;
    auto check = [&](const std::string& label, double dt) {
        ExperimentConfig cfg;
        cfg.case_label = label;
        cfg.dt_list = {dt};
        finalize(cfg, false);
        auto data = generate_data(cfg);
        const auto& tr = data.train.front();
        const int d = tr.d, dtl = tr.d_tilde;
        auto steps = solve_partial_greedy(mask_partial(tr), false, cfg.solve_options()).steps;
        int bad_partial = 0, bad_plateau = 0;
        for (size_t n = 1; n < steps.size(); ++n)
            if (steps[n].rank >= 2 * d + dtl) ++bad_partial;
        auto demo = demo_nonstationary_illposedness(tr, tr.grid.NT - 1, cfg.solve_options());
        for (size_t n = 1; n < demo.size(); ++n)
            if (demo[n].rank != d + dtl) ++bad_plateau;
        if (bad_partial || bad_plateau) pass = false;
        os << label << " " << bad_partial << "+" << bad_plateau << " bad of " << steps.size() - 1 << "+" << demo.size() - 1 << "; ";
    };
    for (char c : {'e', 'f', 'h'}) check(std::string("rda:") + c, 3.125e-2);
    for (char c : {'b', 'c'}) check(std::string("wave:") + c, 6.25e-2);
    return {pass, os.str()};
}

Outcome criterion8()
{
    std::mt19937_64 rng(8);
    int held = 0;
    const int total = 200;
    double worst = 0.0;
    for (int k = 0; k < total; ++k) {
        auto I = testing::random_perturbed_instance(rng);
        const Mat Xhat = solve_dense_ls(I.F + I.dF, I.Z + I.dZ, 1e-14).X;
        const double err = (Xhat - I.X).norm() / I.X.norm();
        const double bound = perturbation_bound(I.F, I.dF, I.X, I.dZ, I.O);
        worst = std::max(worst, err / bound);
        if (err <= bound) ++held;
    }
    std::ostringstream os;
    os << held << "/" << total << " instances within the bound, largest error/bound " << fmt_sci(worst);
    return {held == total, os.str()};
}

Outcome criterion9()
{
    std::ostringstream os;
    bool pass = true;
    double worst = 0.0;
    int problems = 0;
    for (const char* label : {"rda:a", "rda:d", "rda:f", "wave:a"}) {
        ExperimentConfig cfg;
        cfg.case_label = label;
        cfg.T = std::string(label).rfind("rda", 0) == 0 ? 5.0 : 2.5;
        cfg.dt_list = {cfg.T / 40};
        if (std::string(label) == "wave:a") cfg.N = 16;
        finalize(cfg, false);
        auto data = generate_data(cfg);
        const auto& tr = data.train.front();
        auto R = solve_R_global(tr, cfg.solve_options()).R;
        for (int m : {4, 20, 40}) {
            auto it = solve_finite_memory(tr, R, m, 1 << 30, cfg.solve_options(), 1e-14);
            auto dn = solve_finite_memory_dense(tr, R, m, cfg.solve_options());
            double num = 0.0, den = 0.0;
            for (int n = 0; n < tr.grid.NT; ++n) {
                num += (it.ops.K[n] - dn.ops.K[n]).squaredNorm() + (it.ops.B[n] - dn.ops.B[n]).squaredNorm();
                den += dn.ops.K[n].squaredNorm() + dn.ops.B[n].squaredNorm();
            }
            const double rel = std::sqrt(num / den);
            worst = std::max(worst, rel);
            ++problems;
            if (!(rel <= 1e-8)) {
                pass = false;
                os << label << " m=" << m << " " << fmt_sci(rel) << "; ";
            }
        }
    }
    os << problems << " problems with N_T = 40, largest relative difference " << fmt_sci(worst);
    return {pass, os.str()};
}

}  // namespace

int main(int argc, char** argv)
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"convergence rates and magnitudes, rda (a)-(c)", criterion1},
        {"prediction fidelity at the finest dt", criterion2},
        {"finite-memory pattern", criterion3},
        {"regularization pattern, rda (e)", criterion4},
        {"oracle equivalence under dt halving", criterion5},
        {"conditioning bounds", criterion6},
        {"non-stationarity rank deficiency", criterion7},
        {"least-squares perturbation bound", criterion8},
        {"LSQR and dense solver equivalence", criterion9},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
    int failed = 0;
    for (size_t k = 0; k < criteria.size(); ++k) {
        if (!selected.empty() && !selected.count(static_cast<int>(k) + 1)) continue;
        Outcome o;
        auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        if (!o.pass) ++failed;
        std::ostringstream line;
        line << (o.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << " (" << criteria[k].first << "): " << o.detail << " ["
             << static_cast<int>(seconds_since(t0)) << "s]";
        std::cout << line.str() << std::endl;
        if (const char* dir = std::getenv("MZ_ACCEPTANCE_LOG"))
            std::ofstream(std::string(dir) + "/criterion_" + std::to_string(k + 1) + ".txt") << line.str() << "\n";
    }
    return failed == 0 ? 0 : 1;
}
