#include "mz/experiment.hpp"
#include "mz/io.hpp"
#include "mz/oracle.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

namespace mz {

using json = nlohmann::json;

namespace {

const double kTwoPi = 6.283185307179586476925286766559;

std::string family_of(const std::string& label)
{
    auto c = label.find(':');
    return c == std::string::npos ? label : label.substr(0, c);
}

SolveMode mode_from_string(const std::string& s)
{
    if (s == "full") return SolveMode::Full;
    if (s == "partial") return SolveMode::Partial;
    if (s == "partial_regularized") return SolveMode::PartialRegularized;
    if (s == "finite_memory") return SolveMode::FiniteMemory;
    throw ConfigError("unknown mode: " + s);
}

DerivativeSource derivative_from_string(const std::string& s)
{
    if (s == "difference") return DerivativeSource::Difference;
    if (s == "exact") return DerivativeSource::Exact;
    throw ConfigError("unknown derivative source: " + s);
}

std::string to_string(DerivativeSource s)
{
    return s == DerivativeSource::Difference ? "difference" : "exact";
}

json config_json(const ExperimentConfig& c)
{
    json j;
    j["case"] = c.case_label;
    j["N"] = c.N;
    j["d"] = c.d;
    j["resolved_indices"] = c.resolved_indices;
    j["N_s_train"] = c.Ns_train;
    j["N_s_test"] = c.Ns_test;
    j["seed_train"] = c.seed_train;
    j["seed_test"] = c.seed_test;
    j["T"] = c.T;
    j["dt_list"] = c.dt_list;
    j["scheme"] = to_string(c.scheme);
    j["mode"] = to_string(c.mode);
    j["lambda_R"] = c.lambda_R;
    j["lambda_K"] = c.lambda_K;
    j["lambda_grid"] = c.lambda_grid;
    j["m_fraction_list"] = c.m_fraction_list;
    j["lsqr_max_iter"] = c.lsqr_max_iter;
    j["lsqr_atol"] = c.lsqr_atol;
    j["lsqr_precondition"] = c.lsqr_precondition;
    j["solver_tol"] = c.solver_tol;
    j["rank_tol"] = c.rank_tol;
    j["derivative"] = to_string(c.derivative);
    j["scaled_kernel_penalty"] = c.scaled_kernel_penalty;
    j["merge_partial"] = c.merge_partial;
    j["literal_d2"] = c.literal_d2;
    j["diagnostics_slack"] = c.diagnostics_slack;
    j["name"] = c.name;
    return j;
}

template <class T>
void take(const json& j, const char* key, T& out)
{
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

void apply_keys(const json& j, ExperimentConfig& c)
{
    if (!j.is_object()) throw ConfigError("experiment entry must be an object");
    static const std::vector<std::string> known = {
        "case", "N", "d", "resolved_indices", "N_s_train", "N_s_test", "seed_train", "seed_test", "T", "dt_list", "scheme",
        "mode", "lambda_R", "lambda_K", "lambda_grid", "m_fraction_list", "lsqr_max_iter", "lsqr_atol", "lsqr_precondition",
        "solver_tol", "rank_tol", "output_dir", "threads", "derivative", "scaled_kernel_penalty", "merge_partial",
        "literal_d2", "diagnostics_slack", "name"};
    for (const auto& [k, v] : j.items())
        if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("unknown config key: " + k);
    take(j, "case", c.case_label);
    take(j, "N", c.N);
    take(j, "d", c.d);
    take(j, "resolved_indices", c.resolved_indices);
    take(j, "N_s_train", c.Ns_train);
    take(j, "N_s_test", c.Ns_test);
    take(j, "seed_train", c.seed_train);
    take(j, "seed_test", c.seed_test);
    take(j, "T", c.T);
    take(j, "dt_list", c.dt_list);
    if (j.contains("scheme")) {
        try {
            c.scheme = scheme_from_string(j.at("scheme").get<std::string>());
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
    if (j.contains("mode")) c.mode = mode_from_string(j.at("mode").get<std::string>());
    take(j, "lambda_R", c.lambda_R);
    take(j, "lambda_K", c.lambda_K);
    take(j, "lambda_grid", c.lambda_grid);
    take(j, "m_fraction_list", c.m_fraction_list);
    take(j, "lsqr_max_iter", c.lsqr_max_iter);
    take(j, "lsqr_atol", c.lsqr_atol);
    take(j, "lsqr_precondition", c.lsqr_precondition);
    take(j, "solver_tol", c.solver_tol);
    take(j, "rank_tol", c.rank_tol);
    take(j, "output_dir", c.output_dir);
    take(j, "threads", c.threads);
    if (j.contains("derivative")) c.derivative = derivative_from_string(j.at("derivative").get<std::string>());
    take(j, "scaled_kernel_penalty", c.scaled_kernel_penalty);
    take(j, "merge_partial", c.merge_partial);
    take(j, "literal_d2", c.literal_d2);
    take(j, "diagnostics_slack", c.diagnostics_slack);
    take(j, "name", c.name);
}

std::string fmt_dt(double dt)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4e", dt);
    return buf;
}

std::string fmt_lambda(double l)
{
    if (l == 0.0) return "0";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0e", l);
    return buf;
}

std::string case_tag(const std::string& label)
{
    auto c = label.find(':');
    return c == std::string::npos ? label : "(" + label.substr(c + 1) + ")";
}

Metadata base_meta(const ExperimentConfig& cfg)
{
    return {{"case", cfg.case_label},
            {"config_hash", cfg.hash()},
            {"scheme", to_string(cfg.scheme)},
            {"mode", to_string(cfg.mode)},
            {"derivative", to_string(cfg.derivative)}};
}

// Table rows in CSV additionally carry the config hash and scheme tag.
std::string tagged_csv(const TableArtifact& art)
{
    Table t = art.table;
    t.header.push_back("config_hash");
    t.header.push_back("scheme");
    for (auto& r : t.rows) {
        r.push_back(art.meta.at("config_hash"));
        r.push_back(art.meta.at("scheme"));
    }
    return t.csv();
}

void write_text(const std::string& path, const std::string& text)
{
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

std::vector<Mat> fitted_R(const ExperimentConfig& cfg, const SystemSpec& sys, const SnapshotEnsemble& train)
{
    auto opt = cfg.solve_options();
    return sys.time_invariant ? solve_R_global(train, opt).R : solve_R_per_step(train, opt).R;
}

int memory_bound(double fraction, int NT)
{
    return std::clamp(static_cast<int>(std::lround(fraction * NT)), 1, NT);
}

double safe_error_phi(const OperatorSequence& ops, const SnapshotEnsemble& test)
{
    try {
        auto pred = predict(prediction_input(ops, test));
        double e = error_Phi(pred, test.Phi);
        return std::isfinite(e) ? e : std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();
    }
}

}  // namespace

std::string ExperimentConfig::canonical() const
{
    return config_json(*this).dump();
}

std::string ExperimentConfig::hash() const
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : canonical()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

SolveOptions ExperimentConfig::solve_options() const
{
    SolveOptions o;
    o.scheme = scheme;
    o.derivative = derivative;
    o.rank_tol = rank_tol;
    return o;
}

void finalize(ExperimentConfig& c, bool require_ladder)
{
    const std::string fam = family_of(c.case_label);
    if (fam == "rda") {
        if (c.T <= 0.0) c.T = 5.0;
        if (c.Ns_train <= 0) c.Ns_train = 35;
        if (c.Ns_test <= 0) c.Ns_test = 15;
    } else if (fam == "wave") {
        if (c.T <= 0.0) c.T = kTwoPi;
        if (c.Ns_train <= 0) c.Ns_train = 120;
        if (c.Ns_test <= 0) c.Ns_test = 30;
    } else if (fam == "rotation") {
        if (c.T <= 0.0) c.T = kTwoPi;
        if (c.Ns_train <= 0) c.Ns_train = 4;
        if (c.Ns_test <= 0) c.Ns_test = 2;
    } else {
        throw ConfigError("unknown case family: " + c.case_label);
    }
    try {
        build_system(c.case_label, c.N);
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (c.dt_list.empty()) throw ConfigError("dt_list must not be empty");
    for (double dt : c.dt_list)
        if (!(dt > 0.0) || dt > c.T) throw ConfigError("dt_list entries must lie in (0, T]");
    if (require_ladder) {
        for (size_t i = 1; i < c.dt_list.size(); ++i)
            if (std::abs(c.dt_list[i - 1] / c.dt_list[i] - 2.0) > 1e-9) throw ConfigError("dt_list must decrease by a factor of 2 per level");
    }
    if (c.Ns_train < 1 || c.Ns_test < 1) throw ConfigError("ensemble sizes must be positive");
    if (c.threads < 1) throw ConfigError("threads must be positive");
    if (c.lsqr_max_iter < 1) throw ConfigError("lsqr_max_iter must be positive");
    if (c.lambda_R < 0.0 || c.lambda_K < 0.0) throw ConfigError("regularization weights must be non-negative");
    for (double l : c.lambda_grid)
        if (l < 0.0) throw ConfigError("lambda_grid entries must be non-negative");
    for (double f : c.m_fraction_list)
        if (!(f > 0.0 && f <= 1.0)) throw ConfigError("m_fraction_list entries must lie in (0, 1]");
    if (c.mode == SolveMode::FiniteMemory && c.m_fraction_list.empty()) throw ConfigError("finite_memory mode needs m_fraction_list");
    if (c.mode == SolveMode::PartialRegularized && c.lambda_grid.empty() && c.lambda_R == 0.0 && c.lambda_K == 0.0)
        c.lambda_grid = {0.0, 1e-8, 1e-4, 1e-2, 1.0};
    if (!c.resolved_indices.empty() && c.d > 0 && c.d != static_cast<int>(c.resolved_indices.size()))
        throw ConfigError("d disagrees with resolved_indices");
    if (c.name.empty()) {
        c.name = c.case_label + "_" + to_string(c.mode);
        std::replace(c.name.begin(), c.name.end(), ':', '_');
    }
}

std::vector<ExperimentConfig> parse_configs(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    std::vector<ExperimentConfig> out;
    if (root.is_object() && root.contains("experiments")) {
        ExperimentConfig base;
        for (const auto& [k, v] : root.items())
            if (k != "defaults" && k != "experiments") throw ConfigError("unknown top-level key: " + k);
        if (root.contains("defaults")) apply_keys(root.at("defaults"), base);
        if (!root.at("experiments").is_array()) throw ConfigError("experiments must be an array");
        for (const auto& e : root.at("experiments")) {
            ExperimentConfig c = base;
            apply_keys(e, c);
            out.push_back(c);
        }
    } else {
        ExperimentConfig c;
        apply_keys(root, c);
        out.push_back(c);
    }
    if (out.empty()) throw ConfigError("config defines no experiments");
    return out;
}

std::vector<ExperimentConfig> load_configs(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_configs(ss.str());
}

ExperimentData generate_data(const ExperimentConfig& cfg)
{
    ExperimentData out;
    out.sys = build_system(cfg.case_label, cfg.N, cfg.literal_d2);
    const int M = out.sys.default_projection.N();
    if (!cfg.resolved_indices.empty())
        out.proj = ProjectionSpec(M, cfg.resolved_indices);
    else if (cfg.d > 0 && cfg.d != out.sys.default_projection.d())
        out.proj = ProjectionSpec::leading(M, cfg.d);
    else
        out.proj = out.sys.default_projection;

    const double dt_f = *std::min_element(cfg.dt_list.begin(), cfg.dt_list.end());
    const TimeGrid fine = TimeGrid::from_dt(cfg.T, dt_f);
    EnsembleGenConfig gc;
    gc.solver_tol = cfg.solver_tol;
    gc.threads = cfg.threads;
    auto make = [&](int Ns, std::uint64_t seed) {
        gc.Ns = Ns;
        gc.seed = seed;
        return integrate_ensemble(out.sys, out.proj, fine, sample_system_initial_conditions(out.sys, Ns, seed), gc);
    };
    SnapshotEnsemble tr = make(cfg.Ns_train, cfg.seed_train);
    SnapshotEnsemble te = make(cfg.Ns_test, cfg.seed_test);
    for (double dt : cfg.dt_list) {
        const int stride = static_cast<int>(std::lround(dt / dt_f));
        if (std::abs(stride * dt_f - dt) > 1e-9 * dt) throw ConfigError("dt_list entries must be integer multiples of the finest step");
        const int NT = TimeGrid::from_dt(cfg.T, dt).NT;
        out.train.push_back(subsample(tr, stride, NT));
        out.test.push_back(subsample(te, stride, NT));
    }
    return out;
}

ReconstructionReport reconstruct(const ExperimentConfig& cfg, const SystemSpec& sys, const SnapshotEnsemble& train)
{
    const auto opt = cfg.solve_options();
    auto partial = [&]() { return train.mode == Observation::Full ? mask_partial(train) : train; };
    switch (cfg.mode) {
    case SolveMode::Full: return reconstruct_full(train, sys.time_invariant, opt);
    case SolveMode::Partial: return solve_partial_greedy(partial(), cfg.merge_partial, opt);
    case SolveMode::PartialRegularized:
        return solve_partial_regularized(partial(), cfg.lambda_R, cfg.lambda_K, opt, cfg.scaled_kernel_penalty);
    case SolveMode::FiniteMemory: {
        const double f = cfg.m_fraction_list.empty() ? 1.0 : cfg.m_fraction_list.front();
        return solve_finite_memory(train, fitted_R(cfg, sys, train), memory_bound(f, train.grid.NT), cfg.lsqr_max_iter, opt,
                                   cfg.lsqr_atol, cfg.lsqr_precondition);
    }
    }
    throw std::logic_error("unhandled mode");
}

ConvergenceResult run_convergence(const ExperimentConfig& cfg)
{
    if (cfg.mode != SolveMode::Full) throw ConfigError("convergence runs need mode = full");
    auto data = generate_data(cfg);
    const auto opt = cfg.solve_options();
    const size_t L = cfg.dt_list.size();
    std::vector<OperatorSequence> ops(L);
    ConvergenceResult res;
    res.rows.resize(L);
    bool r_absolute = false;
    for (size_t i = 0; i < L; ++i) {
        const auto& tr = data.train[i];
        ops[i] = reconstruct_full(tr, data.sys.time_invariant, opt).ops;
        auto& row = res.rows[i];
        row.dt = tr.grid.dt();
        row.NT = tr.grid.NT;
        const auto Rref = markovian_reference(data.sys, data.proj, tr.grid, cfg.scheme);
        double ref_norm = 0.0;
        for (const auto& M : Rref) ref_norm += M.squaredNorm();
        if (ref_norm > 0.0) {
            row.E_R = error_R(ops[i].R, Rref);
        } else {
            // Zero Markovian part (rotation): root-mean-square absolute error.
            double s = 0.0;
            for (size_t n = 0; n < Rref.size(); ++n) s += (ops[i].R[n] - Rref[n]).squaredNorm();
            row.E_R = std::sqrt(s / Rref.size());
            r_absolute = true;
        }
        row.E_Phi = error_Phi(predict(prediction_input(ops[i], data.test[i])), data.test[i].Phi);
        if (data.sys.time_invariant) {
            row.E_K = error_K(ops[i].K, exact_operators_time_invariant(data.sys, data.proj, tr.grid, cfg.scheme).K);
            row.k_reference = ReferenceKind::Analytic;
        }
    }
    if (!data.sys.time_invariant) {
        // Self-convergence against the finest level.
        const size_t f = L - 1;
        for (size_t i = 0; i < L; ++i) {
            const int stride = static_cast<int>(std::lround(res.rows[i].dt / res.rows[f].dt));
            res.rows[i].E_K = i == f ? 0.0 : error_K(ops[i].K, restrict_lags(ops[f].K, stride, res.rows[i].NT));
            res.rows[i].k_reference = ReferenceKind::SelfConvergence;
        }
    }
    std::vector<double> eK, eR;
    for (const auto& r : res.rows) {
        eK.push_back(r.E_K);
        eR.push_back(r.E_R);
    }
    auto rK = convergence_rates(eK), rR = convergence_rates(eR);
    for (size_t i = 1; i < L; ++i) {
        res.rows[i].rate_K = rK[i - 1];
        res.rows[i].rate_R = rR[i - 1];
    }

    auto& t = res.artifact.table;
    t.header = {"Case", "dt", "E_Phi", "E_K", "Rate", "E_R", "Rate"};
    for (size_t i = 0; i < L; ++i) {
        const auto& r = res.rows[i];
        t.rows.push_back({i == 0 ? case_tag(cfg.case_label) : "", fmt_dt(r.dt), fmt_sci(r.E_Phi), fmt_sci(r.E_K), fmt_rate(r.rate_K),
                          fmt_sci(r.E_R), fmt_rate(r.rate_R)});
    }
    res.artifact.meta = base_meta(cfg);
    res.artifact.meta["k_reference"] = data.sys.time_invariant ? "analytic" : "self_convergence";
    res.artifact.meta["r_reference"] = "analytic";
    res.artifact.meta["E_R"] = r_absolute ? "absolute" : "relative";
    res.artifact.meta["r_solve"] = data.sys.time_invariant ? "global" : "per_step";
    return res;
}

FiniteMemoryResult run_finite_memory(const ExperimentConfig& cfg)
{
    if (cfg.mode != SolveMode::FiniteMemory) throw ConfigError("finite-memory runs need mode = finite_memory");
    ExperimentConfig one = cfg;
    one.dt_list = {cfg.dt_list.front()};
    if (build_system(cfg.case_label, cfg.N).forced()) throw ConfigError("finite-memory runs need a zero-forcing case");
    auto data = generate_data(one);
    const auto& tr = data.train.front();
    const auto& te = data.test.front();
    const auto opt = cfg.solve_options();
    const auto R = fitted_R(cfg, data.sys, tr);

    FiniteMemoryResult res;
    res.dt = tr.grid.dt();
    res.NT = tr.grid.NT;
    for (double f : cfg.m_fraction_list) {
        FiniteMemoryRow row;
        row.fraction = f;
        row.m = memory_bound(f, res.NT);
        auto rep = solve_finite_memory(tr, R, row.m, cfg.lsqr_max_iter, opt, cfg.lsqr_atol, cfg.lsqr_precondition);
        row.lsqr_iterations = rep.lsqr_iterations;
        row.E_Phi = safe_error_phi(rep.ops, te);
        for (const auto& k : rep.ops.K) row.kernel_norms.push_back(k.norm());
        res.rows.push_back(std::move(row));
    }

    auto& t = res.artifact.table;
    t.header = {"Case"};
    std::vector<std::string> cells = {case_tag(cfg.case_label)};
    for (const auto& r : res.rows) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "m = %gN_T", r.fraction);
        t.header.push_back(buf);
        cells.push_back(fmt_clamped(r.E_Phi));
    }
    t.rows.push_back(cells);
    res.artifact.meta = base_meta(cfg);
    res.artifact.meta["dt"] = fmt_dt(res.dt);
    res.artifact.meta["N_T"] = std::to_string(res.NT);
    res.artifact.meta["lsqr_max_iter"] = std::to_string(cfg.lsqr_max_iter);
    std::string iters;
    for (const auto& r : res.rows) iters += (iters.empty() ? "" : " ") + std::to_string(r.lsqr_iterations);
    res.artifact.meta["lsqr_iterations"] = iters;

    res.lag_profile.header = {"n", "t"};
    for (const auto& r : res.rows) res.lag_profile.header.push_back("m=" + std::to_string(r.m));
    for (int n = 0; n < res.NT; ++n) {
        std::vector<std::string> row = {std::to_string(n), fmt_sci(n * res.dt, 6)};
        for (const auto& r : res.rows) row.push_back(fmt_sci(r.kernel_norms[n], 6));
        res.lag_profile.rows.push_back(row);
    }
    return res;
}

RegularizationResult run_regularization(const ExperimentConfig& cfg)
{
    if (cfg.mode != SolveMode::PartialRegularized) throw ConfigError("regularization runs need mode = partial_regularized");
    ExperimentConfig one = cfg;
    one.dt_list = {cfg.dt_list.front()};
    auto data = generate_data(one);
    const auto train = mask_partial(data.train.front());
    const auto& te = data.test.front();
    const auto opt = cfg.solve_options();

    RegularizationResult res;
    res.dt = train.grid.dt();
    res.lambdas = cfg.lambda_grid.empty() ? std::vector<double>{cfg.lambda_R} : cfg.lambda_grid;
    std::vector<double> lK = cfg.lambda_grid.empty() ? std::vector<double>{cfg.lambda_K} : cfg.lambda_grid;
    res.E_Phi.resize(res.lambdas.size(), lK.size());
    for (size_t i = 0; i < res.lambdas.size(); ++i)
        for (size_t j = 0; j < lK.size(); ++j) {
            auto rep = solve_partial_regularized(train, res.lambdas[i], lK[j], opt, cfg.scaled_kernel_penalty);
            res.E_Phi(i, j) = safe_error_phi(rep.ops, te);
        }

    auto& t = res.artifact.table;
    t.header = {"lambda_R \\ lambda_K"};
    for (double l : lK) t.header.push_back(fmt_lambda(l));
    for (size_t i = 0; i < res.lambdas.size(); ++i) {
        std::vector<std::string> row = {fmt_lambda(res.lambdas[i])};
        for (size_t j = 0; j < lK.size(); ++j) row.push_back(fmt_clamped(res.E_Phi(i, j)));
        t.rows.push_back(row);
    }
    res.artifact.meta = base_meta(cfg);
    res.artifact.meta["dt"] = fmt_dt(res.dt);
    res.artifact.meta["kernel_penalty"] = cfg.scaled_kernel_penalty ? "dt*K" : "K";
    return res;
}

DiagnosticsResult run_diagnostics(const ExperimentConfig& cfg)
{
    ExperimentConfig one = cfg;
    one.dt_list = {cfg.dt_list.front()};
    auto data = generate_data(one);
    const auto& tr = data.train.front();
    const auto opt = cfg.solve_options();
    DiagnosticsResult res;
    res.d = tr.d;
    res.d_tilde = tr.d_tilde;
    std::ostringstream os;
    os << "case " << cfg.case_label << ", dt " << fmt_dt(tr.grid.dt()) << ", N_T " << tr.grid.NT << ", d " << tr.d << ", d_tilde "
       << tr.d_tilde << "\n";
    if (!data.sys.forced()) {
        res.conditioning = conditioning_diagnostics(data.sys, tr, cfg.diagnostics_slack, true, cfg.rank_tol);
        const auto& c = *res.conditioning;
        os << "assumption (i) rank(F_0) = N: " << (c.assumption_i ? "pass" : "fail") << " (rank " << c.rank_F0 << ")\n";
        os << "assumption (ii) sigma_min(noise column) > 0: " << (c.assumption_ii ? "pass" : "fail") << " (" << fmt_sci(c.sigma_min_noise)
           << ")\n";
        os << "assumption (iii) trivial range intersection: " << (c.assumption_iii ? "pass" : "fail") << " (rank " << c.rank_KB << ")\n";
        os << "per-step kappa above bound: " << c.step_violations() << " of " << c.resolvable_steps()
           << " resolvable steps (" << c.kappa_step.size() << " total)\n";
        os << "global kappa " << fmt_sci(c.kappa_global) << " bound " << fmt_sci(c.bound_global) << "\n";
        os << "KB kappa " << fmt_sci(c.kappa_KB) << " bound " << fmt_sci(c.bound_KB) << "\n";
    } else {
        os << "conditioning bounds skipped: forcing present\n";
    }
    try {
        res.partial_unmerged = solve_partial_greedy(mask_partial(tr), false, opt).steps;
        int deficient = 0;
        for (size_t n = 1; n < res.partial_unmerged.size(); ++n)
            if (res.partial_unmerged[n].rank < 2 * tr.d + tr.d_tilde) ++deficient;
        os << "partial unmerged steps with rank < 2d + d_tilde: " << deficient << " of "
           << (res.partial_unmerged.empty() ? 0 : res.partial_unmerged.size() - 1) << "\n";
    } catch (const std::exception& e) {
        os << "partial unmerged solve failed: " << e.what() << "\n";
    }
    res.nonstationary = demo_nonstationary_illposedness(tr, std::min(tr.grid.NT - 1, 20), opt);
    os << "non-stationary design ranks:";
    for (const auto& dg : res.nonstationary) os << " " << dg.rank;
    os << "\n";
    res.report = os.str();
    return res;
}

void emit(const ExperimentConfig& cfg, const std::string& suffix, const TableArtifact& art)
{
    const std::string base = cfg.output_dir + "/" + cfg.name + (suffix.empty() ? "" : "_" + suffix);
    write_text(base + ".csv", tagged_csv(art));
    write_text(base + ".md", art.table.markdown());
    write_metadata(base + "_meta.txt", art.meta);
}

}  // namespace mz
