#include "helpers.hpp"
#include "mz/experiment.hpp"
#include "mz/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

using namespace mz;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name)
{
    fs::path p = fs::temp_directory_path() / ("mz_tests_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig small(const std::string& text)
{
    auto cfgs = parse_configs(text);
    REQUIRE(cfgs.size() == 1);
    return cfgs.front();
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(MZCLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("single experiment object")
{
    auto c = small(R"({"case": "rda:b", "dt_list": [0.05, 0.025], "scheme": "backward_euler", "N_s_train": 7})");
    CHECK(c.case_label == "rda:b");
    CHECK(c.scheme == Scheme::BackwardEuler);
    CHECK(c.Ns_train == 7);
    finalize(c, true);
    CHECK(c.T == 5.0);
    CHECK(c.Ns_test == 15);
    CHECK(c.name == "rda_b_full");
}

TEST_CASE("defaults apply to every experiment")
{
    auto cfgs = parse_configs(R"({"defaults": {"dt_list": [0.1], "seed_train": 9},
                                  "experiments": [{"case": "rda:a"}, {"case": "wave:b", "seed_train": 4}]})");
    REQUIRE(cfgs.size() == 2);
    CHECK(cfgs[0].seed_train == 9);
    CHECK(cfgs[1].seed_train == 4);
    CHECK(cfgs[1].dt_list == std::vector<double>{0.1});
}

TEST_CASE("invalid configs raise ConfigError")
{
    CHECK_THROWS_AS(parse_configs(R"({"case": "rda:a", "dtlist": [0.1]})"), ConfigError);
    CHECK_THROWS_AS(parse_configs("{not json"), ConfigError);
    CHECK_THROWS_AS(parse_configs(R"({"case": "rda:a", "scheme": "rk4"})"), ConfigError);
    auto bad_ladder = small(R"({"case": "rda:a", "dt_list": [0.1, 0.03]})");
    CHECK_THROWS_AS(finalize(bad_ladder, true), ConfigError);
    CHECK_NOTHROW(finalize(bad_ladder, false));
    auto bad_case = small(R"({"case": "rda:z", "dt_list": [0.1]})");
    CHECK_THROWS_AS(finalize(bad_case, false), ConfigError);
    auto bad_fm = small(R"({"case": "rda:a", "dt_list": [0.1], "mode": "finite_memory"})");
    CHECK_THROWS_AS(finalize(bad_fm, false), ConfigError);
    auto bad_dt = small(R"({"case": "rda:a", "dt_list": [-0.1]})");
    CHECK_THROWS_AS(finalize(bad_dt, false), ConfigError);
}

TEST_CASE("regularization mode gets the default lambda grid")
{
    auto c = small(R"({"case": "rda:e", "dt_list": [0.1], "mode": "partial_regularized"})");
    finalize(c, false);
    CHECK(c.lambda_grid == std::vector<double>{0.0, 1e-8, 1e-4, 1e-2, 1.0});
}

TEST_CASE("config hash is stable and sensitive")
{
    auto a = small(R"({"case": "rda:a", "dt_list": [0.1]})");
    auto b = small(R"({"dt_list": [0.1], "case": "rda:a"})");
    auto c = small(R"({"case": "rda:a", "dt_list": [0.1], "seed_test": 5})");
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() != c.hash());
    CHECK(a.hash().size() == 16);
}

}

TEST_SUITE("io") {

TEST_CASE("ensemble and operator round trip")
{
    auto dir = scratch_dir("io");
    auto sys = build_rda_system('h', 12);
    auto ens = testing::make_ensemble(sys, ProjectionSpec::leading(12, 3), TimeGrid(0.5, 4), 3, 1);
    write_ensemble(dir.string(), "e", ens, {{"case", "rda:h"}});
    auto back = read_ensemble(dir.string(), "e");
    CHECK(back.grid.NT == 4);
    CHECK(back.grid.T == doctest::Approx(0.5));
    for (int n = 0; n <= 4; ++n) {
        CHECK((back.Phi[n] - ens.Phi[n]).norm() < 1e-15 * (1 + ens.Phi[n].norm()));
        CHECK((back.PhiTilde[n] - ens.PhiTilde[n]).norm() < 1e-15 * (1 + ens.PhiTilde[n].norm()));
        CHECK((back.GTilde[n] - ens.GTilde[n]).norm() < 1e-15 * (1 + ens.GTilde[n].norm()));
    }
    CHECK(back.GHalf.size() == ens.GHalf.size());
    CHECK(read_metadata((dir / "e_meta.txt").string()).at("case") == "rda:h");

    OperatorSequence ops;
    ops.grid = TimeGrid(1.0, 3);
    ops.scheme = Scheme::BackwardEuler;
    ops.R.assign(3, Mat::Random(2, 2));
    ops.Rtilde.assign(3, Mat::Random(2, 4));
    ops.K.assign(3, Mat::Random(2, 2));
    ops.B.assign(3, Mat::Random(2, 4));
    ops.m_support = 2;
    write_operator_sequence(dir.string(), "ops", ops);
    auto o = read_operator_sequence(dir.string(), "ops");
    CHECK(o.scheme == Scheme::BackwardEuler);
    CHECK(o.m_support == 2);
    CHECK((o.B[2] - ops.B[2]).norm() == 0.0);
}

}

TEST_SUITE("experiment") {

TEST_CASE("small convergence run")
{
    auto c = small(R"({"case": "rda:b", "N": 12, "T": 1.0, "dt_list": [0.125, 0.0625, 0.03125],
                       "N_s_train": 14, "N_s_test": 4})");
    c.output_dir = scratch_dir("conv").string();
    finalize(c, true);
    auto res = run_convergence(c);
    REQUIRE(res.rows.size() == 3);
    for (const auto& r : res.rows) CHECK(r.E_Phi < 1e-8);
    CHECK(!res.rows[0].rate_K);
    CHECK(*res.rows[2].rate_R == doctest::Approx(2.0).epsilon(0.2));
    emit(c, "convergence", res.artifact);
    CHECK(fs::exists(fs::path(c.output_dir) / (c.name + "_convergence.csv")));
    CHECK(fs::exists(fs::path(c.output_dir) / (c.name + "_convergence.md")));
    std::ifstream csv(fs::path(c.output_dir) / (c.name + "_convergence.csv"));
    std::string header;
    std::getline(csv, header);
    CHECK(header.find("config_hash") != std::string::npos);
}

TEST_CASE("single-level convergence has no rates")
{
    auto c = small(R"({"case": "rotation", "dt_list": [0.1]})");
    finalize(c, true);
    auto res = run_convergence(c);
    REQUIRE(res.rows.size() == 1);
    CHECK(!res.rows[0].rate_K);
    CHECK(!res.rows[0].rate_R);
}

TEST_CASE("finite memory with full support matches the full model")
{
    auto c = small(R"({"case": "rda:b", "N": 12, "T": 1.0, "dt_list": [0.1], "mode": "finite_memory",
                       "m_fraction_list": [0.5, 1.0], "N_s_train": 14, "N_s_test": 4, "lsqr_max_iter": 20000})");
    finalize(c, false);
    auto res = run_finite_memory(c);
    REQUIRE(res.rows.size() == 2);
    CHECK(res.rows[0].m == 5);
    CHECK(res.rows[1].m == 10);
    CHECK(res.rows[1].E_Phi < 1e-6);
    auto forced = small(R"({"case": "rda:g", "N": 12, "T": 1.0, "dt_list": [0.1], "mode": "finite_memory",
                            "m_fraction_list": [0.5]})");
    finalize(forced, false);
    CHECK_THROWS(run_finite_memory(forced));
}

TEST_CASE("single-cell regularization grid")
{
    auto c = small(R"({"case": "rda:e", "N": 12, "T": 1.0, "dt_list": [0.1], "mode": "partial_regularized",
                       "lambda_grid": [1e-4], "N_s_train": 14, "N_s_test": 4})");
    finalize(c, false);
    auto res = run_regularization(c);
    CHECK(res.E_Phi.rows() == 1);
    CHECK(res.E_Phi.cols() == 1);
    CHECK(res.artifact.table.rows.size() == 1);
}

}

TEST_SUITE("cli") {

TEST_CASE("exit codes")
{
    auto dir = scratch_dir("cli");
    std::ofstream(dir / "bad.json") << R"({"case": "rda:a", "bogus": 1})";
    std::ofstream(dir / "good.json") << R"({"case": "rotation", "dt_list": [0.5], "name": "rot"})";
    CHECK(run_cli("convergence --config " + (dir / "bad.json").string()) == 2);
    CHECK(run_cli("convergence --config " + (dir / "missing.json").string()) == 2);
    CHECK(run_cli("nonsense") == 2);
    const std::string out = " --output " + (dir / "out").string();
    CHECK(run_cli("generate --config " + (dir / "good.json").string() + out) == 0);
    CHECK(fs::exists(dir / "out" / "rot_train_L0_meta.txt"));
    CHECK(run_cli("reconstruct --config " + (dir / "good.json").string() + out) == 0);
    CHECK(run_cli("predict --config " + (dir / "good.json").string() + out) == 0);
    CHECK(read_metadata((dir / "out" / "rot_prediction_meta.txt").string()).at("source") == "prediction");
    std::ofstream(dir / "fm.json") << R"({"case": "rda:g", "N": 12, "T": 1.0, "dt_list": [0.5],
                                           "mode": "finite_memory", "m_fraction_list": [0.5]})";
    CHECK(run_cli("finite-memory --config " + (dir / "fm.json").string() + out) == 2);
    std::ofstream(dir / "other.json") << R"({"case": "rotation", "dt_list": [0.5], "name": "other"})";
    CHECK(run_cli("predict --config " + (dir / "other.json").string() + out) == 3);
}

}
