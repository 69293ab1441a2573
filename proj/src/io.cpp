#include "mz/io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace mz {

namespace {

std::ofstream open_out(const std::string& path)
{
    auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path);
    return f;
}

std::string num(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<double> parse_row(const std::string& line)
{
    std::vector<double> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

}  // namespace

void write_snapshots(const std::string& path, const TimeGrid& grid, const std::vector<Mat>& seq, double t_offset)
{
    auto f = open_out(path);
    const int k = seq.empty() ? 0 : static_cast<int>(seq.front().cols());
    f << "t,traj";
    for (int c = 0; c < k; ++c) f << ",comp_" << c;
    f << "\n";
    for (size_t n = 0; n < seq.size(); ++n) {
        const double t = grid.t(n + t_offset);
        for (Eigen::Index s = 0; s < seq[n].rows(); ++s) {
            f << num(t) << "," << s;
            for (Eigen::Index c = 0; c < seq[n].cols(); ++c) f << "," << num(seq[n](s, c));
            f << "\n";
        }
    }
}

std::vector<Mat> read_snapshots(const std::string& path, std::vector<double>* times)
{
    auto f = open_in(path);
    std::string line;
    std::getline(f, line);
    std::vector<std::vector<std::vector<double>>> blocks;
    std::vector<double> ts;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto v = parse_row(line);
        if (v.size() < 2) throw std::runtime_error("malformed snapshot row in " + path);
        if (ts.empty() || v[0] != ts.back()) {
            ts.push_back(v[0]);
            blocks.emplace_back();
        }
        if (static_cast<size_t>(v[1]) != blocks.back().size()) throw std::runtime_error("snapshot rows not sorted by trajectory in " + path);
        blocks.back().emplace_back(v.begin() + 2, v.end());
    }
    std::vector<Mat> out;
    for (const auto& b : blocks) {
        Mat m(b.size(), b.empty() ? 0 : b.front().size());
        for (size_t s = 0; s < b.size(); ++s)
            for (size_t c = 0; c < b[s].size(); ++c) m(s, c) = b[s][c];
        out.push_back(std::move(m));
    }
    if (times) *times = ts;
    return out;
}

void write_operators(const std::string& path, const std::vector<Mat>& seq)
{
    auto f = open_out(path);
    f << "n,row,col,value\n";
    for (size_t n = 0; n < seq.size(); ++n)
        for (Eigen::Index i = 0; i < seq[n].rows(); ++i)
            for (Eigen::Index j = 0; j < seq[n].cols(); ++j) f << n << "," << i << "," << j << "," << num(seq[n](i, j)) << "\n";
}

std::vector<Mat> read_operators(const std::string& path)
{
    auto f = open_in(path);
    std::string line;
    std::getline(f, line);
    std::vector<std::vector<std::array<double, 3>>> cells;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        auto v = parse_row(line);
        if (v.size() != 4) throw std::runtime_error("malformed operator row in " + path);
        size_t n = static_cast<size_t>(v[0]);
        if (cells.size() <= n) cells.resize(n + 1);
        cells[n].push_back({v[1], v[2], v[3]});
    }
    std::vector<Mat> out;
    for (const auto& c : cells) {
        int r = 0, k = 0;
        for (const auto& e : c) {
            r = std::max(r, static_cast<int>(e[0]) + 1);
            k = std::max(k, static_cast<int>(e[1]) + 1);
        }
        Mat m = Mat::Zero(r, k);
        for (const auto& e : c) m(static_cast<int>(e[0]), static_cast<int>(e[1])) = e[2];
        out.push_back(std::move(m));
    }
    return out;
}

void write_metadata(const std::string& path, const Metadata& meta)
{
    auto f = open_out(path);
    for (const auto& [k, v] : meta) f << k << "=" << v << "\n";
}

Metadata read_metadata(const std::string& path)
{
    auto f = open_in(path);
    Metadata m;
    std::string line;
    while (std::getline(f, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        m[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return m;
}

void write_ensemble(const std::string& dir, const std::string& prefix, const SnapshotEnsemble& ens, Metadata meta)
{
    const std::string base = dir + "/" + prefix;
    write_snapshots(base + "_Phi.csv", ens.grid, ens.Phi);
    write_snapshots(base + "_PhiTilde.csv", ens.grid, ens.PhiTilde);
    write_snapshots(base + "_PhiDot.csv", ens.grid, ens.PhiDot);
    if (ens.forced()) {
        write_snapshots(base + "_G.csv", ens.grid, ens.G);
        write_snapshots(base + "_GTilde.csv", ens.grid, ens.GTilde);
        write_snapshots(base + "_GHalf.csv", ens.grid, ens.GHalf, 0.5);
        write_snapshots(base + "_GTildeHalf.csv", ens.grid, ens.GTildeHalf, 0.5);
    }
    meta["T"] = num(ens.grid.T);
    meta["N_T"] = std::to_string(ens.grid.NT);
    meta["N_s"] = std::to_string(ens.Ns);
    meta["d"] = std::to_string(ens.d);
    meta["d_tilde"] = std::to_string(ens.d_tilde);
    meta["observation_mode"] = ens.mode == Observation::Full ? "full" : "partial";
    meta["forced"] = ens.forced() ? "1" : "0";
    write_metadata(base + "_meta.txt", meta);
}

SnapshotEnsemble read_ensemble(const std::string& dir, const std::string& prefix)
{
    const std::string base = dir + "/" + prefix;
    auto meta = read_metadata(base + "_meta.txt");
    SnapshotEnsemble ens;
    ens.grid = TimeGrid(std::stod(meta.at("T")), std::stoi(meta.at("N_T")));
    ens.Ns = std::stoi(meta.at("N_s"));
    ens.d = std::stoi(meta.at("d"));
    ens.d_tilde = std::stoi(meta.at("d_tilde"));
    ens.mode = meta.at("observation_mode") == "full" ? Observation::Full : Observation::Partial;
    ens.Phi = read_snapshots(base + "_Phi.csv");
    ens.PhiTilde = read_snapshots(base + "_PhiTilde.csv");
    ens.PhiDot = read_snapshots(base + "_PhiDot.csv");
    if (meta.at("forced") == "1") {
        ens.G = read_snapshots(base + "_G.csv");
        ens.GTilde = read_snapshots(base + "_GTilde.csv");
        ens.GHalf = read_snapshots(base + "_GHalf.csv");
        ens.GTildeHalf = read_snapshots(base + "_GTildeHalf.csv");
    }
    ens.validate();
    return ens;
}

void write_operator_sequence(const std::string& dir, const std::string& prefix, const OperatorSequence& ops, Metadata meta)
{
    const std::string base = dir + "/" + prefix;
    write_operators(base + "_R.csv", ops.R);
    write_operators(base + "_K.csv", ops.K);
    write_operators(base + "_B.csv", ops.B);
    if (!ops.Rtilde.empty()) write_operators(base + "_Rtilde.csv", ops.Rtilde);
    meta["scheme"] = to_string(ops.scheme);
    meta["T"] = num(ops.grid.T);
    meta["N_T"] = std::to_string(ops.grid.NT);
    meta["m_support"] = std::to_string(ops.m_support);
    write_metadata(base + "_meta.txt", meta);
}

OperatorSequence read_operator_sequence(const std::string& dir, const std::string& prefix)
{
    const std::string base = dir + "/" + prefix;
    auto meta = read_metadata(base + "_meta.txt");
    OperatorSequence ops;
    ops.grid = TimeGrid(std::stod(meta.at("T")), std::stoi(meta.at("N_T")));
    ops.scheme = scheme_from_string(meta.at("scheme"));
    ops.m_support = std::stoi(meta.at("m_support"));
    ops.R = read_operators(base + "_R.csv");
    ops.K = read_operators(base + "_K.csv");
    ops.B = read_operators(base + "_B.csv");
    if (std::filesystem::exists(base + "_Rtilde.csv")) ops.Rtilde = read_operators(base + "_Rtilde.csv");
    ops.validate();
    return ops;
}

}  // namespace mz
