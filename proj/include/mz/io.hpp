#pragma once

#include "mz/state_space.hpp"

#include <map>

namespace mz {

using Metadata = std::map<std::string, std::string>;

// header t,traj,comp_0,...; rows sorted by (t, traj)
void write_snapshots(const std::string& path, const TimeGrid& grid, const std::vector<Mat>& seq, double t_offset = 0.0);
std::vector<Mat> read_snapshots(const std::string& path, std::vector<double>* times = nullptr);

// header n,row,col,value
void write_operators(const std::string& path, const std::vector<Mat>& seq);
std::vector<Mat> read_operators(const std::string& path);

void write_metadata(const std::string& path, const Metadata& meta);
Metadata read_metadata(const std::string& path);

// Writes Phi, PhiTilde, PhiDot, G, GTilde (and half-node forcing) under dir/prefix_*.csv.
void write_ensemble(const std::string& dir, const std::string& prefix, const SnapshotEnsemble& ens, Metadata meta = {});
SnapshotEnsemble read_ensemble(const std::string& dir, const std::string& prefix);

void write_operator_sequence(const std::string& dir, const std::string& prefix, const OperatorSequence& ops, Metadata meta = {});
OperatorSequence read_operator_sequence(const std::string& dir, const std::string& prefix);

}  // namespace mz
