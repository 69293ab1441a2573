#pragma once

#include "mz/reconstruct.hpp"

namespace mz {

struct PredictionInput {
    OperatorSequence ops;
    Mat phi0;       // Ns x d
    Mat phiTilde0;  // Ns x d_tilde
    std::vector<Mat> G, GTilde, GHalf;  // empty when unforced
    int m_support = -1;                 // overrides ops.m_support when >= 0
};

PredictionInput prediction_input(const OperatorSequence& ops, const SnapshotEnsemble& test);

// Resolved trajectory Phi^pred_n, n = 0..N_T, marched with the scheme of ops.
std::vector<Mat> predict(const PredictionInput& inp);

// Same operators with K and B removed.
OperatorSequence markovian_only(const OperatorSequence& ops);

// Multiply-adds spent on the memory and forcing convolutions for one trajectory.
double history_cost_estimate(const TimeGrid& grid, int d, int d_tilde = 0);

}  // namespace mz
