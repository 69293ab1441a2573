#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mz {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Scheme { BackwardEuler, Midpoint, ForwardEuler };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

// Offset of the R/B nodes inside a step: t_{n+1}, t_{n+1/2} or t_n.
double node_offset(Scheme s);

struct TimeGrid {
    double T = 1.0;
    int NT = 1;

    TimeGrid() = default;
    TimeGrid(double T_, int NT_);

    // Largest grid with spacing dt that fits in [0, T].
    static TimeGrid from_dt(double T, double dt);

    double dt() const { return T / NT; }
    double t(double n) const { return n * dt(); }
};

class ProjectionSpec {
public:
    ProjectionSpec() = default;
    ProjectionSpec(int N, std::vector<int> resolved);

    // Resolved set = first d components.
    static ProjectionSpec leading(int N, int d);

    int N() const { return N_; }
    int d() const { return static_cast<int>(res_.size()); }
    int d_tilde() const { return static_cast<int>(unres_.size()); }
    const std::vector<int>& resolved() const { return res_; }
    const std::vector<int>& unresolved() const { return unres_; }

    std::pair<Vec, Vec> split(const Vec& u) const;
    Vec merge(const Vec& phi, const Vec& phiTilde) const;

    // Column selection on ensembles whose rows are states.
    Mat resolved_cols(const Mat& X) const;
    Mat unresolved_cols(const Mat& X) const;

private:
    int N_ = 0;
    std::vector<int> res_;
    std::vector<int> unres_;
};

struct Blocks {
    Mat R, Rt, U, Ut;
};

Blocks extract_blocks(const Mat& A, const ProjectionSpec& proj);
Mat assemble_blocks(const Blocks& b, const ProjectionSpec& proj);

enum class Observation { Full, Partial };

// Rows are trajectories, columns are variables. Forcing vectors are left
// empty when the system is unforced; GHalf/GTildeHalf hold t_{n+1/2} values.
struct SnapshotEnsemble {
    TimeGrid grid;
    int Ns = 0;
    int d = 0;
    int d_tilde = 0;
    Observation mode = Observation::Full;
    std::vector<Mat> Phi;
    std::vector<Mat> PhiTilde;
    std::vector<Mat> PhiDot;
    std::vector<Mat> G;
    std::vector<Mat> GTilde;
    std::vector<Mat> GHalf;
    std::vector<Mat> GTildeHalf;

    bool forced() const { return !G.empty(); }
    bool half_forcing() const { return !GHalf.empty(); }
    void validate() const;
};

struct OperatorSequence {
    TimeGrid grid;
    Scheme scheme = Scheme::Midpoint;
    std::vector<Mat> R;
    std::vector<Mat> K;
    std::vector<Mat> B;
    std::vector<Mat> Rtilde;
    int m_support = -1;  // K_n = 0 for n > m_support when >= 0

    int d() const { return R.empty() ? 0 : static_cast<int>(R.front().rows()); }
    int d_tilde() const { return B.empty() ? 0 : static_cast<int>(B.front().cols()); }
    double r_offset() const { return node_offset(scheme); }
    void validate() const;
};

}  // namespace mz
