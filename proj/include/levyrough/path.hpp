#pragma once

#include "levyrough/algebra.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace levyrough {

enum class PathKind { CadlagStep, LogLinear };

std::string to_string(PathKind k);
PathKind path_kind_from_string(const std::string& s);

// Between stamps a cadlag_step path holds its last value; a log_linear path
// follows x_k exp(s log(x_k^{-1} x_{k+1})).
struct DiscretePath {
    Context ctx;
    double T = 1.0;
    PathKind kind = PathKind::LogLinear;
    std::vector<double> times;
    std::vector<GroupElement> points;

    std::size_t size() const { return points.size(); }
    const GroupElement& endpoint() const { return points.back(); }
    void validate(bool based = false) const;
    GroupElement at(double t) const;
    // Log of the increment over segment k (log_linear interpretation).
    LieElement segment_log(std::size_t k) const;
};

DiscretePath signature_lift(const Context& ctx, const std::vector<Eigen::VectorXd>& segments, double T = 1.0);
DiscretePath walk_from_array(const Context& ctx, const std::vector<GroupElement>& increments, double T = 1.0);
DiscretePath left_translate(const GroupElement& g, const DiscretePath& x);
// x on [0, T_x] followed by the x-endpoint translate of y on [T_x, T_x + T_y].
DiscretePath concatenate(const DiscretePath& x, const DiscretePath& y);

struct PvarOptions {
    std::size_t cap = 5000;
    // Interior candidate points per mixed-grade log_linear segment.
    int refine = 1;
};

struct PvarReport {
    double p = 1.0;
    double sum = 0.0;    // sup over partitions of sum d^p
    double value = 0.0;  // sum^{1/p}
    std::vector<std::size_t> witness;  // indices into the candidate points
    std::vector<double> witness_times;
};

struct OscillationReport {
    double delta = 0.0;
    std::size_t count = 0;
    std::vector<std::size_t> stop_times;  // point indices of tau_1, ..., tau_count
};

// Candidate points for p-variation: stamps, plus refinement points on log_linear segments.
void pvar_candidates(const DiscretePath& path, double p, int refine, std::vector<GroupElement>& pts,
                     std::vector<double>& times, std::vector<std::size_t>* stamp_index = nullptr);

// Exact DP over an ordered point list, partitions containing both ends.
double pvar_sum(const std::vector<GroupElement>& pts, double p, std::vector<std::size_t>* witness = nullptr);
// prefix[j] = sup over partitions of [0, j].
std::vector<double> pvar_prefix(const std::vector<GroupElement>& pts, double p);

PvarReport p_variation(const DiscretePath& path, double p, const PvarOptions& opt = {});
OscillationReport nu_delta(const DiscretePath& path, double delta);
OscillationReport nu_delta(const std::vector<GroupElement>& pts, double delta);
double max_oscillation(const std::vector<GroupElement>& pts);
double pvar_upper_bound(const DiscretePath& path, double p);
DiscretePath holder_reparam(const DiscretePath& path, double p, const PvarOptions& opt = {});

// Pairwise distances d(x_i, x_j) with inverses cached.
class DistanceTable {
public:
    explicit DistanceTable(const std::vector<GroupElement>& pts);
    double operator()(std::size_t i, std::size_t j) const;
    std::size_t size() const { return pts_.size(); }

private:
    const std::vector<GroupElement>& pts_;
    std::vector<Tensor> inv_;
    mutable Eigen::VectorXd scratch_;
};

} // namespace levyrough
