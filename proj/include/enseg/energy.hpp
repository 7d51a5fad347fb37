#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "enseg/matrix.hpp"

namespace enseg {

/// Exponent of the energy-distance kernel. Must lie strictly inside (0, 2)
/// for the distance to characterize equality of distributions.
struct Alpha {
    explicit Alpha(double v = 1.0);
    double value;
};

/// An ordered sample of residual vectors from one regime. Rows are points.
struct ResidualCluster {
    Matrix points;
    int regime_index = -1;

    std::size_t size() const { return points.rows; }
    std::size_t dim() const { return points.cols; }
};

/// Dispersion statistics for one partitioning of residuals.
/// The decomposition identity t_alpha == s_alpha + w_alpha holds exactly for
/// the all-pairs (V-statistic) means used here.
struct EnergyReport {
    double s_alpha = 0.0; // between-sample energy
    double t_alpha = 0.0; // total dispersion of the pooled sample
    double w_alpha = 0.0; // within-sample dispersion
    double f_alpha = 0.0; // (S/k) / (W/(n-k-1)); +inf sentinel when W == 0, S > 0
    std::optional<double> p_value;
    bool degenerate = false; // set when W == 0 made the F ratio undefined
};

/// Within-sample mean convention for two_sample_energy. The V-statistic form
/// keeps the diagonal zeros in the n^2 denominator and makes the T = S + W
/// decomposition exact; the U-statistic form divides by n(n-1) instead.
enum class MeanKind { VStatistic, UStatistic };

/// Mean of |a_i - b_j|^alpha over all pairs. With a == b the zero diagonal
/// is included in the denominator (V-statistic form).
double pairwise_alpha_mean(const ResidualCluster& a, const ResidualCluster& b, Alpha alpha);

/// Empirical two-sample energy distance d_alpha = (mn/(m+n)) * (2 mu_ab - mu_aa - mu_bb).
/// Nonnegative for the V-statistic form; the U-statistic variant can go
/// slightly negative and requires both samples to have at least two points.
double two_sample_energy(const ResidualCluster& a, const ResidualCluster& b, Alpha alpha,
                         MeanKind kind = MeanKind::VStatistic);

/// Weighted sum of pairwise energy distances over all cluster pairs:
///   sum_{i<j} ((n_i + n_j) / (2 total_t)) d_alpha(U_i, U_j).
/// total_t is the normalizing sample count: the pooled size in ordinary use;
/// the full series length when accumulating prefix partitions inside the
/// segmentation recursion (both energies must share one denominator there).
double multi_sample_energy(std::span<const ResidualCluster> clusters, std::size_t total_t,
                           Alpha alpha);

/// Computes S, T, W and the F ratio for the given clusters (p_value unset).
/// Requires at least two clusters. W == 0 flags the report degenerate and
/// F becomes +inf (S > 0) or 0 (S == 0).
EnergyReport dispersion_decomposition(std::span<const ResidualCluster> clusters, Alpha alpha);

struct PermutationOptions {
    int num_permutations = 199;
    std::uint64_t seed = 0;
    /// When true, p = (1 + count)/(R+1) instead of the plain count/(R+1),
    /// guaranteeing a strictly positive p-value.
    bool add_one = false;
    int threads = 1;
};

/// Permutation test of distributional homogeneity across the clusters.
/// Pools all points, relabels them R times preserving cluster sizes, and
/// returns the full report with p = #{F_r >= F}/(R+1). Deterministic in
/// opts.seed; each replicate draws from its own derived substream, so the
/// result does not depend on opts.threads.
EnergyReport permutation_test(std::span<const ResidualCluster> clusters, Alpha alpha,
                              const PermutationOptions& opts);

namespace detail {

/// |a - b|^alpha for two points of equal dimension.
double alpha_distance(std::span<const double> a, std::span<const double> b, double alpha);

/// Sum of |a_i - b_j|^alpha over the full cross product of rows.
double cross_pair_sum(const Matrix& a, const Matrix& b, double alpha);

/// Sum over all ordered pairs (i, j) of rows of a, diagonal included.
double within_pair_sum(const Matrix& a, double alpha);

} // namespace detail

} // namespace enseg
