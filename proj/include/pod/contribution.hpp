// Gaussian summaries of private data and sampling-based contribution shares.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pod/rng.hpp"
#include "pod/trainer.hpp"
#include "pod/types.hpp"

namespace pod {

struct FitOptions {
  int components = 3;
  int max_iterations = 200;
  double tolerance = 1e-6;
  double variance_floor = 1e-9;
};

struct FitResult {
  GaussianFit fit;
  bool variance_floored = false;  // constant (or near-constant) feature
  int iterations = 0;
};

/// EM fit of a one-dimensional mixture. One component returns the sample
/// mean and population variance exactly. Initial means are drawn from seeded
/// positions inside equal quantile bins, so the fit is a pure function of
/// (values, opts, seed).
FitResult fit_gaussian(std::span<const double> values, const FitOptions& opts,
                       std::uint64_t seed = 0);

/// Per-feature fits of a whole dataset.
DataSummary summarize(const Dataset& d, const FitOptions& opts, std::uint64_t seed = 0);

struct Slicing {
  double min = 0.0;
  double max = 0.0;
  double width = 0.0;
  int slices = 0;

  int slice_of(double x) const;
};

/// Envelope of all components truncated at `gaussian_range` standard
/// deviations, split into `n_slices` equal slices.
Slicing slice_range(std::span<const GaussianFit> fits, int n_slices,
                    double gaussian_range);

struct SliceHistogram {
  std::vector<std::uint64_t> counts;  // per slice
  std::uint64_t total = 0;
};

/// Draws `n_samples` points from the mixture, each component truncated to
/// +-gaussian_range sigma, and bins them.
SliceHistogram random_samples(const GaussianFit& fit, double gaussian_range,
                              std::uint64_t n_samples, const Slicing& slicing, Rng& rng);

/// Per slice j the credit is (samples in j)/(all samples); user i receives
/// credit_j * n_ij / sum_m n_mj. Returns one share per histogram.
std::vector<double> feature_contribution(std::span<const SliceHistogram> histograms);

/// Same rule on real-valued slice masses (used by the analytic oracle).
std::vector<double> feature_contribution_mass(
    std::span<const std::vector<double>> masses);

struct ContributionParams {
  double sample_rate = 0.1;
  int slices = 16;
  double gaussian_range = 3.0;
};

struct ContributionVector {
  std::vector<double> shares;                    // r_i
  std::vector<std::vector<double>> per_feature;  // [feature][user] r_ik

  double sum() const;
};

/// Full pipeline over users' summaries. Users with count 0 get share 0.
ContributionVector compute_contribution(std::span<const DataSummary> summaries,
                                        std::span<const std::uint64_t> counts,
                                        const ContributionParams& params,
                                        std::uint64_t seed);

/// Exact counterpart: slice masses integrated analytically from the
/// truncated mixtures and scaled by each user's count.
ContributionVector expected_contribution(std::span<const DataSummary> summaries,
                                         std::span<const std::uint64_t> counts,
                                         const ContributionParams& params);

/// Mass of a mixture (components truncated at +-gaussian_range sigma and
/// renormalised) inside [lo, hi).
double truncated_mixture_mass(const GaussianFit& fit, double gaussian_range,
                              double lo, double hi);

/// (1/n) sqrt(sum (count_i - avg)^2)
double uneven_rate(std::span<const std::uint64_t> counts);

/// Rows held by two or more users, each counted once, over the total row count.
/// Bounded by 1/2, reached when every row is held by exactly two users.
double overlap_rate(std::span<const Dataset> datasets);

/// Redundant copies over total rows: (sum count_i - |union|) / sum count_i.
/// Unlike overlap_rate this reaches (n-1)/n for n identical datasets; the
/// overlap allocation generator targets this quantity.
double redundancy_rate(std::span<const Dataset> datasets);

double normal_cdf(double z);
double normal_pdf(double z);

}  // namespace pod
