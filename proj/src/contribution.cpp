#include "pod/contribution.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace pod {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

GaussianFit exact_single(std::span<const double> values, double floor,
                         bool& floored) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  floored = var < floor;
  GaussianFit fit;
  fit.components.push_back({1.0, mean, std::max(var, floor)});
  fit.count = values.size();
  return fit;
}

}  // namespace

FitResult fit_gaussian(std::span<const double> values, const FitOptions& opts,
                       std::uint64_t seed) {
  if (values.size() < 2) throw std::invalid_argument("fit_gaussian needs at least 2 samples");
  if (opts.components < 1) throw std::invalid_argument("fit_gaussian needs >= 1 component");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("fit_gaussian: non-finite sample");
  }
  FitResult result;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = static_cast<std::size_t>(
      std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  std::sort(sorted.begin(), sorted.end());

  const auto k = std::min<std::size_t>(static_cast<std::size_t>(opts.components), distinct);
  bool floored = false;
  const auto single = exact_single(values, opts.variance_floor, floored);
  if (k == 1) {
    result.fit = single;
    result.variance_floored = floored;
    return result;
  }

  const std::size_t n = values.size();
  const double overall_var = single.components.front().variance;
  // Components may not shrink below a small fraction of the overall spread;
  // otherwise EM can collapse a component onto a single sample.
  const double floor = std::max(opts.variance_floor, 1e-4 * overall_var);

  Rng rng(seed);
  std::vector<GaussianComponent> comps(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double pos = (static_cast<double>(c) + 0.25 + 0.5 * rng.uniform()) /
                       static_cast<double>(k);
    const auto idx = std::min(n - 1, static_cast<std::size_t>(pos * static_cast<double>(n)));
    comps[c] = {1.0 / static_cast<double>(k), sorted[idx], overall_var};
  }

  std::vector<double> resp(n * k);
  double prev_ll = -INFINITY;
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    // E-step in log space.
    double ll = 0.0;
    std::vector<double> log_norm(k);
    for (std::size_t c = 0; c < k; ++c) {
      log_norm[c] = std::log(comps[c].weight) - 0.5 * (kLog2Pi + std::log(comps[c].variance));
    }
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -INFINITY;
      for (std::size_t c = 0; c < k; ++c) {
        const auto& g = comps[c];
        const double d = values[i] - g.mean;
        const double lp = log_norm[c] - 0.5 * d * d / g.variance;
        resp[i * k + c] = lp;
        mx = std::max(mx, lp);
      }
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += std::exp(resp[i * k + c] - mx);
      const double lse = mx + std::log(s);
      ll += lse;
      for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(resp[i * k + c] - lse);
    }
    // M-step.
    std::vector<GaussianComponent> next;
    next.reserve(k);
    for (std::size_t c = 0; c < comps.size(); ++c) {
      double nc = 0.0;
      double sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nc += resp[i * k + c];
        sx += resp[i * k + c] * values[i];
      }
      if (nc < 1e-8) continue;
      const double mean = sx / nc;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = values[i] - mean;
        sv += resp[i * k + c] * d * d;
      }
      next.push_back({nc / static_cast<double>(n), mean, std::max(sv / nc, floor)});
    }
    if (next.size() != comps.size()) {
      // A component emptied out; refit with one fewer.
      FitOptions fewer = opts;
      fewer.components = static_cast<int>(next.size());
      return fit_gaussian(values, fewer, seed);
    }
    comps = std::move(next);
    if (std::abs(ll - prev_ll) <= opts.tolerance * static_cast<double>(n)) {
      ++it;
      break;
    }
    prev_ll = ll;
  }

  std::sort(comps.begin(), comps.end(),
            [](const auto& a, const auto& b) { return a.mean < b.mean; });
  double wsum = 0.0;
  for (const auto& c : comps) wsum += c.weight;
  for (auto& c : comps) c.weight /= wsum;
  result.fit.components = std::move(comps);
  result.fit.count = n;
  result.iterations = it;
  return result;
}

DataSummary summarize(const Dataset& d, const FitOptions& opts, std::uint64_t seed) {
  DataSummary s;
  s.count = d.size();
  const auto q = d.feature_count();
  for (std::size_t k = 0; k < q; ++k) {
    const auto col = d.column(k);
    if (col.size() >= 2) {
      s.per_feature.push_back(fit_gaussian(col, opts, derive_seed(seed, {k})).fit);
    } else {
      GaussianFit fit;
      fit.components.push_back({1.0, col.empty() ? 0.0 : col.front(), opts.variance_floor});
      fit.count = col.size();
      s.per_feature.push_back(std::move(fit));
    }
  }
  return s;
}

int Slicing::slice_of(double x) const {
  const auto idx = static_cast<long long>(std::floor((x - min) / width));
  return static_cast<int>(std::clamp<long long>(idx, 0, slices - 1));
}

Slicing slice_range(std::span<const GaussianFit> fits, int n_slices,
                    double gaussian_range) {
  if (fits.empty()) throw std::invalid_argument("slice_range: no fits");
  if (n_slices < 1) throw std::invalid_argument("slice_range: n_slices must be >= 1");
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& fit : fits) {
    for (const auto& c : fit.components) {
      const double sd = std::sqrt(c.variance);
      lo = std::min(lo, c.mean - gaussian_range * sd);
      hi = std::max(hi, c.mean + gaussian_range * sd);
    }
  }
  if (!(hi > lo)) throw std::invalid_argument("slice_range: degenerate zero-width range");
  return Slicing{lo, hi, (hi - lo) / n_slices, n_slices};
}

SliceHistogram random_samples(const GaussianFit& fit, double gaussian_range,
                              std::uint64_t n_samples, const Slicing& slicing, Rng& rng) {
  SliceHistogram h;
  h.counts.assign(static_cast<std::size_t>(slicing.slices), 0);
  for (std::uint64_t s = 0; s < n_samples; ++s) {
    double u = rng.uniform();
    const GaussianComponent* comp = &fit.components.back();
    for (const auto& c : fit.components) {
      if (u < c.weight) {
        comp = &c;
        break;
      }
      u -= c.weight;
    }
    double z;
    do {
      z = rng.normal();
    } while (std::abs(z) > gaussian_range);
    const double x = comp->mean + z * std::sqrt(comp->variance);
    ++h.counts[static_cast<std::size_t>(slicing.slice_of(x))];
  }
  h.total = n_samples;
  return h;
}

std::vector<double> feature_contribution_mass(std::span<const std::vector<double>> masses) {
  if (masses.empty()) throw std::invalid_argument("feature_contribution: no users");
  const auto slices = masses.front().size();
  std::vector<double> slice_total(slices, 0.0);
  double total = 0.0;
  for (const auto& m : masses) {
    if (m.size() != slices) throw std::invalid_argument("feature_contribution: slicing differs");
    for (std::size_t j = 0; j < slices; ++j) {
      slice_total[j] += m[j];
      total += m[j];
    }
  }
  if (!(total > 0.0)) throw std::invalid_argument("feature_contribution: all histograms empty");
  std::vector<double> shares(masses.size(), 0.0);
  for (std::size_t j = 0; j < slices; ++j) {
    if (slice_total[j] <= 0.0) continue;
    const double credit = slice_total[j] / total;
    for (std::size_t i = 0; i < masses.size(); ++i) {
      shares[i] += credit * (masses[i][j] / slice_total[j]);
    }
  }
  return shares;
}

std::vector<double> feature_contribution(std::span<const SliceHistogram> histograms) {
  // Same rule as the mass version, in exact arithmetic so that users with
  // equal histograms receive bit-identical shares.
  if (histograms.empty()) throw std::invalid_argument("feature_contribution: no users");
  const auto slices = histograms.front().counts.size();
  std::vector<std::uint64_t> slice_total(slices, 0);
  std::uint64_t total = 0;
  for (const auto& h : histograms) {
    if (h.counts.size() != slices) throw std::invalid_argument("feature_contribution: slicing differs");
    for (std::size_t j = 0; j < slices; ++j) {
      slice_total[j] += h.counts[j];
      total += h.counts[j];
    }
  }
  if (total == 0) throw std::invalid_argument("feature_contribution: all histograms empty");
  std::vector<double> shares(histograms.size(), 0.0);
  for (std::size_t i = 0; i < histograms.size(); ++i) {
    Rational r = 0;
    for (std::size_t j = 0; j < slices; ++j) {
      if (slice_total[j] == 0) continue;
      r += Rational(slice_total[j]) / total * Rational(histograms[i].counts[j]) / slice_total[j];
    }
    shares[i] = static_cast<double>(r);
  }
  return shares;
}

double ContributionVector::sum() const {
  return std::accumulate(shares.begin(), shares.end(), 0.0);
}

namespace {

std::size_t common_feature_count(std::span<const DataSummary> summaries,
                                 std::span<const std::uint64_t> counts) {
  if (summaries.size() != counts.size()) {
    throw std::invalid_argument("contribution: summaries and counts differ in length");
  }
  std::size_t q = 0;
  bool seen = false;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    if (counts[i] == 0) continue;
    if (!seen) {
      q = summaries[i].feature_count();
      seen = true;
    } else if (summaries[i].feature_count() != q) {
      throw std::invalid_argument("contribution: feature count mismatch between users");
    }
  }
  if (!seen || q == 0) throw std::invalid_argument("contribution: no user with data");
  return q;
}

template <typename PerFeature>
ContributionVector assemble(std::size_t users, std::size_t q, PerFeature&& per_feature) {
  ContributionVector out;
  out.shares.assign(users, 0.0);
  for (std::size_t k = 0; k < q; ++k) {
    auto r = per_feature(k);
    for (std::size_t i = 0; i < users; ++i) out.shares[i] += r[i] / static_cast<double>(q);
    out.per_feature.push_back(std::move(r));
  }
  return out;
}

std::vector<GaussianFit> fits_for_feature(std::span<const DataSummary> summaries,
                                          std::span<const std::uint64_t> counts,
                                          std::size_t k) {
  std::vector<GaussianFit> fits;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    if (counts[i] > 0) fits.push_back(summaries[i].per_feature[k]);
  }
  return fits;
}

}  // namespace

ContributionVector compute_contribution(std::span<const DataSummary> summaries,
                                        std::span<const std::uint64_t> counts,
                                        const ContributionParams& params,
                                        std::uint64_t seed) {
  const auto q = common_feature_count(summaries, counts);
  const auto users = summaries.size();
  return assemble(users, q, [&](std::size_t k) {
    const auto fits = fits_for_feature(summaries, counts, k);
    const auto slicing = slice_range(fits, params.slices, params.gaussian_range);
    std::vector<SliceHistogram> hist(users);
    for (std::size_t i = 0; i < users; ++i) {
      hist[i].counts.assign(static_cast<std::size_t>(params.slices), 0);
      if (counts[i] == 0) continue;
      const auto n_samples = std::max<std::uint64_t>(
          1, static_cast<std::uint64_t>(std::llround(static_cast<double>(counts[i]) *
                                                     params.sample_rate)));
      Rng rng(derive_seed(seed, {k, i}));
      hist[i] = random_samples(summaries[i].per_feature[k], params.gaussian_range,
                               n_samples, slicing, rng);
    }
    return feature_contribution(hist);
  });
}

double truncated_mixture_mass(const GaussianFit& fit, double gaussian_range,
                              double lo, double hi) {
  const double norm = normal_cdf(gaussian_range) - normal_cdf(-gaussian_range);
  double mass = 0.0;
  for (const auto& c : fit.components) {
    const double sd = std::sqrt(c.variance);
    const double a = std::max(lo, c.mean - gaussian_range * sd);
    const double b = std::min(hi, c.mean + gaussian_range * sd);
    if (b <= a) continue;
    mass += c.weight * (normal_cdf((b - c.mean) / sd) - normal_cdf((a - c.mean) / sd)) / norm;
  }
  return mass;
}

ContributionVector expected_contribution(std::span<const DataSummary> summaries,
                                         std::span<const std::uint64_t> counts,
                                         const ContributionParams& params) {
  const auto q = common_feature_count(summaries, counts);
  const auto users = summaries.size();
  return assemble(users, q, [&](std::size_t k) {
    const auto fits = fits_for_feature(summaries, counts, k);
    const auto slicing = slice_range(fits, params.slices, params.gaussian_range);
    std::vector<std::vector<double>> masses(users,
                                            std::vector<double>(slicing.slices, 0.0));
    for (std::size_t i = 0; i < users; ++i) {
      if (counts[i] == 0) continue;
      for (int j = 0; j < slicing.slices; ++j) {
        const double lo = slicing.min + j * slicing.width;
        const double hi = j + 1 == slicing.slices ? slicing.max : lo + slicing.width;
        masses[i][j] = static_cast<double>(counts[i]) *
                       truncated_mixture_mass(summaries[i].per_feature[k],
                                              params.gaussian_range, lo, hi);
      }
    }
    return feature_contribution_mass(masses);
  });
}

double uneven_rate(std::span<const std::uint64_t> counts) {
  if (counts.empty()) throw std::invalid_argument("uneven_rate: no users");
  const double n = static_cast<double>(counts.size());
  double avg = 0.0;
  for (auto c : counts) avg += static_cast<double>(c);
  avg /= n;
  double ss = 0.0;
  for (auto c : counts) ss += (static_cast<double>(c) - avg) * (static_cast<double>(c) - avg);
  return std::sqrt(ss) / n;
}

double overlap_rate(std::span<const Dataset> datasets) {
  std::uint64_t total = 0;
  std::map<std::uint64_t, int> holders;
  for (const auto& d : datasets) {
    total += d.size();
    std::set<std::uint64_t> own;
    for (const auto& r : d.rows) own.insert(r.id);
    for (auto id : own) ++holders[id];
  }
  if (total == 0) throw std::invalid_argument("overlap_rate: zero total count");
  std::uint64_t shared = 0;
  for (const auto& [id, k] : holders) shared += k >= 2 ? 1 : 0;
  return static_cast<double>(shared) / static_cast<double>(total);
}

double redundancy_rate(std::span<const Dataset> datasets) {
  std::uint64_t total = 0;
  std::set<std::uint64_t> distinct;
  for (const auto& d : datasets) {
    total += d.size();
    for (const auto& r : d.rows) distinct.insert(r.id);
  }
  if (total == 0) throw std::invalid_argument("redundancy_rate: zero total count");
  return static_cast<double>(total - distinct.size()) / static_cast<double>(total);
}

}  // namespace pod
