#include <algorithm>
#include <cmath>
#include <numeric>

#include "fakeaudio/analysis.hpp"
#include "fakeaudio/error.hpp"

namespace fakeaudio::analysis {

Rational reduced(std::uint64_t num, std::uint64_t den) {
  const auto g = std::gcd(num, den);
  return g == 0 ? Rational{num, den} : Rational{num / g, den / g};
}

std::vector<double> midranks(std::span<const double> pooled) {
  std::vector<std::size_t> idx(pooled.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<double> ranks(pooled.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && pooled[idx[j + 1]] == pooled[idx[i]]) ++j;
    // Positions i..j (0-based) share rank ((i+1) + (j+1)) / 2.
    const double rank = 0.5 * static_cast<double>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::vector<std::uint64_t> u_null_counts(std::size_t n1, std::size_t n2) {
  // table[i][j] is the distribution for sample sizes (i, j). The largest
  // pooled value belongs either to the first sample, beating all j values
  // of the second, or to the second sample, adding nothing.
  std::vector<std::vector<std::vector<std::uint64_t>>> table(n1 + 1, std::vector<std::vector<std::uint64_t>>(n2 + 1));
  for (std::size_t i = 0; i <= n1; ++i) {
    for (std::size_t j = 0; j <= n2; ++j) {
      auto& dist = table[i][j];
      dist.assign(i * j + 1, 0);
      if (i == 0 || j == 0) {
        dist[0] = 1;
        continue;
      }
      const auto& with_a = table[i - 1][j];
      for (std::size_t u = 0; u < with_a.size(); ++u) dist[u + j] += with_a[u];
      const auto& with_b = table[i][j - 1];
      for (std::size_t u = 0; u < with_b.size(); ++u) dist[u] += with_b[u];
    }
  }
  return table[n1][n2];
}

UTestResult mann_whitney_u(std::span<const double> sample_a, std::span<const double> sample_b) {
  if (sample_a.empty() || sample_b.empty()) throw ValidationError("Mann-Whitney U needs two non-empty samples");
  for (auto s : {sample_a, sample_b}) {
    for (double v : s) {
      if (!std::isfinite(v)) throw ValidationError("Mann-Whitney U samples must be finite");
    }
  }

  const std::size_t n1 = sample_a.size();
  const std::size_t n2 = sample_b.size();
  std::vector<double> pooled(sample_a.begin(), sample_a.end());
  pooled.insert(pooled.end(), sample_b.begin(), sample_b.end());
  const auto ranks = midranks(pooled);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < n1; ++i) rank_sum_a += ranks[i];

  UTestResult res;
  res.n1 = n1;
  res.n2 = n2;
  res.u = rank_sum_a - 0.5 * static_cast<double>(n1) * static_cast<double>(n1 + 1);

  // Tie groups, for both the method choice and the variance correction.
  auto sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  bool has_ties = false;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    if (t > 1) {
      has_ties = true;
      tie_term += t * t * t - t;
    }
    i = j + 1;
  }

  if (!has_ties && std::max(n1, n2) <= kExactMaxSampleSize) {
    const auto counts = u_null_counts(n1, n2);
    const auto u = static_cast<std::size_t>(std::llround(res.u));
    std::uint64_t total = 0;
    std::uint64_t at_most = 0;
    std::uint64_t at_least = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      total += counts[k];
      if (k <= u) at_most += counts[k];
      if (k >= u) at_least += counts[k];
    }
    const std::uint64_t num = std::min(total, 2 * std::min(at_most, at_least));
    res.method = UTestMethod::kExact;
    res.exact_p = reduced(num, total);
    res.p_value = res.exact_p->value();
    return res;
  }

  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  const double n = a + b;
  const double mean = 0.5 * a * b;
  const double variance = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  res.method = UTestMethod::kNormalApprox;
  if (!(variance > 0.0)) {
    res.p_value = 1.0;
    return res;
  }
  const double z = std::max(0.0, std::abs(res.u - mean) - 0.5) / std::sqrt(variance);
  res.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return res;
}

nlohmann::json to_json(const UTestResult& r) {
  nlohmann::json j = {
      {"u", r.u},
      {"p_value", r.p_value},
      {"n1", r.n1},
      {"n2", r.n2},
      {"method", r.method == UTestMethod::kExact ? "exact" : "normal_approx"},
  };
  if (r.exact_p) j["exact_p"] = {{"numerator", r.exact_p->num}, {"denominator", r.exact_p->den}};
  return j;
}

}  // namespace fakeaudio::analysis
