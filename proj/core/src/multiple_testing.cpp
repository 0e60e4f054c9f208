#include "medsel/multiple_testing.hpp"

#include "medsel/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace medsel {

Correction parse_correction(const std::string& name) {
  std::string s;
  for (char ch : name) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (s == "bonferroni") return Correction::Bonferroni;
  if (s == "holm") return Correction::Holm;
  if (s == "hochberg") return Correction::Hochberg;
  if (s == "hommel") return Correction::Hommel;
  if (s == "bh" || s == "fdr" || s == "benjamini-hochberg") return Correction::BH;
  throw InvalidInput("unknown multiple-testing correction '" + name + "'");
}

std::string to_string(Correction c) {
  switch (c) {
    case Correction::Bonferroni: return "bonferroni";
    case Correction::Holm: return "holm";
    case Correction::Hochberg: return "hochberg";
    case Correction::Hommel: return "hommel";
    case Correction::BH: return "bh";
  }
  return "bonferroni";
}

namespace {

void check(const std::vector<double>& p) {
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!(p[i] >= 0.0 && p[i] <= 1.0))
      throw InvalidInput("p-value " + std::to_string(i) + " lies outside [0, 1]");
}

std::vector<std::size_t> ascending(const std::vector<double>& p) {
  std::vector<std::size_t> o(p.size());
  std::iota(o.begin(), o.end(), 0);
  std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  return o;
}

std::vector<double> hommel(const std::vector<double>& praw) {
  const std::size_t n = praw.size();
  const auto o = ascending(praw);
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = praw[o[i]];
  const double dn = static_cast<double>(n);
  double start = 1.0;
  for (std::size_t i = 0; i < n; ++i) start = std::min(start, dn * p[i] / static_cast<double>(i + 1));
  std::vector<double> q(n, start), pa(n, start);
  for (std::size_t m = n - 1; m >= 2; --m) {
    const double dm = static_cast<double>(m);
    double q1 = std::numeric_limits<double>::infinity();
    for (std::size_t i = n - m + 1, k = 2; i < n; ++i, ++k)  // i2, 0-based
      q1 = std::min(q1, dm * p[i] / static_cast<double>(k));
    for (std::size_t i = 0; i <= n - m; ++i) q[i] = std::min(dm * p[i], q1);
    for (std::size_t i = n - m + 1; i < n; ++i) q[i] = q[n - m];
    for (std::size_t i = 0; i < n; ++i) pa[i] = std::max(pa[i], q[i]);
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[o[i]] = std::max(pa[i], p[i]);
  return out;
}

}  // namespace

std::vector<double> adjust_pvalues(const std::vector<double>& p, Correction method) {
  check(p);
  const std::size_t n = p.size();
  std::vector<double> out(n);
  if (n == 0) return out;
  const double dn = static_cast<double>(n);
  const auto o = ascending(p);
  switch (method) {
    case Correction::Bonferroni:
      for (std::size_t i = 0; i < n; ++i) out[i] = std::min(1.0, dn * p[i]);
      break;
    case Correction::Holm: {
      double run = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        run = std::max(run, static_cast<double>(n - r) * p[o[r]]);
        out[o[r]] = std::min(1.0, run);
      }
      break;
    }
    case Correction::Hochberg: {
      double run = std::numeric_limits<double>::infinity();
      for (std::size_t r = n; r-- > 0;) {
        run = std::min(run, static_cast<double>(n - r) * p[o[r]]);
        out[o[r]] = std::min(1.0, run);
      }
      break;
    }
    case Correction::BH: {
      double run = std::numeric_limits<double>::infinity();
      for (std::size_t r = n; r-- > 0;) {
        run = std::min(run, dn / static_cast<double>(r + 1) * p[o[r]]);
        out[o[r]] = std::min(1.0, run);
      }
      break;
    }
    case Correction::Hommel:
      out = n == 1 ? p : hommel(p);
      break;
  }
  for (std::size_t i = 0; i < n; ++i) out[i] = std::clamp(out[i], p[i], 1.0);
  return out;
}

std::vector<bool> reject_sequential(const std::vector<double>& p, Correction method, double alpha) {
  check(p);
  const std::size_t m = p.size();
  std::vector<bool> rej(m, false);
  if (m == 0) return rej;
  const double dm = static_cast<double>(m);
  const auto o = ascending(p);
  std::size_t count = 0;  // reject the `count` smallest
  switch (method) {
    case Correction::Bonferroni:
      for (std::size_t i = 0; i < m; ++i) rej[i] = p[i] <= alpha / dm;
      return rej;
    case Correction::Holm:
      while (count < m && p[o[count]] <= alpha / static_cast<double>(m - count)) ++count;
      break;
    case Correction::Hochberg:
      for (std::size_t k = m; k >= 1; --k)
        if (p[o[k - 1]] <= alpha / static_cast<double>(m - k + 1)) {
          count = k;
          break;
        }
      break;
    case Correction::BH:
      for (std::size_t k = m; k >= 1; --k)
        if (p[o[k - 1]] <= static_cast<double>(k) * alpha / dm) {
          count = k;
          break;
        }
      break;
    case Correction::Hommel: {
      // largest j such that p_(m-j+k) > k alpha / j for every k = 1..j
      std::size_t jstar = 0;
      for (std::size_t j = m; j >= 1; --j) {
        bool all = true;
        for (std::size_t k = 1; k <= j && all; ++k)
          all = p[o[m - j + k - 1]] > static_cast<double>(k) * alpha / static_cast<double>(j);
        if (all) {
          jstar = j;
          break;
        }
      }
      for (std::size_t i = 0; i < m; ++i)
        rej[i] = jstar == 0 ? true : p[i] <= alpha / static_cast<double>(jstar);
      return rej;
    }
  }
  for (std::size_t r = 0; r < count; ++r) rej[o[r]] = true;
  return rej;
}

}  // namespace medsel
