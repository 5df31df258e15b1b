#pragma once

// Independent reference computations used as test oracles. They avoid the
// library's code paths on purpose: plain loops, no log-sum-exp, no Eigen.

#include <cmath>
#include <cstddef>
#include <vector>

namespace oracle {

inline std::vector<double> softmax(const std::vector<double>& z) {
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    p[k] = std::exp(z[k]);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

inline double entropy(const std::vector<double>& z) {
  double h = 0.0;
  for (double p : softmax(z)) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

inline std::vector<double> toy_logits(std::size_t vocab, int image_answer, int prior_answer, double beta_image,
                                      double beta_prior, double visible) {
  std::vector<double> z(vocab, 0.0);
  z[static_cast<std::size_t>(image_answer)] += beta_image * visible;
  z[static_cast<std::size_t>(prior_answer)] += beta_prior;
  return z;
}

/// Fraction of evidence indices not present in `masked`.
inline double visible_fraction(const std::vector<std::size_t>& evidence, const std::vector<std::size_t>& masked) {
  if (evidence.empty()) return 0.0;
  std::size_t visible = 0;
  for (std::size_t e : evidence) {
    bool hit = false;
    for (std::size_t m : masked) hit = hit || m == e;
    if (!hit) ++visible;
  }
  return static_cast<double>(visible) / static_cast<double>(evidence.size());
}

/// Probability that a random positive outranks a random negative, ties half.
inline double pairwise_auroc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      if (s[i] > s[j]) {
        wins += 1.0;
      } else if (s[i] == s[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / pairs;
}

/// Determinant by cofactor expansion along the first row.
inline double determinant(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  if (n == 1) return a[0][0];
  double det = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::vector<double>> minor;
    for (std::size_t r = 1; r < n; ++r) {
      std::vector<double> row;
      for (std::size_t k = 0; k < n; ++k) {
        if (k != c) row.push_back(a[r][k]);
      }
      minor.push_back(row);
    }
    det += (c % 2 == 0 ? 1.0 : -1.0) * a[0][c] * determinant(minor);
  }
  return det;
}

/// (1/K) log det((1/K) Z^T Z + ridge I) with Z the centered embeddings; the
/// sum of log eigenvalues equals the log determinant.
inline double eigenscore(const std::vector<std::vector<double>>& x, double ridge) {
  const std::size_t K = x.size(), d = x[0].size();
  std::vector<double> mean(d, 0.0);
  for (const auto& row : x) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += row[k] / static_cast<double>(K);
  }
  std::vector<std::vector<double>> c(d, std::vector<double>(d, 0.0));
  for (const auto& row : x) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) c[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]) / static_cast<double>(K);
    }
  }
  for (std::size_t a = 0; a < d; ++a) c[a][a] += ridge;
  return std::log(determinant(c)) / static_cast<double>(K);
}

}  // namespace oracle
