#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "scnn/random.hpp"
#include "scnn/retrieval.hpp"

namespace scnn {

using Matrix = std::vector<std::vector<double>>;

struct EigenDecomposition {
  std::vector<double> values;  // descending
  Matrix vectors;              // vectors[k] is the unit eigenvector of values[k]
};

/// Cyclic Jacobi eigensolver for a dense symmetric matrix.
inline EigenDecomposition symmetric_eigen(Matrix a) {
  const std::size_t n = a.size();
  Matrix v(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) v[i][i] = 1.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0, total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        total += a[i][j] * a[i][j];
        if (i != j) off += a[i][j] * a[i][j];
      }
    if (off <= 1e-30 * std::max(total, 1e-300)) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return a[x][x] > a[y][y]; });
  EigenDecomposition out;
  for (std::size_t k : order) {
    out.values.push_back(a[k][k]);
    std::vector<double> vec(n);
    for (std::size_t i = 0; i < n; ++i) vec[i] = v[i][k];
    out.vectors.push_back(std::move(vec));
  }
  return out;
}

struct PcaResult {
  Matrix points;                          // N x out_dim
  Matrix components;                      // out_dim x in_dim, orthonormal rows
  std::vector<double> mean;               // in_dim
  std::vector<double> eigenvalues;        // all covariance eigenvalues, descending
  std::vector<double> explained_variance; // out_dim ratios, nonincreasing
};

inline Matrix covariance(const Matrix& data, std::vector<double>* mean_out = nullptr) {
  const std::size_t n = data.size(), d = data.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& row : data)
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  for (auto& m : mean) m /= static_cast<double>(n);
  Matrix cov(d, std::vector<double>(d, 0.0));
  for (const auto& row : data)
    for (std::size_t i = 0; i < d; ++i) {
      const double ci = row[i] - mean[i];
      for (std::size_t j = i; j < d; ++j) cov[i][j] += ci * (row[j] - mean[j]);
    }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov[i][j] /= static_cast<double>(n - 1);
      cov[j][i] = cov[i][j];
    }
  if (mean_out) *mean_out = std::move(mean);
  return cov;
}

/// Mean-centred projection onto the top out_dim covariance eigenvectors.
inline PcaResult pca(const Matrix& data, std::size_t out_dim) {
  if (data.size() < 2) detail::fail(ErrorCategory::data, "projection", "PCA needs at least 2 points");
  const std::size_t d = data.front().size();
  for (const auto& row : data)
    if (row.size() != d) detail::fail(ErrorCategory::shape, "projection", "PCA rows have inconsistent dimension");
  if (out_dim == 0 || out_dim > std::min(data.size(), d)) {
    detail::fail(ErrorCategory::range, "projection", "PCA output dimension ", out_dim, " must be in [1, ",
                 std::min(data.size(), d), "]");
  }
  PcaResult r;
  const EigenDecomposition eig = symmetric_eigen(covariance(data, &r.mean));
  r.eigenvalues = eig.values;
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  for (std::size_t k = 0; k < out_dim; ++k) {
    r.components.push_back(eig.vectors[k]);
    r.explained_variance.push_back(total > 0.0 ? std::max(eig.values[k], 0.0) / total : 0.0);
  }
  for (const auto& row : data) {
    std::vector<double> p(out_dim, 0.0);
    for (std::size_t k = 0; k < out_dim; ++k)
      for (std::size_t j = 0; j < d; ++j) p[k] += (row[j] - r.mean[j]) * r.components[k][j];
    r.points.push_back(std::move(p));
  }
  return r;
}

struct TsneConfig {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  std::size_t momentum_switch = 250;
  double early_exaggeration = 12.0;
  std::size_t exaggeration_iterations = 250;
  std::uint64_t seed = 0;
};

struct Affinities {
  Matrix conditional;            // row-normalized p_{j|i}
  std::vector<double> entropy;   // Shannon entropy (nats) of each row
};

inline Matrix squared_distances(const Matrix& x) {
  const std::size_t n = x.size();
  Matrix d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < x[i].size(); ++k) {
        const double t = x[i][k] - x[j][k];
        s += t * t;
      }
      d[i][j] = d[j][i] = s;
    }
  return d;
}

/// Per-row Gaussian bandwidth by bisection so each row's entropy equals log(perplexity).
inline Affinities calibrate_affinities(const Matrix& dist2, double perplexity) {
  const std::size_t n = dist2.size();
  const double target = std::log(perplexity);
  Affinities a{Matrix(n, std::vector<double>(n, 0.0)), std::vector<double>(n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    if (n == 2) {
      a.conditional[i][1 - i] = 1.0;
      continue;
    }
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dmin = std::min(dmin, dist2[i][j]);
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    std::vector<double>& p = a.conditional[i];
    double entropy = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0, weighted = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const double shifted = dist2[i][j] - dmin;
        p[j] = std::exp(-beta * shifted);
        sum += p[j];
        weighted += shifted * p[j];
      }
      entropy = std::log(sum) + beta * weighted / sum;
      for (std::size_t j = 0; j < n; ++j) p[j] /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-10) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
    a.entropy[i] = entropy;
  }
  return a;
}

/// (P + P^T) / 2N
inline Matrix joint_probabilities(const Affinities& a) {
  const std::size_t n = a.conditional.size();
  Matrix p(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p[i][j] = (a.conditional[i][j] + a.conditional[j][i]) / (2.0 * static_cast<double>(n));
  return p;
}

struct TsneResult {
  std::vector<std::array<double, 2>> points;
  double kl_initial = 0.0;
  double kl_final = 0.0;
};

namespace detail {
inline double tsne_kl(const Matrix& p, const std::vector<std::array<double, 2>>& y) {
  const std::size_t n = y.size();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) {
        const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
        z += 1.0 / (1.0 + dx * dx + dy * dy);
      }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || p[i][j] <= 0.0) continue;
      const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      const double q = std::max(1.0 / (1.0 + dx * dx + dy * dy) / z, 1e-12);
      kl += p[i][j] * std::log(p[i][j] / q);
    }
  return kl;
}
}  // namespace detail

/// Exact O(N^2) t-SNE to two dimensions with early exaggeration, a momentum
/// switch and per-coordinate adaptive gains.
inline TsneResult tsne(const Matrix& x, const TsneConfig& cfg) {
  const std::size_t n = x.size();
  if (n < 2) detail::fail(ErrorCategory::data, "projection", "t-SNE needs at least 2 points");
  if (n > 5000) detail::fail(ErrorCategory::data, "projection", "exact t-SNE is limited to 5000 points, got ", n);
  if (!(cfg.perplexity > 0.0) || !(3.0 * cfg.perplexity < static_cast<double>(n - 1))) {
    detail::fail(ErrorCategory::range, "projection", "perplexity ", cfg.perplexity, " infeasible for ", n,
                 " points (need 0 < 3*perplexity < N-1)");
  }
  const Matrix p = joint_probabilities(calibrate_affinities(squared_distances(x), cfg.perplexity));

  Rng rng(cfg.seed);
  TsneResult r;
  r.points.resize(n);
  for (auto& pt : r.points) pt = {rng.normal(0.0, 1e-4), rng.normal(0.0, 1e-4)};
  r.kl_initial = detail::tsne_kl(p, r.points);

  std::vector<std::array<double, 2>> update(n, {0.0, 0.0}), gains(n, {1.0, 1.0}), grad(n);
  Matrix num(n, std::vector<double>(n, 0.0));
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const double exag = it < cfg.exaggeration_iterations ? cfg.early_exaggeration : 1.0;
    const double momentum = it < cfg.momentum_switch ? cfg.initial_momentum : cfg.final_momentum;
    double z = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = r.points[i][0] - r.points[j][0], dy = r.points[i][1] - r.points[j][1];
        num[i][j] = num[j][i] = 1.0 / (1.0 + dx * dx + dy * dy);
        z += 2.0 * num[i][j];
      }
    for (std::size_t i = 0; i < n; ++i) {
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const double m = (exag * p[i][j] - num[i][j] / z) * num[i][j];
        gx += m * (r.points[i][0] - r.points[j][0]);
        gy += m * (r.points[i][1] - r.points[j][1]);
      }
      grad[i] = {4.0 * gx, 4.0 * gy};
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 2; ++k) {
        double& g = gains[i][k];
        g = (grad[i][k] > 0.0) != (update[i][k] > 0.0) ? g + 0.2 : g * 0.8;
        g = std::max(g, 0.01);
        update[i][k] = momentum * update[i][k] - cfg.learning_rate * g * grad[i][k];
        r.points[i][k] += update[i][k];
      }
    }
    double mx = 0.0, my = 0.0;
    for (const auto& pt : r.points) {
      mx += pt[0];
      my += pt[1];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    for (auto& pt : r.points) {
      pt[0] -= mx;
      pt[1] -= my;
    }
  }
  r.kl_final = detail::tsne_kl(p, r.points);
  return r;
}

struct ProjectionConfig {
  std::size_t pca_dim = 50;
  TsneConfig tsne;
};

struct ProjectedPoint {
  std::string id;
  int label = kUnknownLabel;
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const ProjectedPoint&, const ProjectedPoint&) = default;
};

struct Projection {
  std::vector<ProjectedPoint> points;
  double kl_initial = 0.0;
  double kl_final = 0.0;
};

/// PCA to pca_dim (skipped when the input is already that small), then t-SNE to 2-D.
inline Projection project_embeddings(const std::vector<EmbeddingEntry>& entries, const ProjectionConfig& cfg) {
  Projection out;
  if (entries.empty()) return out;
  Matrix data;
  for (const auto& e : entries) data.emplace_back(e.vector.begin(), e.vector.end());
  if (data.front().size() > cfg.pca_dim) data = pca(data, std::min(cfg.pca_dim, data.size())).points;
  const TsneResult t = tsne(data, cfg.tsne);
  out.kl_initial = t.kl_initial;
  out.kl_final = t.kl_final;
  for (std::size_t i = 0; i < entries.size(); ++i)
    out.points.push_back({entries[i].id, entries[i].label, t.points[i][0], t.points[i][1]});
  return out;
}

namespace detail {
inline std::string shortest(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}
}  // namespace detail

inline std::string projection_csv(const std::vector<ProjectedPoint>& points) {
  std::string out = "id,label,x,y\n";
  for (const auto& p : points)
    out += p.id + "," + std::to_string(p.label) + "," + detail::shortest(p.x) + "," + detail::shortest(p.y) + "\n";
  return out;
}

inline void export_projection(const std::vector<ProjectedPoint>& points, const std::string& path) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) detail::fail(ErrorCategory::io, "projection", "cannot open '", path, "' for writing");
  out << projection_csv(points);
  if (!out) detail::fail(ErrorCategory::io, "projection", "failed writing '", path, "'");
}

inline std::vector<ProjectedPoint> parse_projection_csv(const std::string& text) {
  std::vector<ProjectedPoint> out;
  std::size_t pos = text.find('\n');
  if (pos == std::string::npos || text.substr(0, pos) != "id,label,x,y") {
    detail::fail(ErrorCategory::format, "projection", "missing projection CSV header");
  }
  ++pos;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.find(',', c1 + 1), c3 = line.find(',', c2 + 1);
    if (c3 == std::string::npos) detail::fail(ErrorCategory::format, "projection", "malformed row '", line, "'");
    ProjectedPoint p;
    p.id = line.substr(0, c1);
    std::from_chars(line.data() + c1 + 1, line.data() + c2, p.label);
    std::from_chars(line.data() + c2 + 1, line.data() + c3, p.x);
    std::from_chars(line.data() + c3 + 1, line.data() + line.size(), p.y);
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace scnn
