#include "xreid/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>

#include "xreid/errors.hpp"
#include "xreid/metric.hpp"

namespace xreid {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

constexpr int kMultiShotSize = 10;

double sample_std(std::span<const double> xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace

double average_precision(std::span<const int> relevance) {
  int hits = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < relevance.size(); ++i) {
    if (relevance[i]) {
      ++hits;
      acc += static_cast<double>(hits) / static_cast<double>(i + 1);
    }
  }
  if (hits == 0) {
    throw ValidationError("average_precision: no relevant items");
  }
  return acc / hits;
}

RetrievalReport evaluate(const Model& model, const Dataset& test_split,
                         GalleryMode mode, int trials, std::uint64_t seed,
                         const CameraFilter& filter) {
  require(trials >= 1, "evaluate: need >= 1 trial");
  if (model.uses_csbn()) {
    require(model.csbn.mode == CsbnMode::eval,
            "evaluate: model must be in eval mode");
  }
  require(test_split.dim == model.shape.input_dim,
          "evaluate: dataset dimension mismatch, expected " +
              std::to_string(model.shape.input_dim) + ", got " +
              std::to_string(test_split.dim));

  // Per-identity sample indices; every identity needs both modalities.
  std::map<int, std::vector<int>> rgb_of;
  std::vector<int> queries;
  for (int i = 0; i < static_cast<int>(test_split.samples.size()); ++i) {
    const Sample& s = test_split.samples[i];
    if (s.modality == Modality::rgb) {
      rgb_of[s.id].push_back(i);
    } else {
      queries.push_back(i);
    }
  }
  require(!queries.empty(), "evaluate: no ir queries in test split");
  require(!rgb_of.empty(), "evaluate: no rgb gallery samples in test split");
  for (const int q : queries) {
    if (rgb_of.find(test_split.samples[q].id) == rgb_of.end()) {
      throw ValidationError("evaluate: identity " +
                            std::to_string(test_split.samples[q].id) +
                            " missing the rgb modality");
    }
  }

  // Embeddings do not change across trials.
  std::vector<std::vector<double>> embedded(test_split.samples.size());
  for (std::size_t i = 0; i < test_split.samples.size(); ++i) {
    embedded[i] = model.embed_eval(test_split.samples[i].features);
  }

  RetrievalReport report;
  report.mode = mode;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng = substream(seed, "trial", static_cast<std::uint64_t>(trial));

    // Gallery: identities in ascending order, one or up to ten rgb samples
    // each, picked at random without replacement.
    std::vector<int> gallery;
    for (auto& [id, indices] : rgb_of) {
      std::vector<int> pool = indices;
      rng.shuffle(pool);
      std::size_t take = mode == GalleryMode::single_shot
                             ? 1
                             : std::min<std::size_t>(kMultiShotSize, pool.size());
      for (std::size_t j = 0; j < take; ++j) gallery.push_back(pool[j]);
    }

    TrialResult trial_result;
    int valid_queries = 0;
    long excluded = 0;
    std::vector<std::pair<double, int>> order;  // (distance, gallery slot)
    for (int q : queries) {
      const Sample& query = test_split.samples[q];
      order.clear();
      bool any_relevant = false;
      for (int slot = 0; slot < static_cast<int>(gallery.size()); ++slot) {
        const Sample& g = test_split.samples[gallery[slot]];
        if (filter && filter(query, g)) continue;
        order.emplace_back(euclidean_distance(embedded[q], embedded[gallery[slot]]),
                           slot);
        any_relevant = any_relevant || g.id == query.id;
      }
      if (!any_relevant) {
        ++excluded;
        continue;
      }
      ++valid_queries;
      std::sort(order.begin(), order.end());  // ties: ascending gallery slot

      int first_match = -1;
      std::vector<int> relevance(order.size(), 0);
      for (std::size_t r = 0; r < order.size(); ++r) {
        if (test_split.samples[gallery[order[r].second]].id == query.id) {
          relevance[r] = 1;
          if (first_match < 0) first_match = static_cast<int>(r) + 1;
        }
      }
      if (first_match <= 1) trial_result.rank1 += 1.0;
      if (first_match <= 10) trial_result.rank10 += 1.0;
      if (first_match <= 20) trial_result.rank20 += 1.0;
      trial_result.map += average_precision(relevance);
    }
    require(valid_queries > 0, "evaluate: every query was excluded");
    trial_result.rank1 /= valid_queries;
    trial_result.rank10 /= valid_queries;
    trial_result.rank20 /= valid_queries;
    trial_result.map /= valid_queries;
    report.trials.push_back(trial_result);
    report.excluded_queries += excluded;
  }

  auto collect = [&](double TrialResult::* field) {
    std::vector<double> xs;
    xs.reserve(report.trials.size());
    for (const TrialResult& t : report.trials) xs.push_back(t.*field);
    return xs;
  };
  for (double TrialResult::* field :
       {&TrialResult::rank1, &TrialResult::rank10, &TrialResult::rank20,
        &TrialResult::map}) {
    std::vector<double> xs = collect(field);
    double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    report.mean.*field = mean;
    report.stddev.*field = sample_std(xs, mean);
  }
  return report;
}

void RetrievalReport::write_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("report: cannot open " + path);
  out << "trial,rank1,rank10,rank20,map\n";
  char buf[128];
  auto row = [&](const std::string& tag, const TrialResult& t) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n", tag.c_str(),
                  t.rank1, t.rank10, t.rank20, t.map);
    out << buf;
  };
  for (std::size_t i = 0; i < trials.size(); ++i) {
    row(std::to_string(i), trials[i]);
  }
  row("mean", mean);
  row("std", stddev);
  if (!out) throw ValidationError("report: write failed for " + path);
}

SeparabilityStats angular_separability(
    std::span<const std::vector<double>> embeddings, std::span<const int> labels,
    std::span<const Modality> modalities) {
  require(embeddings.size() == labels.size() &&
              embeddings.size() == modalities.size(),
          "angular_separability: length mismatch");
  std::vector<int> distinct(labels.begin(), labels.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  require(distinct.size() >= 2, "angular_separability: need >= 2 classes");

  double intra = 0.0, inter = 0.0;
  long n_intra = 0, n_inter = 0;
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
      if (modalities[i] == modalities[j]) continue;
      double c = cosine_similarity(embeddings[i], embeddings[j]);
      if (labels[i] == labels[j]) {
        intra += c;
        ++n_intra;
      } else {
        inter += c;
        ++n_inter;
      }
    }
  }
  require(n_intra > 0, "angular_separability: no cross-modality same-class pairs");
  require(n_inter > 0, "angular_separability: no cross-modality cross-class pairs");
  SeparabilityStats stats;
  stats.intra = intra / n_intra;
  stats.inter = inter / n_inter;
  stats.gap = stats.intra - stats.inter;
  return stats;
}

namespace {

// Cyclic Jacobi eigen-decomposition of a symmetric matrix; adequate for the
// small channel counts used here.
void symmetric_eigen(std::vector<std::vector<double>> a,
                     std::vector<double>& eigenvalues,
                     std::vector<std::vector<double>>& eigenvectors) {
  int n = static_cast<int>(a.size());
  eigenvectors.assign(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) eigenvectors[i][i] = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    }
    if (off < 1e-30) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        double t = (theta >= 0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = eigenvectors[k][p], vkq = eigenvectors[k][q];
          eigenvectors[k][p] = c * vkp - s * vkq;
          eigenvectors[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  eigenvalues.resize(n);
  for (int i = 0; i < n; ++i) eigenvalues[i] = a[i][i];
}

}  // namespace

void export_projection(std::span<const std::vector<double>> embeddings,
                       std::span<const int> labels,
                       std::span<const Modality> modalities,
                       const std::string& path) {
  require(embeddings.size() >= 3, "export_projection: need >= 3 embeddings");
  require(embeddings.size() == labels.size() &&
              embeddings.size() == modalities.size(),
          "export_projection: length mismatch");
  std::size_t n = embeddings.size();
  std::size_t k = embeddings[0].size();
  for (const auto& e : embeddings) {
    require(e.size() == k, "export_projection: inconsistent dimensionality");
  }

  std::vector<double> mean(k, 0.0);
  for (const auto& e : embeddings) {
    for (std::size_t c = 0; c < k; ++c) mean[c] += e[c];
  }
  for (double& m : mean) m /= static_cast<double>(n);

  // Population covariance of the centered data.
  std::vector<std::vector<double>> cov(k, std::vector<double>(k, 0.0));
  for (const auto& e : embeddings) {
    for (std::size_t r = 0; r < k; ++r) {
      double dr = e[r] - mean[r];
      for (std::size_t c = r; c < k; ++c) {
        cov[r][c] += dr * (e[c] - mean[c]);
      }
    }
  }
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t c = r; c < k; ++c) {
      cov[r][c] /= static_cast<double>(n);
      cov[c][r] = cov[r][c];
    }
  }

  std::vector<double> eigenvalues;
  std::vector<std::vector<double>> eigenvectors;
  symmetric_eigen(cov, eigenvalues, eigenvectors);

  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return eigenvalues[a] > eigenvalues[b]; });

  double trace = 0.0;
  for (double v : eigenvalues) trace += std::max(v, 0.0);
  double floor = 1e-12 * std::max(trace, 1.0);
  bool degenerate = k < 2 || eigenvalues[order[1]] <= floor;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("export_projection: cannot open " + path);
  if (degenerate) {
    out << "# covariance rank < 2: y axis padded with zeros\n";
  }
  out << "label,modality,x,y\n";
  char buf[96];
  for (std::size_t i = 0; i < n; ++i) {
    double x = 0.0, y = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      double d = embeddings[i][c] - mean[c];
      x += d * eigenvectors[c][order[0]];
      if (!degenerate) y += d * eigenvectors[c][order[1]];
    }
    std::snprintf(buf, sizeof(buf), "%d,%s,%.17g,%.17g\n", labels[i],
                  to_string(modalities[i]), x, y);
    out << buf;
  }
  if (!out) throw ValidationError("export_projection: write failed for " + path);
}

GalleryMode gallery_mode_from_string(const std::string& s) {
  if (s == "single_shot") return GalleryMode::single_shot;
  if (s == "multi_shot") return GalleryMode::multi_shot;
  throw ValidationError("unknown gallery mode '" + s +
                        "' (expected single_shot|multi_shot)");
}

const char* to_string(GalleryMode m) {
  return m == GalleryMode::single_shot ? "single_shot" : "multi_shot";
}

}  // namespace xreid
