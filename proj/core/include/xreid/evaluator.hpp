#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "xreid/data.hpp"
#include "xreid/model.hpp"

namespace xreid {

enum class GalleryMode { single_shot, multi_shot };

struct TrialResult {
  double rank1 = 0.0;
  double rank10 = 0.0;
  double rank20 = 0.0;
  double map = 0.0;
};

struct RetrievalReport {
  GalleryMode mode = GalleryMode::single_shot;
  std::vector<TrialResult> trials;
  TrialResult mean;
  TrialResult stddev;       // sample std over trials (0 for one trial)
  long excluded_queries = 0;  // queries with no same-id gallery entry, summed

  void write_csv(const std::string& path) const;
};

// Optional per-query gallery exclusion (the camera-location skip rule);
// returns true when the gallery sample must be hidden from this query.
using CameraFilter = std::function<bool(const Sample& query, const Sample& gallery)>;

// Cross-modality retrieval: ir samples query an rgb gallery re-drawn per
// trial (one image per identity in single_shot, up to ten in multi_shot),
// ranked by ascending Euclidean distance with ties broken by gallery index.
// The model must be in eval mode when it carries batch statistics.
RetrievalReport evaluate(const Model& model, const Dataset& test_split,
                         GalleryMode mode, int trials, std::uint64_t seed,
                         const CameraFilter& filter = nullptr);

// Mean over the relevant positions i (1-based among relevant) of i / rank_i.
// relevance holds 0/1 flags in ranked order; at least one must be set.
double average_precision(std::span<const int> relevance);

struct SeparabilityStats {
  double intra = 0.0;  // mean cosine over same-label cross-modality pairs
  double inter = 0.0;  // mean cosine over different-label cross-modality pairs
  double gap = 0.0;    // intra - inter
};

SeparabilityStats angular_separability(
    std::span<const std::vector<double>> embeddings, std::span<const int> labels,
    std::span<const Modality> modalities);

// Projects embeddings onto the two leading principal axes of the centered
// embedding matrix and writes rows label,modality,x,y. With a covariance of
// rank < 2 the second axis is zero-padded and flagged in a header comment.
void export_projection(std::span<const std::vector<double>> embeddings,
                       std::span<const int> labels,
                       std::span<const Modality> modalities,
                       const std::string& path);

GalleryMode gallery_mode_from_string(const std::string& s);
const char* to_string(GalleryMode m);

}  // namespace xreid
