#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "reid/dataset.hpp"
#include "reid/errors.hpp"
#include "reid/numerics.hpp"

namespace reid {

// Query-by-gallery Euclidean distances plus the metadata the ranking
// protocol needs.
struct ScoreMatrix {
  std::vector<std::string> query_ids;
  std::vector<int> query_identities;
  std::vector<int> query_cameras;
  std::vector<std::string> gallery_ids;
  std::vector<int> gallery_identities;
  std::vector<int> gallery_cameras;
  Matrix distances;  // queries x gallery

  std::size_t query_count() const { return query_ids.size(); }
  std::size_t gallery_count() const { return gallery_ids.size(); }
};

template <typename Model>
ScoreMatrix score_matrix(const Model& model,
                         const std::vector<const FeatureItem*>& queries,
                         const std::vector<const FeatureItem*>& gallery) {
  ScoreMatrix sm;
  std::vector<Vector> query_emb, gallery_emb;
  query_emb.reserve(queries.size());
  gallery_emb.reserve(gallery.size());
  for (const FeatureItem* item : queries) {
    sm.query_ids.push_back(item->id);
    sm.query_identities.push_back(item->identity);
    sm.query_cameras.push_back(item->camera);
    query_emb.push_back(model.embed(item->seq));
  }
  for (const FeatureItem* item : gallery) {
    sm.gallery_ids.push_back(item->id);
    sm.gallery_identities.push_back(item->identity);
    sm.gallery_cameras.push_back(item->camera);
    gallery_emb.push_back(model.embed(item->seq));
  }
  sm.distances = Matrix(queries.size(), gallery.size());
  for (std::size_t p = 0; p < queries.size(); ++p) {
    for (std::size_t q = 0; q < gallery.size(); ++q) {
      sm.distances(p, q) = distance(query_emb[p], gallery_emb[q]);
    }
  }
  return sm;
}

// Per query row and per feature: min-max rescale to [0,1], then average
// across features. A constant row (max = min) maps to all zeros.
inline ScoreMatrix fuse_scores(const std::vector<ScoreMatrix>& matrices) {
  if (matrices.empty()) throw UsageError("fuse_scores: no matrices");
  const ScoreMatrix& first = matrices.front();
  for (const ScoreMatrix& m : matrices) {
    if (m.query_ids != first.query_ids || m.gallery_ids != first.gallery_ids) {
      throw DataError("fuse_scores: query/gallery id lists differ between features");
    }
  }
  ScoreMatrix out = first;
  out.distances = Matrix(first.query_count(), first.gallery_count());
  for (const ScoreMatrix& m : matrices) {
    for (std::size_t p = 0; p < m.query_count(); ++p) {
      double lo = m.distances(p, 0), hi = m.distances(p, 0);
      for (std::size_t q = 1; q < m.gallery_count(); ++q) {
        lo = std::min(lo, m.distances(p, q));
        hi = std::max(hi, m.distances(p, q));
      }
      const double span = hi - lo;
      for (std::size_t q = 0; q < m.gallery_count(); ++q) {
        const double scaled = span > 0.0 ? (m.distances(p, q) - lo) / span : 0.0;
        out.distances(p, q) += scaled / static_cast<double>(matrices.size());
      }
    }
  }
  return out;
}

// Multi-query protocol: rows of queries sharing one probe group — same
// identity seen by the same camera — are averaged into a single row.
inline ScoreMatrix multi_query_collapse(const ScoreMatrix& matrix) {
  ScoreMatrix out;
  out.gallery_ids = matrix.gallery_ids;
  out.gallery_identities = matrix.gallery_identities;
  out.gallery_cameras = matrix.gallery_cameras;

  std::vector<std::pair<int, int>> groups;  // (identity, camera) in first-seen order
  std::map<std::pair<int, int>, std::vector<std::size_t>> members;
  for (std::size_t p = 0; p < matrix.query_count(); ++p) {
    const auto key = std::make_pair(matrix.query_identities[p], matrix.query_cameras[p]);
    auto [it, inserted] = members.try_emplace(key);
    if (inserted) groups.push_back(key);
    it->second.push_back(p);
  }

  out.distances = Matrix(groups.size(), matrix.gallery_count());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const std::vector<std::size_t>& rows = members.at(groups[g]);
    out.query_ids.push_back(matrix.query_ids[rows.front()]);
    out.query_identities.push_back(groups[g].first);
    out.query_cameras.push_back(groups[g].second);
    for (std::size_t q = 0; q < matrix.gallery_count(); ++q) {
      double acc = 0.0;
      for (std::size_t row : rows) acc += matrix.distances(row, q);
      out.distances(g, q) = acc / static_cast<double>(rows.size());
    }
  }
  return out;
}

namespace detail {

// Gallery indices valid for one query under the cross-camera protocol:
// items sharing both identity and camera with the query are excluded.
// Returned in ascending distance, ties broken by gallery index.
inline std::vector<std::size_t> ranked_gallery(const ScoreMatrix& m, std::size_t p) {
  std::vector<std::size_t> order;
  order.reserve(m.gallery_count());
  for (std::size_t q = 0; q < m.gallery_count(); ++q) {
    if (m.gallery_identities[q] == m.query_identities[p] &&
        m.gallery_cameras[q] == m.query_cameras[p]) {
      continue;
    }
    order.push_back(q);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return m.distances(p, a) < m.distances(p, b);
  });
  return order;
}

}  // namespace detail

struct CmcResult {
  std::vector<double> cmc;  // length = gallery size
  std::size_t excluded_queries = 0;
};

inline CmcResult cmc(const ScoreMatrix& matrix) {
  CmcResult result;
  result.cmc.assign(matrix.gallery_count(), 0.0);
  std::size_t included = 0;
  for (std::size_t p = 0; p < matrix.query_count(); ++p) {
    const std::vector<std::size_t> order = detail::ranked_gallery(matrix, p);
    std::size_t rank = 0;
    bool found = false;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (matrix.gallery_identities[order[pos]] == matrix.query_identities[p]) {
        rank = pos;
        found = true;
        break;
      }
    }
    if (!found) {
      ++result.excluded_queries;
      continue;
    }
    ++included;
    for (std::size_t k = rank; k < result.cmc.size(); ++k) result.cmc[k] += 1.0;
  }
  if (included > 0) {
    for (double& v : result.cmc) v /= static_cast<double>(included);
  }
  return result;
}

struct MapResult {
  double map = 0.0;
  std::size_t excluded_queries = 0;
};

inline MapResult mean_average_precision(const ScoreMatrix& matrix) {
  MapResult result;
  double ap_sum = 0.0;
  std::size_t included = 0;
  for (std::size_t p = 0; p < matrix.query_count(); ++p) {
    const std::vector<std::size_t> order = detail::ranked_gallery(matrix, p);
    double precision_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      if (matrix.gallery_identities[order[pos]] == matrix.query_identities[p]) {
        ++hits;
        precision_sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
      }
    }
    if (hits == 0) {
      ++result.excluded_queries;
      continue;
    }
    ++included;
    ap_sum += precision_sum / static_cast<double>(hits);
  }
  if (included > 0) result.map = ap_sum / static_cast<double>(included);
  return result;
}

struct EvalReport {
  std::vector<double> cmc;
  double rank1 = 0.0;
  double map = 0.0;
  std::string protocol;  // "single-query" or "multi-query"
  std::size_t excluded_queries = 0;
};

inline EvalReport make_report(const ScoreMatrix& matrix, const std::string& protocol) {
  EvalReport report;
  const CmcResult c = cmc(matrix);
  const MapResult m = mean_average_precision(matrix);
  report.cmc = c.cmc;
  report.rank1 = c.cmc.empty() ? 0.0 : c.cmc.front();
  report.map = m.map;
  report.protocol = protocol;
  report.excluded_queries = c.excluded_queries;
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  return nlohmann::json{{"cmc", report.cmc},
                        {"rank1", report.rank1},
                        {"map", report.map},
                        {"protocol", report.protocol},
                        {"excluded_queries", report.excluded_queries}};
}

}  // namespace reid
