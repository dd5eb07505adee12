#include "visaw/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

#include "visaw/errors.hpp"

namespace visaw {

ImageIndex build_index(const std::vector<std::pair<std::string, std::vector<double>>>& entries) {
  if (entries.empty()) fail(ErrorKind::Ingestion, "build_index: no entries");
  ImageIndex index;
  index.dim = entries.front().second.size();
  if (index.dim == 0) fail(ErrorKind::Dimension, "build_index: zero-dimensional embeddings");
  index.ids.reserve(entries.size());
  index.matrix.reserve(entries.size() * index.dim);

  std::unordered_set<std::string> seen;
  for (const auto& [id, vec] : entries) {
    if (!seen.insert(id).second) {
      fail(ErrorKind::Ingestion, "build_index: duplicate id \"" + id + "\"");
    }
    if (vec.size() != index.dim) {
      fail(ErrorKind::Dimension, "build_index: embedding for \"" + id + "\" has length " +
                                     std::to_string(vec.size()) + ", expected " +
                                     std::to_string(index.dim));
    }
    double nsq = 0.0;
    for (double v : vec) nsq += v * v;
    double norm = std::sqrt(nsq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      fail(ErrorKind::Numeric, "build_index: cannot normalize embedding for \"" + id + "\"");
    }
    index.ids.push_back(id);
    for (double v : vec) index.matrix.push_back(v / norm);
  }
  return index;
}

RetrievalResult retrieve_top_m(const std::vector<double>& query, const ImageIndex& index,
                               std::size_t m) {
  if (query.size() != index.dim) {
    fail(ErrorKind::Dimension, "retrieve_top_m: query length " + std::to_string(query.size()) +
                                   " does not match index dim " + std::to_string(index.dim));
  }
  RetrievalResult result;
  if (m == 0) return result;

  double nsq = 0.0;
  for (double v : query) nsq += v * v;
  double norm = std::sqrt(nsq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    fail(ErrorKind::Numeric, "retrieve_top_m: cannot normalize query");
  }

  const std::size_t n = index.size();
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = index.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < index.dim; ++j) s += r[j] * query[j];
    scores[i] = s / norm;
  }

  std::size_t take = m;
  if (take > n) {
    take = n;
    result.clipped = true;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + take, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return a < b;
                    });
  result.entries.reserve(take);
  for (std::size_t k = 0; k < take; ++k) {
    result.entries.emplace_back(index.ids[order[k]], scores[order[k]]);
  }
  return result;
}

double recall_at_k(const std::vector<std::pair<std::vector<double>, std::string>>& eval_pairs,
                   const ImageIndex& index, std::size_t k) {
  if (eval_pairs.empty()) fail(ErrorKind::Evaluation, "recall_at_k: no evaluation pairs");
  if (k == 0) fail(ErrorKind::Evaluation, "recall_at_k: k must be positive");

  std::unordered_set<std::string> known(index.ids.begin(), index.ids.end());
  std::size_t hits = 0;
  for (const auto& [query, gold] : eval_pairs) {
    if (!known.count(gold)) {
      fail(ErrorKind::Evaluation, "recall_at_k: gold id \"" + gold + "\" is not in the index");
    }
    RetrievalResult top = retrieve_top_m(query, index, k);
    for (const auto& [id, score] : top.entries) {
      if (id == gold) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(eval_pairs.size());
}

void write_retrieval_tsv(const std::string& path,
                         const std::vector<std::pair<std::string, RetrievalResult>>& results) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "write_retrieval_tsv: cannot open " + path);
  char buf[64];
  for (const auto& [query_id, result] : results) {
    for (std::size_t rank = 0; rank < result.entries.size(); ++rank) {
      const auto& [id, score] = result.entries[rank];
      std::snprintf(buf, sizeof(buf), "%.17g", score);
      out << query_id << '\t' << (rank + 1) << '\t' << id << '\t' << buf << '\n';
    }
  }
  if (!out) fail(ErrorKind::Io, "write_retrieval_tsv: write to " + path + " failed");
}

}  // namespace visaw
