#pragma once

#include <string>
#include <utility>
#include <vector>

namespace visaw {

// Frozen nearest-neighbor index over unit-norm image embeddings. Built once,
// then read-only; retrieval is exhaustive (exact), not approximate.
struct ImageIndex {
  std::vector<std::string> ids;
  std::size_t dim = 0;
  std::vector<double> matrix;  // [N x dim] row-major, every row unit-norm

  std::size_t size() const { return ids.size(); }
  const double* row(std::size_t i) const { return matrix.data() + i * dim; }
};

// Normalizes each embedding and freezes the result. Duplicate ids and
// zero-norm vectors are rejected.
ImageIndex build_index(const std::vector<std::pair<std::string, std::vector<double>>>& entries);

struct RetrievalResult {
  std::vector<std::pair<std::string, double>> entries;  // (id, cosine), best first
  bool clipped = false;  // true when m exceeded the index size
};

// Exact top-m by cosine via partial selection over all rows. The query is
// normalized internally, so any positive rescaling of it is a no-op. Equal
// scores order by ascending index position.
RetrievalResult retrieve_top_m(const std::vector<double>& query, const ImageIndex& index,
                               std::size_t m);

// Fraction of (query embedding, gold id) pairs whose gold id appears in the
// top k. Gold ids must exist in the index.
double recall_at_k(const std::vector<std::pair<std::vector<double>, std::string>>& eval_pairs,
                   const ImageIndex& index, std::size_t k);

// One "query_id<TAB>rank<TAB>image_id<TAB>score" line per retrieved entry,
// rank starting at 1.
void write_retrieval_tsv(const std::string& path,
                         const std::vector<std::pair<std::string, RetrievalResult>>& results);

}  // namespace visaw
