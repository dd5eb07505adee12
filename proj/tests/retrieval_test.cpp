#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "visaw/errors.hpp"
#include "visaw/retrieval.hpp"
#include "visaw/rng.hpp"

using namespace visaw;

namespace {

std::vector<double> rand_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, 1.0);
  return v;
}

// Full-sort oracle: cosine against every row, stable order, take m.
std::vector<std::pair<std::string, double>> brute_force(const std::vector<double>& query,
                                                        const ImageIndex& index,
                                                        std::size_t m) {
  double qn = 0.0;
  for (double v : query) qn += v * v;
  qn = std::sqrt(qn);
  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t i = 0; i < index.size(); ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < index.dim; ++j) d += query[j] / qn * index.row(i)[j];
    scored.push_back({d, i});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < std::min(m, scored.size()); ++i) {
    out.push_back({index.ids[scored[i].second], scored[i].first});
  }
  return out;
}

}  // namespace

TEST_CASE("build_index normalizes rows and rejects bad input") {
  ImageIndex index = build_index({{"a", {3, 4}}, {"b", {0, 2}}});
  CHECK(index.size() == 2);
  CHECK(index.dim == 2);
  CHECK(index.row(0)[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(index.row(0)[1] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(index.row(1)[1] == doctest::Approx(1.0).epsilon(1e-15));

  CHECK_THROWS_AS(build_index({{"a", {1, 0}}, {"a", {0, 1}}}), Error);
  CHECK_THROWS_AS(build_index({{"a", {0, 0}}}), Error);
  CHECK_THROWS_AS(build_index({{"a", {1, 0}}, {"b", {1, 0, 0}}}), Error);
  CHECK_THROWS_AS(build_index({}), Error);
}

TEST_CASE("every vector retrieves itself first") {
  Rng rng(5);
  std::vector<std::pair<std::string, std::vector<double>>> entries;
  for (int i = 0; i < 20; ++i) entries.push_back({"v" + std::to_string(i), rand_vec(6, rng)});
  ImageIndex index = build_index(entries);
  for (int i = 0; i < 20; ++i) {
    RetrievalResult r = retrieve_top_m(entries[i].second, index, 1);
    REQUIRE(r.entries.size() == 1);
    CHECK(r.entries[0].first == entries[i].first);
    CHECK(r.entries[0].second == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("retrieve_top_m matches the full-sort oracle on random data") {
  Rng rng(31);
  std::vector<std::pair<std::string, std::vector<double>>> entries;
  for (int i = 0; i < 100; ++i) entries.push_back({"v" + std::to_string(i), rand_vec(8, rng)});
  ImageIndex index = build_index(entries);
  for (int q = 0; q < 40; ++q) {
    std::vector<double> query = rand_vec(8, rng);
    std::size_t m = 1 + rng.index(12);
    RetrievalResult got = retrieve_top_m(query, index, m);
    auto want = brute_force(query, index, m);
    REQUIRE(got.entries.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
      CHECK(got.entries[i].first == want[i].first);
      CHECK(got.entries[i].second == doctest::Approx(want[i].second).epsilon(1e-12));
    }
  }
}

TEST_CASE("equal scores order by index position") {
  // b and c are the same direction, so they tie exactly.
  ImageIndex index = build_index({{"b", {2, 0}}, {"c", {5, 0}}, {"far", {0, 1}}});
  RetrievalResult r = retrieve_top_m({1, 0}, index, 3);
  REQUIRE(r.entries.size() == 3);
  CHECK(r.entries[0].first == "b");
  CHECK(r.entries[1].first == "c");
  CHECK(r.entries[2].first == "far");
}

TEST_CASE("query scale does not change results") {
  Rng rng(7);
  std::vector<std::pair<std::string, std::vector<double>>> entries;
  for (int i = 0; i < 30; ++i) entries.push_back({"v" + std::to_string(i), rand_vec(5, rng)});
  ImageIndex index = build_index(entries);
  std::vector<double> q = rand_vec(5, rng);
  std::vector<double> q_scaled = q;
  for (double& v : q_scaled) v *= 37.5;
  RetrievalResult a = retrieve_top_m(q, index, 5);
  RetrievalResult b = retrieve_top_m(q_scaled, index, 5);
  REQUIRE(a.entries.size() == b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) {
    CHECK(a.entries[i].first == b.entries[i].first);
  }
}

TEST_CASE("m larger than the index clips and says so") {
  ImageIndex index = build_index({{"a", {1, 0}}, {"b", {0, 1}}});
  RetrievalResult r = retrieve_top_m({1, 0}, index, 10);
  CHECK(r.entries.size() == 2);
  CHECK(r.clipped);
  CHECK_FALSE(retrieve_top_m({1, 0}, index, 2).clipped);
  CHECK(retrieve_top_m({1, 0}, index, 0).entries.empty());
}

TEST_CASE("retrieve_top_m validates the query") {
  ImageIndex index = build_index({{"a", {1, 0}}});
  CHECK_THROWS_AS(retrieve_top_m({1, 0, 0}, index, 1), Error);
  CHECK_THROWS_AS(retrieve_top_m({0, 0}, index, 1), Error);
}

TEST_CASE("recall_at_k counts gold hits in the top k") {
  ImageIndex index = build_index({{"a", {1, 0}}, {"b", {0.9, 0.1}}, {"c", {0, 1}}});
  std::vector<std::pair<std::vector<double>, std::string>> eval = {
      {{1, 0}, "a"},   // rank 1 hit
      {{1, 0}, "b"},   // rank 2, inside k=2
      {{1, 0}, "c"},   // rank 3, outside
  };
  CHECK(recall_at_k(eval, index, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(recall_at_k(eval, index, 3) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(recall_at_k({{{1, 0}, "nope"}}, index, 1), Error);
}

TEST_CASE("write_retrieval_tsv emits one ranked line per entry") {
  std::string path = "retrieval_test_tmp.tsv";
  RetrievalResult r;
  r.entries = {{"img1", 0.5}, {"img2", 0.25}};
  write_retrieval_tsv(path, {{"q1", r}});
  std::ifstream in(path);
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "q1\t1\timg1\t0.5");
  REQUIRE(std::getline(in, line));
  CHECK(line == "q1\t2\timg2\t0.25");
  CHECK_FALSE(std::getline(in, line));
  in.close();
  std::remove(path.c_str());
}
