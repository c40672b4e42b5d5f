#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "scripta/error.hpp"
#include "scripta/knn.hpp"

using namespace scripta;

namespace {

struct Points {
  std::vector<float> flat;
  std::vector<std::vector<double>> rows;
  std::vector<std::uint32_t> labels;
};

Points random_points(std::size_t n, std::size_t dim, std::size_t classes, std::mt19937_64& rng) {
  std::normal_distribution<float> g(0.0f, 1.0f);
  Points p;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> r;
    for (std::size_t j = 0; j < dim; ++j) {
      const float v = g(rng);
      p.flat.push_back(v);
      r.push_back(v);
    }
    p.rows.push_back(r);
    p.labels.push_back(static_cast<std::uint32_t>(rng() % classes));
  }
  return p;
}

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("k" + std::to_string(i));
  return out;
}

}  // namespace

TEST(KnnIndex, Build) {
  std::mt19937_64 rng(50);
  auto p = random_points(10, 3, 2, rng);
  const KnnIndex idx(p.flat, 3, p.labels, names(2));
  EXPECT_EQ(idx.size(), 10u);
  EXPECT_EQ(idx.dim(), 3u);
  EXPECT_EQ(idx.metric(), Metric::euclidean);
}

TEST(KnnIndex, BuildErrors) {
  EXPECT_THROW(KnnIndex({}, 3, {}, names(2)), ArgumentError);
  EXPECT_THROW(KnnIndex({1, 2, 3, 4}, 3, {0}, names(2)), ArgumentError);
  EXPECT_THROW(KnnIndex({1, 2, 3}, 3, {2}, names(2)), ArgumentError);
}

TEST(KnnIndex, QueryDimAndK) {
  const KnnIndex idx({0, 0, 1, 1}, 2, {0, 1}, names(2));
  const std::vector<float> q{0.1f, 0.2f, 0.3f};
  EXPECT_THROW(idx.classify(q, 1), ArgumentError);
  const std::vector<float> ok{0.1f, 0.2f};
  EXPECT_THROW(idx.classify(ok, 0), ArgumentError);
  EXPECT_THROW(idx.classify(ok, 3), ArgumentError);
}

TEST(Classify, ExactMatch) {
  std::mt19937_64 rng(51);
  auto p = random_points(20, 4, 3, rng);
  const KnnIndex idx(p.flat, 4, p.labels, names(3));
  for (std::size_t i = 0; i < 20; ++i) {
    const auto r = idx.classify(idx.vector(i), 1);
    EXPECT_EQ(r.label, p.labels[i]);
    EXPECT_EQ(r.neighbor_ids[0], i);
    EXPECT_EQ(r.distances[0], 0.0);
  }
}

TEST(Classify, MidpointTieGoesToEarlierPoint) {
  const KnnIndex idx({0, 0, 2, 0}, 2, {1, 0}, names(2));
  const std::vector<float> q{1, 0};
  EXPECT_EQ(idx.classify(q, 1).label, 1u);
  const KnnIndex swapped({2, 0, 0, 0}, 2, {0, 1}, names(2));
  EXPECT_EQ(swapped.classify(q, 1).label, 0u);
}

TEST(Classify, VoteTieGoesToNearestClass) {
  // k = 2 with one vote each: the nearer neighbour decides.
  const KnnIndex idx({0, 0, 3, 0}, 2, {0, 1}, names(2));
  const std::vector<float> q{2, 0};
  EXPECT_EQ(idx.classify(q, 2).label, 1u);
}

TEST(Classify, ThreeClassToySet) {
  const std::vector<float> pts{0, 0, 0, 1, 1, 0, 5, 5, 5, 6, 6, 5, 10, 0, 10, 1};
  const std::vector<std::uint32_t> labels{0, 0, 0, 1, 1, 1, 2, 2};
  const KnnIndex idx(pts, 2, labels, names(3));
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < 8; ++i) rows.push_back({pts[2 * i], pts[2 * i + 1]});
  for (const auto& q : std::vector<std::vector<float>>{{0.5f, 0.5f}, {5.2f, 5.4f}, {9, 0.5f}, {7, 3}, {3, 2}}) {
    const std::vector<double> qd(q.begin(), q.end());
    EXPECT_EQ(idx.classify(q, 3).label, scripta::testing::knn_oracle(rows, labels, qd, 3, 3));
  }
}

TEST(Classify, BruteForceOracle) {
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = random_points(60, 5, 4, rng);
    const KnnIndex idx(p.flat, 5, p.labels, names(4));
    auto q = random_points(20, 5, 1, rng);
    for (std::size_t i = 0; i < 20; ++i) {
      for (std::size_t k : {1u, 3u, 4u, 7u}) {
        const std::span<const float> query(q.flat.data() + 5 * i, 5);
        ASSERT_EQ(idx.classify(query, k).label, scripta::testing::knn_oracle(p.rows, p.labels, q.rows[i], k, 4));
      }
    }
  }
}

TEST(Classify, NeighboursSortedByDistance) {
  std::mt19937_64 rng(53);
  auto p = random_points(40, 3, 2, rng);
  const KnnIndex idx(p.flat, 3, p.labels, names(2));
  const std::vector<float> q{0.1f, -0.2f, 0.3f};
  const auto r = idx.classify(q, 10);
  ASSERT_EQ(r.distances.size(), 10u);
  EXPECT_TRUE(std::is_sorted(r.distances.begin(), r.distances.end()));
  for (std::size_t j = 0; j < 10; ++j) EXPECT_NEAR(r.distances[j], idx.distance(q, idx.vector(r.neighbor_ids[j])), 1e-12);
}

TEST(Classify, PermutationInvariance) {
  std::mt19937_64 rng(54);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_points(30, 4, 3, rng);
    std::vector<std::size_t> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<float> flat;
    std::vector<std::uint32_t> labels;
    for (auto i : perm) {
      flat.insert(flat.end(), p.flat.begin() + 4 * i, p.flat.begin() + 4 * i + 4);
      labels.push_back(p.labels[i]);
    }
    const KnnIndex a(p.flat, 4, p.labels, names(3));
    const KnnIndex b(flat, 4, labels, names(3));
    auto q = random_points(15, 4, 1, rng);
    for (std::size_t i = 0; i < 15; ++i) {
      const std::span<const float> query(q.flat.data() + 4 * i, 4);
      for (std::size_t k : {1u, 3u, 5u}) EXPECT_EQ(a.classify(query, k).label, b.classify(query, k).label);
    }
  }
}

TEST(Classify, OrthogonalInvariance) {
  std::mt19937_64 rng(55);
  const std::size_t dim = 6;
  Eigen::MatrixXd r = Eigen::MatrixXd::NullaryExpr(dim, dim, [&] { return std::normal_distribution<double>(0, 1)(rng); });
  const Eigen::MatrixXd qmat = Eigen::HouseholderQR<Eigen::MatrixXd>(r).householderQ();
  auto transform = [&](const std::vector<float>& flat) {
    std::vector<float> out(flat.size());
    for (std::size_t i = 0; i < flat.size() / dim; ++i) {
      Eigen::VectorXd v(dim);
      for (std::size_t j = 0; j < dim; ++j) v(j) = flat[i * dim + j];
      const Eigen::VectorXd w = qmat * v;
      for (std::size_t j = 0; j < dim; ++j) out[i * dim + j] = static_cast<float>(w(j));
    }
    return out;
  };
  auto p = random_points(50, dim, 3, rng);
  auto q = random_points(30, dim, 1, rng);
  const KnnIndex a(p.flat, dim, p.labels, names(3));
  const KnnIndex b(transform(p.flat), dim, p.labels, names(3));
  const auto qt = transform(q.flat);
  for (std::size_t k : {1u, 3u}) EXPECT_EQ(a.classify_all(q.flat, k), b.classify_all(qt, k));
}

TEST(Cosine, Distances) {
  const KnnIndex idx({1, 0, 0, 2, 0, 0}, 2, {0, 1, 0}, names(2), Metric::cosine);
  const std::vector<float> q{3, 0.1f};
  const auto r = idx.classify(q, 1);
  EXPECT_EQ(r.label, 0u);
  EXPECT_EQ(idx.distance(std::vector<float>{0, 0}, std::vector<float>{1, 1}), 1.0);
  EXPECT_NEAR(idx.distance(std::vector<float>{1, 0}, std::vector<float>{0, 5}), 1.0, 1e-15);
  EXPECT_NEAR(idx.distance(std::vector<float>{1, 1}, std::vector<float>{2, 2}), 0.0, 1e-15);
  const std::vector<float> zero{0, 0};
  EXPECT_EQ(idx.classify(zero, 1).distances[0], 1.0);
}

TEST(ClassifyAll, ParallelMatchesSerial) {
  std::mt19937_64 rng(56);
  auto p = random_points(100, 8, 5, rng);
  auto q = random_points(64, 8, 1, rng);
  const KnnIndex idx(p.flat, 8, p.labels, names(5));
  EXPECT_EQ(idx.classify_all(q.flat, 3, 1), idx.classify_all(q.flat, 3, 4));
}

TEST(Metric, Parse) {
  EXPECT_EQ(parse_metric("cosine"), Metric::cosine);
  EXPECT_EQ(to_string(Metric::euclidean), "euclidean");
  EXPECT_THROW(parse_metric("manhattan"), ParseError);
}
