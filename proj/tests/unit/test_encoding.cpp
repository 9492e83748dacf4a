#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>
#include <string>
#include <vector>

#include "msgaf/encoding.hpp"
#include "msgaf/simkit.hpp"
#include "support.hpp"

using namespace msgaf;

namespace {

SystemState random_state(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SystemState s{Matrix(n, MetricSchema::kCount), Matrix(n, 1), Matrix(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < MetricSchema::kCount; ++c) s.metrics(i, c) = u(rng) * (c < 2 ? 1.0 : 100.0);
    s.quota(i, 0) = 0.1 + u(rng);
    s.workload(i, 0) = i == 0 ? 600.0 * u(rng) : 0.0;
  }
  return s;
}

}  // namespace

TEST_CASE("feature matrix concatenates S, C and W") {
  SystemState s{Matrix(1, 7, 0.0), Matrix(1, 1, 2.0), Matrix(1, 1, 60.0)};
  CHECK(build_feature_matrix(s) == Matrix::from_rows({{0, 0, 0, 0, 0, 0, 0, 2, 60}}));
}

TEST_CASE("feature rows depend only on their own service") {
  std::mt19937_64 rng(2);
  SystemState s = random_state(2, rng);
  const Matrix x = build_feature_matrix(s);
  s.metrics(1, 3) += 5.0;
  s.quota(1, 0) += 1.0;
  const Matrix y = build_feature_matrix(s);
  for (std::size_t c = 0; c < kFeatureCount; ++c) CHECK(x(0, c) == y(0, c));
  CHECK(y(1, 3) == x(1, 3) + 5.0);
  CHECK(y(1, kQuotaColumn) == x(1, kQuotaColumn) + 1.0);
}

TEST_CASE("boutique-sized state gives an 11 x 9 feature matrix, bitwise reproducible") {
  std::mt19937_64 rng(3);
  const SystemState s = random_state(11, rng);
  const Matrix x = build_feature_matrix(s);
  CHECK(x.rows() == 11);
  CHECK(x.cols() == 9);
  CHECK(build_feature_matrix(s) == x);
  for (std::size_t i = 0; i < 11; ++i) {
    for (std::size_t c = 0; c < 7; ++c) CHECK(x(i, c) == s.metrics(i, c));
    CHECK(x(i, 7) == s.quota(i, 0));
    CHECK(x(i, 8) == s.workload(i, 0));
  }
}

TEST_CASE("row-count mismatches name the tensor") {
  SystemState s{Matrix(3, 7, 0.0), Matrix(2, 1, 1.0), Matrix(3, 1, 0.0)};
  try {
    (void)build_feature_matrix(s);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("C ") == 0);
  }
  s.quota = Matrix(3, 1, 1.0);
  s.workload = Matrix(4, 1, 0.0);
  try {
    (void)build_feature_matrix(s);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("W ") == 0);
  }
}

TEST_CASE("state validation rejects negative values and utilizations above one") {
  std::mt19937_64 rng(4);
  SystemState s = random_state(3, rng);
  CHECK_NOTHROW(validate_state(s));
  SystemState bad = s;
  bad.metrics(1, MetricSchema::kCpuUtil) = 1.5;
  CHECK_THROWS_AS(validate_state(bad), SchemaError);
  bad = s;
  bad.quota(2, 0) = -1.0;
  CHECK_THROWS_AS(validate_state(bad), SchemaError);
}

TEST_CASE("metric schema check is order and version sensitive") {
  std::vector<std::string> cols(MetricSchema::kColumns.begin(), MetricSchema::kColumns.end());
  CHECK_NOTHROW(MetricSchema::check(MetricSchema::kVersion, cols));
  CHECK_THROWS_AS(MetricSchema::check("msgaf-metrics/0", cols), SchemaError);
  std::swap(cols[0], cols[1]);
  CHECK_THROWS_AS(MetricSchema::check(MetricSchema::kVersion, cols), SchemaError);
  cols.pop_back();
  CHECK_THROWS_AS(MetricSchema::check(MetricSchema::kVersion, cols), SchemaError);
}

TEST_CASE("normalizer examples") {
  SUBCASE("identical inputs floor the std and normalize to zero") {
    const std::vector<Matrix> xs = {Matrix(2, 3, 4.0), Matrix(2, 3, 4.0)};
    const Normalizer n = fit_normalizer(xs);
    for (double v : n.stddev().data()) CHECK(v == Normalizer::kStdFloor);
    CHECK(n.apply(xs[0]) == Matrix(2, 3, 0.0));
  }
  SUBCASE("two samples {0, 2} give mean 1 and std 1") {
    const std::vector<Matrix> xs = {Matrix(1, 9, 0.0), Matrix(1, 9, 2.0)};
    const Normalizer n = fit_normalizer(xs);
    CHECK(n.mean() == Matrix(1, 9, 1.0));
    CHECK(n.stddev() == Matrix(1, 9, 1.0));
  }
  SUBCASE("apply and invert round-trip") {
    std::mt19937_64 rng(5);
    std::vector<Matrix> xs;
    for (int i = 0; i < 6; ++i) xs.push_back(msgaf::testing::random_matrix(4, 9, rng, -50.0, 500.0));
    const Normalizer n = fit_normalizer(xs);
    const Matrix z = msgaf::testing::random_matrix(4, 9, rng, -3.0, 3.0);
    CHECK(max_abs_diff(n.apply(n.invert(z)), z) < 1e-10);
    CHECK(max_abs_diff(n.invert(n.apply(xs[2])), xs[2]) < 1e-10);
  }
  SUBCASE("fewer than two samples is rejected") {
    CHECK_THROWS_AS(fit_normalizer(std::vector<Matrix>{}), std::invalid_argument);
    CHECK_THROWS_AS(fit_normalizer(std::vector<Matrix>{Matrix(3, 9, 1.0)}), std::invalid_argument);
  }
}

TEST_CASE("graph validation examples") {
  ServiceGraph chain{"chain", {"a", "b"}, Matrix::from_rows({{0, 1}, {0, 0}})};
  const GraphReport r = validate_graph(chain);
  CHECK(r.weakly_connected);
  CHECK(r.edge_count == 1);
  CHECK(r.isolated.empty());

  ServiceGraph loop = chain;
  loop.adjacency(0, 0) = 1.0;
  CHECK_THROWS_AS(validate_graph(loop), SchemaError);

  ServiceGraph weighted = chain;
  weighted.adjacency(0, 1) = 0.5;
  try {
    (void)validate_graph(weighted);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("(0, 1)") != std::string::npos);
  }

  ServiceGraph split{"split", {"a", "b", "c"}, Matrix::from_rows({{0, 1, 0}, {0, 0, 0}, {0, 0, 0}})};
  const GraphReport s = validate_graph(split);
  CHECK_FALSE(s.weakly_connected);
  CHECK(s.isolated == std::vector<std::size_t>{2});
}

TEST_CASE("sock shop topology validates") {
  const auto topo = simkit::generate_topology("sockshop13", 1);
  const GraphReport r = validate_graph(topo.graph);
  CHECK(topo.size() == 13);
  CHECK(r.weakly_connected);
  CHECK(r.isolated.empty());
}

TEST_CASE("from_edges and edges round-trip") {
  const std::vector<std::pair<std::size_t, std::size_t>> e = {{0, 1}, {0, 2}, {2, 1}};
  const ServiceGraph g = ServiceGraph::from_edges("g", {"x", "y", "z"}, e);
  CHECK(g.edges() == e);
  CHECK_THROWS_AS(ServiceGraph::from_edges("g", {"x"}, e), SchemaError);
}
