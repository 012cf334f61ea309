#include "clozeqa/geometry.hpp"

#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

using namespace clozeqa;

namespace {

PointSet make_points(const std::vector<std::vector<double>>& vecs) {
    PointSet ps;
    ps.dimension = static_cast<int>(vecs.front().size());
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        ps.add("t" + std::to_string(i), vecs[i]);
    }
    return ps;
}

// Independent oracle: plain distance loop plus a stable full sort.
std::vector<Neighbor> knn_oracle(const PointSet& ps, std::span<const double> query, int k) {
    std::vector<Neighbor> all;
    for (std::size_t i = 0; i < ps.size(); ++i) {
        double s = 0.0;
        const auto v = ps.vec(static_cast<int>(i));
        for (std::size_t d = 0; d < v.size(); ++d) s += (v[d] - query[d]) * (v[d] - query[d]);
        all.push_back({static_cast<int>(i), std::sqrt(s)});
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const Neighbor& a, const Neighbor& b) { return a.distance < b.distance; });
    if (static_cast<int>(all.size()) > k) all.resize(static_cast<std::size_t>(k));
    return all;
}

PointSet random_points(Rng& rng, int n, int dim, bool coarse) {
    std::vector<std::vector<double>> vecs;
    for (int i = 0; i < n; ++i) {
        std::vector<double> v(static_cast<std::size_t>(dim));
        for (double& x : v) {
            x = coarse ? static_cast<double>(rng.int_in(-2, 2)) : rng.real_in(-1.0, 1.0);
        }
        vecs.push_back(std::move(v));
    }
    // Inject exact duplicates so distance ties are exercised.
    if (coarse && n > 4) {
        vecs[1] = vecs[0];
        vecs[3] = vecs[2];
    }
    PointSet ps;
    ps.dimension = dim;
    for (int i = 0; i < n; ++i) ps.add("p" + std::to_string(i), vecs[static_cast<std::size_t>(i)]);
    return ps;
}

}  // namespace

TEST_CASE("knn_query basics") {
    const auto ps = make_points({{0.0}, {1.0}, {2.0}, {5.0}});
    SECTION("nearest three from the origin include the coincident point") {
        const std::vector<double> q{0.0};
        const auto r = knn_query(ps, q, 3);
        REQUIRE(r.size() == 3);
        CHECK(r[0].title_id == 0);
        CHECK(r[0].distance == 0.0);
        CHECK(r[1].title_id == 1);
        CHECK(r[1].distance == 1.0);
        CHECK(r[2].title_id == 2);
        CHECK(r[2].distance == 2.0);
    }
    SECTION("k larger than the set returns everything") {
        const std::vector<double> q{10.0};
        const auto r = knn_query(ps, q, 99);
        CHECK(r.size() == 4);
    }
    SECTION("equidistant points break ties by lower title_id") {
        const auto two = make_points({{1.0}, {-1.0}});
        const std::vector<double> q{0.0};
        const auto r = knn_query(two, q, 2);
        CHECK(r[0].title_id == 0);
        CHECK(r[1].title_id == 1);
    }
    SECTION("empty set and bad arguments") {
        PointSet empty;
        empty.dimension = 1;
        const std::vector<double> q{0.0};
        CHECK_THROWS_AS(knn_query(empty, q, 1), std::runtime_error);
        CHECK_THROWS_AS(knn_query(ps, q, 0), std::invalid_argument);
        CHECK_THROWS_AS(knn_query(ps, std::vector<double>{0.0, 0.0}, 1), std::invalid_argument);
    }
}

TEST_CASE("knn_query matches the brute-force oracle with ties") {
    Rng rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        const bool coarse = trial % 2 == 0;
        const int n = 5 + static_cast<int>(rng.index(60));
        const int dim = coarse ? 2 : 5;
        const auto ps = random_points(rng, n, dim, coarse);
        std::vector<double> q(static_cast<std::size_t>(dim));
        for (double& x : q) x = coarse ? static_cast<double>(rng.int_in(-2, 2)) : rng.real_in(-1, 1);
        const int k = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(n + 3)));
        const auto got = knn_query(ps, q, k);
        const auto want = knn_oracle(ps, q, k);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].title_id == want[i].title_id);
            CHECK(got[i].distance == want[i].distance);
        }
    }
}

TEST_CASE("adaptive_filter keeps the strictly-farther-than-mean set") {
    SECTION("mean 8/3 keeps only the distance-5 entry") {
        const std::vector<Neighbor> n{{0, 1.0}, {1, 2.0}, {2, 5.0}};
        CHECK(adaptive_filter(n) == std::vector<int>{2});
    }
    SECTION("all equal distances keep nothing") {
        const std::vector<Neighbor> n{{0, 2.0}, {1, 2.0}, {2, 2.0}};
        CHECK(adaptive_filter(n).empty());
    }
    SECTION("two entries keep the farther one") {
        const std::vector<Neighbor> n{{0, 1.0}, {1, 3.0}};
        CHECK(adaptive_filter(n) == std::vector<int>{1});
    }
    SECTION("empty input is an error") {
        CHECK_THROWS_AS(adaptive_filter({}), std::invalid_argument);
    }
    SECTION("kept subset is farther than the overall mean on random inputs") {
        Rng rng(9);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<Neighbor> n;
            const int count = 1 + static_cast<int>(rng.index(40));
            for (int i = 0; i < count; ++i) n.push_back({i, rng.real_in(0.0, 4.0)});
            std::sort(n.begin(), n.end(), [](const Neighbor& a, const Neighbor& b) {
                return a.distance < b.distance || (a.distance == b.distance && a.title_id < b.title_id);
            });
            double mean = 0.0;
            for (const auto& e : n) mean += e.distance;
            mean /= static_cast<double>(n.size());
            const auto kept = adaptive_filter(n);
            CHECK(kept.size() <= n.size());
            if (!kept.empty()) {
                double kept_mean = 0.0;
                int last_pos = -1;
                for (int id : kept) {
                    const auto it = std::find_if(n.begin(), n.end(),
                                                 [&](const Neighbor& e) { return e.title_id == id; });
                    REQUIRE(it != n.end());
                    CHECK(it->distance > mean);
                    const int pos = static_cast<int>(it - n.begin());
                    CHECK(pos > last_pos);  // ascending order preserved
                    last_pos = pos;
                    kept_mean += it->distance;
                }
                CHECK(kept_mean / static_cast<double>(kept.size()) > mean);
            }
        }
    }
}

TEST_CASE("kmeans_fit recovers the optimal 2-partition of two 1-D blobs") {
    const auto ps = make_points({{0.0}, {0.1}, {10.0}, {10.1}});
    const auto result = kmeans_fit(ps, 2, 100, 42);
    const auto& m = result.model;

    // Exhaustive oracle over all proper 2-partitions of the four points.
    double best_obj = std::numeric_limits<double>::infinity();
    const std::vector<double> xs{0.0, 0.1, 10.0, 10.1};
    for (int mask = 1; mask < 15; ++mask) {
        double sum[2] = {0, 0};
        int count[2] = {0, 0};
        for (int i = 0; i < 4; ++i) {
            const int side = (mask >> i) & 1;
            sum[side] += xs[static_cast<std::size_t>(i)];
            ++count[side];
        }
        if (count[0] == 0 || count[1] == 0) continue;
        double obj = 0.0;
        for (int i = 0; i < 4; ++i) {
            const int side = (mask >> i) & 1;
            const double c = sum[side] / count[side];
            obj += (xs[static_cast<std::size_t>(i)] - c) * (xs[static_cast<std::size_t>(i)] - c);
        }
        best_obj = std::min(best_obj, obj);
    }
    CHECK(result.objective_trace.back() == Catch::Approx(best_obj).margin(1e-12));
    CHECK(m.assignment[0] == m.assignment[1]);
    CHECK(m.assignment[2] == m.assignment[3]);
    CHECK(m.assignment[0] != m.assignment[2]);
    const double c_low = m.centroids[static_cast<std::size_t>(m.assignment[0])];
    const double c_high = m.centroids[static_cast<std::size_t>(m.assignment[2])];
    CHECK(c_low == Catch::Approx(0.05).margin(1e-12));
    CHECK(c_high == Catch::Approx(10.05).margin(1e-12));
}

TEST_CASE("kmeans_fit edge cases") {
    const auto ps = make_points({{1.0, 0.0}, {3.0, 0.0}, {0.0, 2.0}});
    SECTION("k=1 yields the mean of all points") {
        const auto result = kmeans_fit(ps, 1, 50, 7);
        CHECK(result.model.centroids[0] == Catch::Approx(4.0 / 3.0));
        CHECK(result.model.centroids[1] == Catch::Approx(2.0 / 3.0));
    }
    SECTION("k=n puts every point in its own cluster with objective zero") {
        const auto result = kmeans_fit(ps, 3, 50, 7);
        CHECK(result.objective_trace.back() == 0.0);
        std::vector<int> sorted = result.model.assignment;
        std::sort(sorted.begin(), sorted.end());
        CHECK(sorted == std::vector<int>{0, 1, 2});
    }
    SECTION("k out of range") {
        CHECK_THROWS_AS(kmeans_fit(ps, 0, 50, 7), std::invalid_argument);
        CHECK_THROWS_AS(kmeans_fit(ps, 4, 50, 7), std::invalid_argument);
    }
}

TEST_CASE("kmeans objective is non-increasing and assignments are consistent") {
    Rng rng(31);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 8 + static_cast<int>(rng.index(40));
        const int dim = 3;
        const auto ps = random_points(rng, n, dim, trial % 3 == 0);
        const int k = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(std::min(n, 8))));
        const auto result = kmeans_fit(ps, k, 60, rng.next_u64());
        for (std::size_t i = 1; i < result.objective_trace.size(); ++i) {
            CHECK(result.objective_trace[i] <=
                  result.objective_trace[i - 1] * (1.0 + 1e-9) + 1e-12);
        }
        for (std::size_t i = 0; i < ps.size(); ++i) {
            CHECK(kmeans_assign(result.model, ps.vec(static_cast<int>(i))) ==
                  result.model.assignment[i]);
        }
    }
}

TEST_CASE("kmeans_assign matches brute force and breaks ties low") {
    ClusterModel m;
    m.k = 3;
    m.dimension = 2;
    m.centroids = {0.0, 0.0, 1.0, 0.0, 0.0, 1.0};
    SECTION("exact centroid hit") {
        CHECK(kmeans_assign(m, std::vector<double>{0.0, 1.0}) == 2);
    }
    SECTION("equidistant goes to the lower id") {
        CHECK(kmeans_assign(m, std::vector<double>{0.5, 0.0}) == 0);
    }
    SECTION("brute force agreement on random vectors") {
        Rng rng(77);
        for (int trial = 0; trial < 1000; ++trial) {
            const std::vector<double> v{rng.real_in(-2, 2), rng.real_in(-2, 2)};
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < m.k; ++c) {
                const auto cen = m.centroid(c);
                const double d = std::sqrt((v[0] - cen[0]) * (v[0] - cen[0]) +
                                           (v[1] - cen[1]) * (v[1] - cen[1]));
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            CHECK(kmeans_assign(m, v) == best);
        }
    }
}

TEST_CASE("cluster model file round trip preserves assignments exactly") {
    Rng rng(15);
    const auto ps = random_points(rng, 25, 4, false);
    const auto result = kmeans_fit(ps, 5, 60, 3);
    std::ostringstream out;
    save_cluster_model(out, result.model);
    std::istringstream in(out.str());
    const auto back = load_cluster_model(in);
    CHECK(back.k == result.model.k);
    CHECK(back.dimension == result.model.dimension);
    CHECK(back.assignment == result.model.assignment);
    REQUIRE(back.centroids.size() == result.model.centroids.size());
    for (std::size_t i = 0; i < back.centroids.size(); ++i) {
        CHECK(back.centroids[i] == result.model.centroids[i]);  // bit-exact
    }
    SECTION("malformed files are rejected") {
        std::istringstream bad("0 2\n");
        CHECK_THROWS_AS(load_cluster_model(bad), std::runtime_error);
        std::istringstream trunc("2 2\n1 2\n");
        CHECK_THROWS_AS(load_cluster_model(trunc), std::runtime_error);
    }
}

TEST_CASE("build_point_set deduplicates and tracks multiplicity") {
    const auto table = test_util::make_table({{"a", {1.0, 0.0}}, {"b", {0.0, 1.0}}});
    const auto ps = build_point_set({"a", "b", "a", "a b", "b"}, table);
    REQUIRE(ps.size() == 3);
    CHECK(ps.titles == std::vector<std::string>{"a", "b", "a b"});
    CHECK(ps.multiplicity == std::vector<std::int64_t>{2, 2, 1});
    CHECK(ps.find("a b") == 2);
    CHECK(ps.find("zzz") == -1);
    const auto without = ps.without("b");
    CHECK(without.size() == 2);
    CHECK(without.titles == std::vector<std::string>{"a", "a b"});
    CHECK(without.find("b") == -1);
}
