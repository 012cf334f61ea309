#pragma once

#include "clozeqa/embeddings.hpp"
#include "clozeqa/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace clozeqa {

// Deduplicated titles with their pooled embeddings. title_id is the dense
// first-appearance index; multiplicity counts source occurrences.
struct PointSet {
    int dimension = 0;
    std::vector<std::string> titles;
    std::vector<std::int64_t> multiplicity;
    std::vector<double> vectors;  // row-major |titles| x dimension
    std::unordered_map<std::string, int> index;

    std::size_t size() const { return titles.size(); }

    std::span<const double> vec(int title_id) const {
        return {vectors.data() + static_cast<std::size_t>(title_id) * dimension,
                static_cast<std::size_t>(dimension)};
    }

    int find(const std::string& title) const {
        auto it = index.find(title);
        return it == index.end() ? -1 : it->second;
    }

    void add(const std::string& title, std::span<const double> v) {
        if (dimension == 0) dimension = static_cast<int>(v.size());
        if (static_cast<int>(v.size()) != dimension) {
            throw std::invalid_argument("PointSet: dimension mismatch for '" + title + "'");
        }
        auto [it, inserted] = index.emplace(title, static_cast<int>(titles.size()));
        if (!inserted) {
            ++multiplicity[it->second];
            return;
        }
        titles.push_back(title);
        multiplicity.push_back(1);
        vectors.insert(vectors.end(), v.begin(), v.end());
    }

    // Copy with one title removed; title_ids are renumbered.
    PointSet without(const std::string& title) const {
        PointSet out;
        out.dimension = dimension;
        for (std::size_t i = 0; i < titles.size(); ++i) {
            if (titles[i] == title) continue;
            out.index.emplace(titles[i], static_cast<int>(out.titles.size()));
            out.titles.push_back(titles[i]);
            out.multiplicity.push_back(multiplicity[i]);
            const auto v = vec(static_cast<int>(i));
            out.vectors.insert(out.vectors.end(), v.begin(), v.end());
        }
        return out;
    }
};

// Titles are expected pre-normalized; duplicates fold into multiplicity.
inline PointSet build_point_set(const std::vector<std::string>& titles, const EmbeddingTable& table) {
    PointSet ps;
    ps.dimension = table.dimension;
    for (const auto& t : titles) {
        if (ps.index.contains(t)) {
            ++ps.multiplicity[ps.index.at(t)];
            continue;
        }
        ps.add(t, encode_text(table, t).vec);
    }
    return ps;
}

struct Neighbor {
    int title_id;
    double distance;
};

// Exact exhaustive scan: min(k, |points|) nearest, ascending distance, ties
// broken by lower title_id.
inline std::vector<Neighbor> knn_query(const PointSet& points, std::span<const double> query, int k) {
    if (points.size() == 0) throw std::runtime_error("knn_query: empty point set");
    if (k < 1) throw std::invalid_argument("knn_query: k must be >= 1");
    if (static_cast<int>(query.size()) != points.dimension) {
        throw std::invalid_argument("knn_query: query dimension mismatch");
    }
    std::vector<Neighbor> all;
    all.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        all.push_back({static_cast<int>(i), distance(query, points.vec(static_cast<int>(i)))});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.title_id < b.title_id;
    });
    if (all.size() > static_cast<std::size_t>(k)) all.resize(static_cast<std::size_t>(k));
    return all;
}

// Keeps the neighbors strictly farther than the mean listed distance (the
// far side of the adaptive neighborhood); input order is preserved.
inline std::vector<int> adaptive_filter(const std::vector<Neighbor>& neighbors) {
    if (neighbors.empty()) throw std::invalid_argument("adaptive_filter: empty neighbor list");
    double mean = 0.0;
    for (const auto& n : neighbors) mean += n.distance;
    mean /= static_cast<double>(neighbors.size());
    std::vector<int> kept;
    for (const auto& n : neighbors) {
        if (n.distance > mean) kept.push_back(n.title_id);
    }
    return kept;
}

struct ClusterModel {
    int k = 0;
    int dimension = 0;
    std::vector<double> centroids;  // k x dimension
    std::vector<int> assignment;    // title_id -> cluster id

    std::span<const double> centroid(int c) const {
        return {centroids.data() + static_cast<std::size_t>(c) * dimension,
                static_cast<std::size_t>(dimension)};
    }
};

inline int kmeans_assign(const ClusterModel& model, std::span<const double> v) {
    if (static_cast<int>(v.size()) != model.dimension) {
        throw std::invalid_argument("kmeans_assign: dimension mismatch");
    }
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < model.k; ++c) {
        const auto cen = model.centroid(c);
        double d = 0.0;
        for (int j = 0; j < model.dimension; ++j) {
            const double diff = v[j] - cen[j];
            d += diff * diff;
        }
        if (d < best_d) {  // ties keep the lowest cluster id
            best_d = d;
            best = c;
        }
    }
    return best;
}

struct KMeansResult {
    ClusterModel model;
    std::vector<double> objective_trace;  // after every assignment pass
    int iterations = 0;
};

namespace detail {

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace detail

// Lloyd iterations from deterministic farthest-point initialization: the
// first centroid is a seeded random point, each next the point with maximal
// distance to its nearest chosen centroid (ties -> lowest title_id). Empty
// clusters are reseeded to the point farthest from its assigned centroid.
// Always ends on an assignment pass, so the returned assignment is nearest-
// centroid consistent.
inline KMeansResult kmeans_fit(const PointSet& points, int k, int max_iters, std::uint64_t seed) {
    const int n = static_cast<int>(points.size());
    if (k < 1 || k > n) throw std::invalid_argument("kmeans_fit: k out of range");
    const int dim = points.dimension;

    Rng rng = Rng::derive(seed, "kmeans");
    std::vector<int> chosen;
    chosen.push_back(static_cast<int>(rng.index(points.size())));
    std::vector<double> nearest_sq(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) nearest_sq[i] = detail::sq_dist(points.vec(i), points.vec(chosen[0]));
    while (static_cast<int>(chosen.size()) < k) {
        int far = 0;
        for (int i = 1; i < n; ++i) {
            if (nearest_sq[i] > nearest_sq[far]) far = i;
        }
        chosen.push_back(far);
        for (int i = 0; i < n; ++i) {
            nearest_sq[i] = std::min(nearest_sq[i], detail::sq_dist(points.vec(i), points.vec(far)));
        }
    }

    ClusterModel model;
    model.k = k;
    model.dimension = dim;
    model.centroids.resize(static_cast<std::size_t>(k) * dim);
    for (int c = 0; c < k; ++c) {
        const auto v = points.vec(chosen[c]);
        std::copy(v.begin(), v.end(), model.centroids.begin() + static_cast<std::size_t>(c) * dim);
    }

    auto assign_all = [&](std::vector<int>& out) {
        out.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) out[i] = kmeans_assign(model, points.vec(i));
    };
    auto objective = [&](const std::vector<int>& assignment) {
        double obj = 0.0;
        for (int i = 0; i < n; ++i) obj += detail::sq_dist(points.vec(i), model.centroid(assignment[i]));
        return obj;
    };

    KMeansResult result;
    std::vector<int> assignment;
    assign_all(assignment);
    result.objective_trace.push_back(objective(assignment));

    std::vector<double> sums(static_cast<std::size_t>(k) * dim);
    std::vector<std::int64_t> counts(static_cast<std::size_t>(k));
    std::vector<int> next(static_cast<std::size_t>(n));

    for (int iter = 1; iter <= max_iters; ++iter) {
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), std::int64_t{0});
        for (int i = 0; i < n; ++i) {
            const auto v = points.vec(i);
            double* row = sums.data() + static_cast<std::size_t>(assignment[i]) * dim;
            for (int d = 0; d < dim; ++d) row[d] += v[d];
            ++counts[assignment[i]];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            double* cen = model.centroids.data() + static_cast<std::size_t>(c) * dim;
            const double* row = sums.data() + static_cast<std::size_t>(c) * dim;
            for (int d = 0; d < dim; ++d) cen[d] = row[d] / static_cast<double>(counts[c]);
        }
        // Reseed empty clusters to the point farthest from its own centroid.
        std::vector<bool> used(static_cast<std::size_t>(n), false);
        for (int c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            int far = -1;
            double far_d = -1.0;
            for (int i = 0; i < n; ++i) {
                if (used[i]) continue;
                const double d = detail::sq_dist(points.vec(i), model.centroid(assignment[i]));
                if (d > far_d) {
                    far_d = d;
                    far = i;
                }
            }
            if (far < 0) break;
            used[far] = true;
            const auto v = points.vec(far);
            std::copy(v.begin(), v.end(), model.centroids.begin() + static_cast<std::size_t>(c) * dim);
        }

        assign_all(next);
        result.objective_trace.push_back(objective(next));
        result.iterations = iter;
        const bool stable = next == assignment;
        assignment.swap(next);
        if (stable) break;
    }

    model.assignment = std::move(assignment);
    result.model = std::move(model);
    return result;
}

// ---------------------------------------------------------------------------
// Cluster model file: "k dim", k centroid rows, "assignments n", n pairs.
// ---------------------------------------------------------------------------

inline void save_cluster_model(std::ostream& out, const ClusterModel& model) {
    out << model.k << ' ' << model.dimension << '\n';
    char buf[40];
    for (int c = 0; c < model.k; ++c) {
        const auto cen = model.centroid(c);
        for (std::size_t j = 0; j < cen.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", cen[j]);
            out << (j ? " " : "") << buf;
        }
        out << '\n';
    }
    out << "assignments " << model.assignment.size() << '\n';
    for (std::size_t i = 0; i < model.assignment.size(); ++i) {
        out << i << ' ' << model.assignment[i] << '\n';
    }
}

inline void save_cluster_model(const std::string& path, const ClusterModel& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write cluster model file: " + path);
    save_cluster_model(out, model);
}

inline ClusterModel load_cluster_model(std::istream& in) {
    ClusterModel model;
    if (!(in >> model.k >> model.dimension) || model.k < 1 || model.dimension < 1) {
        throw std::runtime_error("cluster model file: malformed header");
    }
    model.centroids.resize(static_cast<std::size_t>(model.k) * model.dimension);
    for (double& x : model.centroids) {
        if (!(in >> x)) throw std::runtime_error("cluster model file: truncated centroids");
    }
    std::string tag;
    std::size_t n = 0;
    if (!(in >> tag >> n) || tag != "assignments") {
        throw std::runtime_error("cluster model file: missing assignments section");
    }
    model.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t id;
        int cluster;
        if (!(in >> id >> cluster) || id != i || cluster < 0 || cluster >= model.k) {
            throw std::runtime_error("cluster model file: malformed assignment pair " + std::to_string(i));
        }
        model.assignment[i] = cluster;
    }
    return model;
}

inline ClusterModel load_cluster_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cluster model file: " + path);
    return load_cluster_model(in);
}

}  // namespace clozeqa
