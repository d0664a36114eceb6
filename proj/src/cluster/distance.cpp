#include <fixctx/cluster/cluster.hpp>

#include <algorithm>
#include <cmath>
#include <thread>

namespace fixctx::cluster {

SparseEuclidean::SparseEuclidean(const features::FeatureMatrix& m) : rows_(m.cells) {}

SparseEuclidean::SparseEuclidean(std::vector<std::vector<std::pair<std::size_t, double>>> rows) : rows_(std::move(rows))
{
    for (auto& r : rows_) std::sort(r.begin(), r.end());
}

double SparseEuclidean::operator()(std::size_t i, std::size_t j) const
{
    if (i > j) std::swap(i, j);
    const auto& a = rows_.at(i);
    const auto& b = rows_.at(j);
    double s = 0;
    std::size_t p = 0, q = 0;
    while (p < a.size() || q < b.size()) {
        double x = 0, y = 0;
        if (q == b.size() || (p < a.size() && a[p].first < b[q].first)) x = a[p++].second;
        else if (p == a.size() || b[q].first < a[p].first) y = b[q++].second;
        else {
            x = a[p++].second;
            y = b[q++].second;
        }
        s += (x - y) * (x - y);
    }
    return std::sqrt(s);
}

CondensedDistances::CondensedDistances(std::size_t n, std::vector<double> values) : n_(n), values_(std::move(values))
{
    if (values_.size() != n * (n > 0 ? n - 1 : 0) / 2) throw Error("condensed distance vector has wrong length");
}

std::size_t CondensedDistances::index(std::size_t n, std::size_t i, std::size_t j)
{
    if (i > j) std::swap(i, j);
    return i * n - i * (i + 1) / 2 + (j - i - 1);
}

double CondensedDistances::operator()(std::size_t i, std::size_t j) const
{
    if (i == j) return 0.0;
    return values_[index(n_, i, j)];
}

namespace {

CondensedDistances fill(const Distances& d, unsigned threads)
{
    const std::size_t n = d.size();
    std::vector<double> v(n * (n > 0 ? n - 1 : 0) / 2);
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    auto work = [&](unsigned t) {
        // Interleaved rows balance the triangular workload.
        for (std::size_t i = t; i < n; i += threads) {
            std::size_t base = CondensedDistances::index(n, i, i + 1);
            for (std::size_t j = i + 1; j < n; ++j) v[base + (j - i - 1)] = d(i, j);
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
        for (auto& th : pool) th.join();
    }
    return CondensedDistances(n, std::move(v));
}

} // namespace

CondensedDistances pairwise_distances(const features::FeatureMatrix& m, unsigned threads)
{
    return fill(SparseEuclidean(m), threads);
}

CondensedDistances materialize(const Distances& d)
{
    return fill(d, 1);
}

} // namespace fixctx::cluster
