#pragma once

// Dunn's two-group statistic from first principles: midranks by counting,
// tie term from value multiplicities, normal tail from Boost.

#include <cmath>
#include <map>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace oracle {

struct DunnZ {
    double z;
    double p;
};

/// Rank by counting: rank(v) = #{< v} + (#{== v} + 1) / 2.
inline DunnZ brute_dunn(const std::vector<double>& g1, const std::vector<double>& g2, bool use_tie_term = true)
{
    std::vector<double> all(g1);
    all.insert(all.end(), g2.begin(), g2.end());
    auto rank = [&](double v) {
        double less = 0, eq = 0;
        for (double w : all) {
            less += w < v;
            eq += w == v;
        }
        return less + (eq + 1) / 2;
    };
    long double r1 = 0, r2 = 0;
    for (double v : g1) r1 += rank(v);
    for (double v : g2) r2 += rank(v);
    std::map<double, long double> counts;
    for (double v : all) counts[v] += 1;
    long double ties = 0;
    for (auto [_, t] : counts) ties += t * t * t - t;
    long double N = all.size();
    long double var = N * (N + 1) / 12 - (use_tie_term ? ties / (12 * (N - 1)) : 0);
    long double se = std::sqrt(var * (1.0L / g1.size() + 1.0L / g2.size()));
    double z = static_cast<double>((r1 / g1.size() - r2 / g2.size()) / se);
    boost::math::normal_distribution<double> nd;
    double p = 2 * boost::math::cdf(boost::math::complement(nd, std::fabs(z)));
    return {z, p};
}

} // namespace oracle
