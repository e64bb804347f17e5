#include "iclab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "iclab/predictors.hpp"

namespace iclab {

BoundCurveTable bound_curves(int L, double eps, double B, int C, const SimplexVector& y_star,
                              const std::vector<int>& k_range,
                              const std::vector<double>& n_range) {
    if (y_star.size() != C) throw std::invalid_argument("bound_curves: y_star size mismatch");
    BoundCurveTable t;
    for (int k : k_range) {
        const auto [lo, hi] = ic_ce_bounds(L, k, B, eps, C);
        t.rows.push_back({static_cast<double>(k), "ic_ce_lower", lo});
        t.rows.push_back({static_cast<double>(k), "ic_ce_upper", hi});
    }
    const double h = entropy(y_star);
    for (double n : n_range)
        t.rows.push_back({n, "iw_excess_leading", h + kt_excess_bound(n, C)});
    std::sort(t.rows.begin(), t.rows.end(), [](const auto& a, const auto& b) {
        return a.curve != b.curve ? a.curve < b.curve : a.x < b.x;
    });
    for (const auto& r : t.rows)
        if (!std::isfinite(r.y) || r.y < 0.0)
            throw std::logic_error("bound_curves: non-finite or negative bound value");
    t.params = nlohmann::json{{"L", L},
                              {"epsilon", eps},
                              {"B", B},
                              {"C", C},
                              {"y_star", y_star.probs()},
                              {"entropy_asymptote", h}};
    return t;
}

double icl_floor_binary(int L, double eps) {
    if (L < 1) throw std::invalid_argument("icl_floor_binary: L must be >= 1");
    if (!(eps > 0.0 && eps < 0.5))
        throw std::invalid_argument("icl_floor_binary: epsilon outside (0, 1/2)");
    return (1.0 - 2.0 * eps) / (1.0 + (L - 1) * std::exp(2.0)) + eps;
}

double entropy_threshold(double floor_value) {
    const double ln2 = std::log(2.0);
    if (!(floor_value > 0.0 && floor_value < ln2))
        throw std::invalid_argument("entropy_threshold: floor outside (0, log 2)");
    auto h = [](double p) { return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p); };
    double lo = 1e-15, hi = 0.5 - 1e-15;
    // h is increasing on (0, 1/2); bisect to 1e-12.
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) < floor_value ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

NoiseTradeoff noise_tradeoff(double p) {
    if (!(p >= 0.0 && p <= 0.5)) throw std::invalid_argument("noise_tradeoff: p outside [0, 1/2]");
    NoiseTradeoff t;
    t.iwl_err = p;
    t.icl_independent = 2.0 * (p - p * p);  // 2p(1-p)
    t.icl_anticorrelated = 2.0 * p;
    t.icl_correlated = 0.0;
    return t;
}

void write_bounds_csv(const BoundCurveTable& table, std::ostream& out) {
    out << "x,curve,y\n";
    char buf[40];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof buf, "%.17g", r.x);
        out << buf << ',' << r.curve << ',';
        std::snprintf(buf, sizeof buf, "%.17g", r.y);
        out << buf << '\n';
    }
}

void write_bounds_csv_file(const BoundCurveTable& table, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    write_bounds_csv(table, f);
}

}  // namespace iclab
