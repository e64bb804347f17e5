#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

#include "iclab/core.hpp"

namespace iclab {

// Closed-form curve table for the bounds figure: the in-context cross-entropy
// sandwich as a function of the irrelevant-label count k, and the in-weight
// excess risk leading term as a function of the per-key sample count.
struct BoundCurveTable {
    struct Row {
        double x = 0.0;
        std::string curve;
        double y = 0.0;
    };
    std::vector<Row> rows;        // sorted by (curve, x)
    nlohmann::json params;        // generation parameters plus entropy asymptote
};

BoundCurveTable bound_curves(int L, double eps, double B, int C, const SimplexVector& y_star,
                              const std::vector<int>& k_range,
                              const std::vector<double>& n_range);

// Binary-class floor of the in-context cross-entropy when at least one
// relevant label is present: (1 - 2 eps) / (1 + (L - 1) e^2) + eps, the B = 1
// lower bound specialized to C = 2, k >= 1 (k = 1 gives the floor).
double icl_floor_binary(int L, double eps);

// The label-noise rate whose binary entropy equals the given floor; bisection
// on (1e-15, 0.5 - 1e-15) to 1e-12. Requires floor_value in (0, log 2).
double entropy_threshold(double floor_value);

// Error rates of the two predictor families under label-flip noise at rate p:
// always-majority in-weight prediction errs at p; copying a context label errs
// at 2p(1-p) for independent flips, 2p for anti-correlated flips, 0 when the
// context flips exactly with the query.
struct NoiseTradeoff {
    double iwl_err = 0.0;
    double icl_independent = 0.0;
    double icl_anticorrelated = 0.0;
    double icl_correlated = 0.0;
};

NoiseTradeoff noise_tradeoff(double p);

// Columns: x, curve, y.
void write_bounds_csv(const BoundCurveTable& table, std::ostream& out);
void write_bounds_csv_file(const BoundCurveTable& table, const std::string& path);

}  // namespace iclab
