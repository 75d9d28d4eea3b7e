#pragma once

#include <cstddef>
#include <unordered_map>
#include <vector>

namespace popforge::svm {

// RBF Gram matrix access with full precomputation for small problems and a
// bounded row cache above that.
class RbfGram {
public:
    RbfGram(const std::vector<std::vector<double>>& rows, double gamma,
            std::size_t cache_bytes = 256ULL << 20);

    std::size_t size() const { return n_; }
    const double* row(std::size_t i);
    double diag(std::size_t) const { return 1.0; } // exp(0) for RBF

private:
    void compute_row(std::size_t i, double* out) const;

    const std::vector<std::vector<double>>& x_;
    double gamma_;
    std::size_t n_;
    bool full_;
    std::vector<double> storage_;                       // full mode
    std::size_t max_cached_rows_;                       // cache mode
    std::vector<double> cache_storage_;
    std::unordered_map<std::size_t, std::size_t> slot_; // row -> slot
    std::vector<std::size_t> slot_owner_;
    std::size_t next_evict_ = 0;
};

struct Solution {
    std::vector<double> alpha;
    double rho = 0.0;  // decision(x) = sum alpha_i y_i K(x_i, x) - rho
    long iterations = 0;
};

// Two-variable SMO for the weighted C-SVC dual with second-order working-set
// selection. y in {+1, -1}; c gives the per-example upper bound C_i.
Solution smo_solve(RbfGram& gram, const std::vector<int>& y, const std::vector<double>& c,
                   double eps = 1e-3);

} // namespace popforge::svm
