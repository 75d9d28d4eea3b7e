#include "popforge/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace popforge::svm {

namespace {
constexpr double kTau = 1e-12;
}

RbfGram::RbfGram(const std::vector<std::vector<double>>& rows, double gamma,
                 std::size_t cache_bytes)
    : x_(rows), gamma_(gamma), n_(rows.size()) {
    const std::size_t full_bytes = n_ * n_ * sizeof(double);
    full_ = full_bytes <= cache_bytes;
    if (full_) {
        storage_.resize(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i) compute_row(i, &storage_[i * n_]);
        max_cached_rows_ = 0;
    } else {
        max_cached_rows_ = std::max<std::size_t>(2, cache_bytes / (n_ * sizeof(double)));
        cache_storage_.resize(max_cached_rows_ * n_);
        slot_owner_.assign(max_cached_rows_, static_cast<std::size_t>(-1));
    }
}

void RbfGram::compute_row(std::size_t i, double* out) const {
    const std::vector<double>& xi = x_[i];
    const std::size_t d = xi.size();
    for (std::size_t j = 0; j < n_; ++j) {
        const std::vector<double>& xj = x_[j];
        double sq = 0.0;
        for (std::size_t f = 0; f < d; ++f) {
            const double diff = xi[f] - xj[f];
            sq += diff * diff;
        }
        out[j] = std::exp(-gamma_ * sq);
    }
}

const double* RbfGram::row(std::size_t i) {
    if (full_) return &storage_[i * n_];
    auto it = slot_.find(i);
    if (it != slot_.end()) return &cache_storage_[it->second * n_];
    const std::size_t slot = next_evict_;
    next_evict_ = (next_evict_ + 1) % max_cached_rows_;
    if (slot_owner_[slot] != static_cast<std::size_t>(-1)) slot_.erase(slot_owner_[slot]);
    slot_owner_[slot] = i;
    slot_[i] = slot;
    double* out = &cache_storage_[slot * n_];
    compute_row(i, out);
    return out;
}

Solution smo_solve(RbfGram& gram, const std::vector<int>& y, const std::vector<double>& c,
                   double eps) {
    const std::size_t l = gram.size();
    std::vector<double> alpha(l, 0.0);
    std::vector<double> grad(l, -1.0); // G = Q*alpha - e, alpha = 0 initially

    // Scratch Q rows (Q_ij = y_i y_j K_ij).
    std::vector<double> qi(l), qj(l);
    auto fill_q = [&](std::size_t r, std::vector<double>& out) {
        const double* krow = gram.row(r);
        const double yr = y[r];
        for (std::size_t t = 0; t < l; ++t) out[t] = yr * y[t] * krow[t];
    };

    auto is_upper = [&](std::size_t t) { return alpha[t] >= c[t]; };
    auto is_lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

    const long max_iter = std::max<long>(10000000L, 100L * static_cast<long>(l));
    long iter = 0;

    for (; iter < max_iter; ++iter) {
        // Working-set selection: i is the maximal violator in I_up, j gives
        // the largest second-order objective decrease within I_low.
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        std::ptrdiff_t i = -1;
        for (std::size_t t = 0; t < l; ++t) {
            if (y[t] == +1) {
                if (!is_upper(t) && -grad[t] >= gmax) {
                    gmax = -grad[t];
                    i = static_cast<std::ptrdiff_t>(t);
                }
            } else {
                if (!is_lower(t) && grad[t] >= gmax) {
                    gmax = grad[t];
                    i = static_cast<std::ptrdiff_t>(t);
                }
            }
        }
        if (i >= 0) fill_q(static_cast<std::size_t>(i), qi);

        std::ptrdiff_t j = -1;
        double obj_min = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < l; ++t) {
            if (y[t] == +1) {
                if (!is_lower(t)) {
                    const double grad_diff = gmax + grad[t];
                    if (grad[t] >= gmax2) gmax2 = grad[t];
                    if (grad_diff > 0 && i >= 0) {
                        double quad = gram.diag(static_cast<std::size_t>(i)) + gram.diag(t) -
                                      2.0 * y[i] * qi[t];
                        if (quad <= 0) quad = kTau;
                        const double obj = -(grad_diff * grad_diff) / quad;
                        if (obj <= obj_min) {
                            j = static_cast<std::ptrdiff_t>(t);
                            obj_min = obj;
                        }
                    }
                }
            } else {
                if (!is_upper(t)) {
                    const double grad_diff = gmax - grad[t];
                    if (-grad[t] >= gmax2) gmax2 = -grad[t];
                    if (grad_diff > 0 && i >= 0) {
                        double quad = gram.diag(static_cast<std::size_t>(i)) + gram.diag(t) +
                                      2.0 * y[i] * qi[t];
                        if (quad <= 0) quad = kTau;
                        const double obj = -(grad_diff * grad_diff) / quad;
                        if (obj <= obj_min) {
                            j = static_cast<std::ptrdiff_t>(t);
                            obj_min = obj;
                        }
                    }
                }
            }
        }

        if (gmax + gmax2 < eps || j < 0) break; // KKT gap closed

        fill_q(static_cast<std::size_t>(j), qj);

        const std::size_t si = static_cast<std::size_t>(i);
        const std::size_t sj = static_cast<std::size_t>(j);
        const double ci = c[si], cj = c[sj];
        const double old_ai = alpha[si], old_aj = alpha[sj];

        if (y[si] != y[sj]) {
            double quad = gram.diag(si) + gram.diag(sj) + 2.0 * qi[sj];
            if (quad <= 0) quad = kTau;
            const double delta = (-grad[si] - grad[sj]) / quad;
            const double diff = alpha[si] - alpha[sj];
            alpha[si] += delta;
            alpha[sj] += delta;
            if (diff > 0) {
                if (alpha[sj] < 0) {
                    alpha[sj] = 0;
                    alpha[si] = diff;
                }
            } else {
                if (alpha[si] < 0) {
                    alpha[si] = 0;
                    alpha[sj] = -diff;
                }
            }
            if (diff > ci - cj) {
                if (alpha[si] > ci) {
                    alpha[si] = ci;
                    alpha[sj] = ci - diff;
                }
            } else {
                if (alpha[sj] > cj) {
                    alpha[sj] = cj;
                    alpha[si] = cj + diff;
                }
            }
        } else {
            double quad = gram.diag(si) + gram.diag(sj) - 2.0 * qi[sj];
            if (quad <= 0) quad = kTau;
            const double delta = (grad[si] - grad[sj]) / quad;
            const double sum = alpha[si] + alpha[sj];
            alpha[si] -= delta;
            alpha[sj] += delta;
            if (sum > ci) {
                if (alpha[si] > ci) {
                    alpha[si] = ci;
                    alpha[sj] = sum - ci;
                }
            } else {
                if (alpha[sj] < 0) {
                    alpha[sj] = 0;
                    alpha[si] = sum;
                }
            }
            if (sum > cj) {
                if (alpha[sj] > cj) {
                    alpha[sj] = cj;
                    alpha[si] = sum - cj;
                }
            } else {
                if (alpha[si] < 0) {
                    alpha[si] = 0;
                    alpha[sj] = sum;
                }
            }
        }

        const double dai = alpha[si] - old_ai;
        const double daj = alpha[sj] - old_aj;
        for (std::size_t t = 0; t < l; ++t) grad[t] += qi[t] * dai + qj[t] * daj;
    }

    // rho from the free support vectors, midpoint of the bounds otherwise.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    long n_free = 0;
    for (std::size_t t = 0; t < l; ++t) {
        const double yg = y[t] * grad[t];
        if (is_upper(t)) {
            if (y[t] == -1)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else if (is_lower(t)) {
            if (y[t] == +1)
                ub = std::min(ub, yg);
            else
                lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }

    Solution sol;
    sol.alpha = std::move(alpha);
    sol.rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;
    sol.iterations = iter;
    return sol;
}

} // namespace popforge::svm
