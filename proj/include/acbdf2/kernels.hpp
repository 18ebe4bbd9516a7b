#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "acbdf2/time_mesh.hpp"

namespace acbdf2 {

/// Nonzero BDF2 convolution kernels of one step: D2 v^n = b0 (v^n - v^{n-1}) + b1 (v^{n-1} - v^{n-2}).
struct Bdf2Kernel {
    double b0 = 0.0;
    double b1 = 0.0;
};

/// Kernels for a step of size tau with ratio r = tau_n / tau_{n-1}.
/// r = 0 yields the BDF1 start (b0 = 1/tau, b1 = 0).
inline Bdf2Kernel bdf2_kernel(double tau, double r) {
    return {(1.0 + 2.0 * r) / (tau * (1.0 + r)), -r * r / (tau * (1.0 + r))};
}

inline Bdf2Kernel bdf2_kernels(const TimeMesh& mesh, std::size_t n) {
    return bdf2_kernel(mesh.step(n), mesh.ratio(n));
}

/// Lower end of the admissible recombination parameter range for ratio r.
inline double eta_lower_bound(double r) { return r * r / (1.0 + 2.0 * r); }

inline bool eta_admissible(double r, double eta) { return eta_lower_bound(r) <= eta && eta < 1.0; }

/// eta = 2 r_s^2 / (1 + r_s)^2 for a maximum ratio r_s in [1, 1 + sqrt 2).
inline double choose_eta(double r_s) {
    if (!(r_s >= 1.0 && r_s < kRatioLimitS0))
        throw std::domain_error("choose_eta: ratio cap must lie in [1, 1+sqrt(2))");
    return 2.0 * r_s * r_s / ((1.0 + r_s) * (1.0 + r_s));
}

/// Recombined kernels d_0..d_n of step n: d_0 = b0, d_j = eta^{j-1} (b0 eta + b1).
inline std::vector<double> recombined_kernels(const Bdf2Kernel& b, double eta, std::size_t n) {
    std::vector<double> d(n + 1);
    d[0] = b.b0;
    double p = 1.0;
    const double lead = b.b0 * eta + b.b1;
    for (std::size_t j = 1; j <= n; ++j) {
        d[j] = p * lead;
        p *= eta;
    }
    return d;
}

inline bool is_nonnegative_decreasing(std::span<const double> d) {
    for (std::size_t j = 0; j < d.size(); ++j) {
        if (d[j] < 0.0) return false;
        if (j > 0 && d[j] > d[j - 1]) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// BDF2 difference quotient.

template <class T>
T apply_bdf2(const Bdf2Kernel& b, T v_n, T v_nm1, T v_nm2) {
    return b.b0 * (v_n - v_nm1) + b.b1 * (v_nm1 - v_nm2);
}

/// Elementwise D2 on fields. `v_nm2` may be empty when b1 == 0 (first step).
inline void apply_bdf2(const Bdf2Kernel& b, std::span<const double> v_n, std::span<const double> v_nm1,
                       std::span<const double> v_nm2, std::span<double> out) {
    if (v_n.size() != v_nm1.size() || out.size() != v_n.size())
        throw std::invalid_argument("apply_bdf2: size mismatch");
    if (b.b1 == 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = b.b0 * (v_n[i] - v_nm1[i]);
        return;
    }
    if (v_nm2.size() != v_n.size()) throw std::invalid_argument("apply_bdf2: missing v^{n-2}");
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = b.b0 * (v_n[i] - v_nm1[i]) + b.b1 * (v_nm1[i] - v_nm2[i]);
}

/// D2 v^n on a scalar sequence v^0..v^N over `mesh`.
inline double apply_bdf2(const TimeMesh& mesh, std::span<const double> v, std::size_t n) {
    if (n < 1 || n >= v.size()) throw std::out_of_range("apply_bdf2: missing history");
    const Bdf2Kernel b = bdf2_kernels(mesh, n);
    if (n == 1) return b.b0 * (v[1] - v[0]);
    return apply_bdf2(b, v[n], v[n - 1], v[n - 2]);
}

// ---------------------------------------------------------------------------
// Recombined variables vbar^k = v^k - eta v^{k-1}, vbar^0 = v^0.

inline std::vector<double> recombine_sequence(std::span<const double> v, double eta) {
    std::vector<double> vbar(v.size());
    for (std::size_t k = 0; k < v.size(); ++k) vbar[k] = k == 0 ? v[0] : v[k] - eta * v[k - 1];
    return vbar;
}

/// v^k = sum_{l=0}^{k} eta^{k-l} vbar^l.
inline std::vector<double> substitute_back(std::span<const double> vbar, double eta) {
    std::vector<double> v(vbar.size());
    for (std::size_t k = 0; k < vbar.size(); ++k) {
        double acc = 0.0;
        double p = 1.0;
        for (std::size_t l = k + 1; l-- > 0;) {
            acc += p * vbar[l];
            p *= eta;
        }
        v[k] = acc;
    }
    return v;
}

/// D2 v^n written in recombined form: sum_{j=1}^n d_{n-j} (vbar^j - vbar^{j-1}) + d_n vbar^0.
inline double apply_recombined(const TimeMesh& mesh, double eta, std::span<const double> vbar, std::size_t n) {
    if (n < 1 || n >= vbar.size()) throw std::out_of_range("apply_recombined: missing history");
    const std::vector<double> d = recombined_kernels(bdf2_kernels(mesh, n), eta, n);
    double acc = d[n] * vbar[0];
    for (std::size_t j = 1; j <= n; ++j) acc += d[n - j] * (vbar[j] - vbar[j - 1]);
    return acc;
}

// ---------------------------------------------------------------------------

/// Complementary kernels (Q_d)^{(n)}_{n-j} of the recombined kernels over a
/// whole mesh. Stores the full lower triangle, O(N^2); meant for verification.
class ComplementaryKernels {
public:
    ComplementaryKernels(const TimeMesh& mesh, double eta) : N_(mesh.size()), eta_(eta) {
        d_.resize(N_);
        for (std::size_t k = 1; k <= N_; ++k) d_[k - 1] = recombined_kernels(bdf2_kernels(mesh, k), eta, k);
        q_.resize(N_);
        for (std::size_t n = 1; n <= N_; ++n) {
            std::vector<double>& row = q_[n - 1];
            row.assign(n, 0.0);  // row[j-1] = (Q_d)^{(n)}_{n-j}
            if (d(n, 0) == 0.0) throw std::domain_error("complementary kernels: zero leading kernel");
            row[n - 1] = 1.0 / d(n, 0);
            for (std::size_t j = n - 1; j >= 1; --j) {
                double acc = 0.0;
                for (std::size_t k = j + 1; k <= n; ++k)
                    acc += (d(k, k - j - 1) - d(k, k - j)) * row[k - 1];
                row[j - 1] = acc / d(j, 0);
            }
        }
    }

    std::size_t size() const noexcept { return N_; }
    double eta() const noexcept { return eta_; }

    /// Recombined kernel d^{(k)}_i, 0 <= i <= k.
    double d(std::size_t k, std::size_t i) const { return d_.at(k - 1).at(i); }

    /// (Q_d)^{(n)}_{n-j} for 1 <= j <= n.
    double q(std::size_t n, std::size_t j) const {
        if (j < 1 || j > n) throw std::out_of_range("complementary kernel index");
        return q_.at(n - 1)[j - 1];
    }

    /// |sum_{j=k}^{n} (Q_d)^{(n)}_{n-j} d^{(j)}_{j-k} - 1|.
    double identity_residual(std::size_t n, std::size_t k) const {
        double acc = 0.0;
        for (std::size_t j = k; j <= n; ++j) acc += q(n, j) * d(j, j - k);
        return std::abs(acc - 1.0);
    }

private:
    std::size_t N_;
    double eta_;
    std::vector<std::vector<double>> d_;
    std::vector<std::vector<double>> q_;
};

}  // namespace acbdf2
