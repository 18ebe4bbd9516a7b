#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <vector>

namespace acbdf2 {

/// Periodic M x M node grid on [origin, origin + L)^2 with spacing h = L / M.
struct Grid2D {
    std::size_t M = 2;
    double L = 1.0;
    double origin = 0.0;

    Grid2D() = default;
    Grid2D(std::size_t m, double length, double orig = 0.0) : M(m), L(length), origin(orig) {
        if (M < 2) throw std::invalid_argument("Grid2D: M must be at least 2");
        if (!(L > 0.0)) throw std::invalid_argument("Grid2D: L must be positive");
    }

    double h() const noexcept { return L / static_cast<double>(M); }
    std::size_t size() const noexcept { return M * M; }
    double coord(std::size_t i) const noexcept { return origin + static_cast<double>(i) * h(); }

    /// Row-major index with i running fastest (x direction).
    std::size_t index(std::size_t i, std::size_t j) const noexcept { return i + j * M; }

    friend bool operator==(const Grid2D&, const Grid2D&) = default;
};

/// Grid function stored row-major over a Grid2D.
class Field {
public:
    Field() = default;
    explicit Field(const Grid2D& grid, double value = 0.0) : grid_(grid), values_(grid.size(), value) {}
    Field(const Grid2D& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) throw std::invalid_argument("Field: value count does not match grid");
    }

    const Grid2D& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    double& operator[](std::size_t k) noexcept { return values_[k]; }
    double operator[](std::size_t k) const noexcept { return values_[k]; }
    double& at(std::size_t i, std::size_t j) { return values_.at(grid_.index(i, j)); }
    double at(std::size_t i, std::size_t j) const { return values_.at(grid_.index(i, j)); }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    /// Fills with fn(x, y) at the grid nodes.
    template <class Fn>
    void fill(Fn&& fn) {
        for (std::size_t j = 0; j < grid_.M; ++j) {
            const double y = grid_.coord(j);
            for (std::size_t i = 0; i < grid_.M; ++i) values_[grid_.index(i, j)] = fn(grid_.coord(i), y);
        }
    }

private:
    Grid2D grid_;
    std::vector<double> values_;
};

/// Five-point periodic Laplacian: out = Lambda_h u.
inline void laplacian_apply(const Grid2D& g, std::span<const double> u, std::span<double> out) {
    const std::size_t M = g.M;
    if (u.size() != g.size() || out.size() != g.size()) throw std::invalid_argument("laplacian_apply: size mismatch");
    const double inv_h2 = 1.0 / (g.h() * g.h());
    for (std::size_t j = 0; j < M; ++j) {
        const double* row = u.data() + j * M;
        const double* up = u.data() + ((j + 1) % M) * M;
        const double* down = u.data() + ((j + M - 1) % M) * M;
        double* o = out.data() + j * M;
        o[0] = (row[1] + row[M - 1] + up[0] + down[0] - 4.0 * row[0]) * inv_h2;
        for (std::size_t i = 1; i + 1 < M; ++i)
            o[i] = (row[i + 1] + row[i - 1] + up[i] + down[i] - 4.0 * row[i]) * inv_h2;
        o[M - 1] = (row[0] + row[M - 2] + up[M - 1] + down[M - 1] - 4.0 * row[M - 1]) * inv_h2;
    }
}

inline Field laplacian_apply(const Field& u) {
    Field out(u.grid());
    laplacian_apply(u.grid(), u.values(), out.values());
    return out;
}

/// Unweighted Euclidean inner product over all M^2 nodes.
inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
}

inline double max_norm(std::span<const double> u) {
    double m = 0.0;
    for (double v : u) m = std::max(m, std::abs(v));
    return m;
}

inline double max_norm(const Field& u) { return max_norm(u.values()); }

/// sqrt(h^2 sum u^2), approximating the continuous L2 norm.
inline double l2_norm(const Field& u) {
    const double h = u.grid().h();
    return std::sqrt(h * h * dot(u.values(), u.values()));
}

inline double max_norm_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
    return m;
}

// ---------------------------------------------------------------------------
// Snapshot format: "ACF1", M (u32 LE), M (u32 LE), time (f64 LE), M^2 f64 LE row-major.

namespace detail {

template <class T>
void write_le(std::ostream& os, T value) {
    std::array<unsigned char, sizeof(T)> bytes{};
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> bytes{};
    if (!is.read(reinterpret_cast<char*>(bytes.data()), sizeof(T)))
        throw std::runtime_error("snapshot: unexpected end of data");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace detail

struct Snapshot {
    Field field;
    double time = 0.0;
};

inline void write_snapshot(std::ostream& os, const Field& u, double time) {
    os.write("ACF1", 4);
    const auto M = static_cast<std::uint32_t>(u.grid().M);
    detail::write_le<std::uint32_t>(os, M);
    detail::write_le<std::uint32_t>(os, M);
    detail::write_le<double>(os, time);
    for (double v : u.values()) detail::write_le<double>(os, v);
}

/// Reads a snapshot; the file carries only M, so L and origin come from the caller.
inline Snapshot read_snapshot(std::istream& is, double L = 1.0, double origin = 0.0) {
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "ACF1", 4) != 0) throw std::runtime_error("snapshot: bad magic");
    const auto m1 = detail::read_le<std::uint32_t>(is);
    const auto m2 = detail::read_le<std::uint32_t>(is);
    if (m1 != m2) throw std::runtime_error("snapshot: non-square grid");
    Snapshot snap;
    snap.time = detail::read_le<double>(is);
    Grid2D grid(m1, L, origin);
    std::vector<double> values(grid.size());
    for (double& v : values) v = detail::read_le<double>(is);
    snap.field = Field(grid, std::move(values));
    return snap;
}

/// Plain-text dump, one grid row (fixed j) per line.
inline void write_matrix_text(std::ostream& os, const Field& u) {
    const std::size_t M = u.grid().M;
    os << std::setprecision(17);
    for (std::size_t j = 0; j < M; ++j) {
        for (std::size_t i = 0; i < M; ++i) os << (i ? " " : "") << u.at(i, j);
        os << '\n';
    }
}

}  // namespace acbdf2
