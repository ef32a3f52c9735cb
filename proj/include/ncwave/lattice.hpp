#pragma once

// Discrete 1+1D Minkowski spacetime: uniform grids, complex N-component grid
// functions, the rectangle-rule scalar product and lattice causal cones.
//
// Coordinates: t = t0 + j*dt (j = 0..n_time-1), x = x0 + k*dx
// (k = 0..n_space-1). Light speed is 1 and the metric signature is (+,-).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "ncwave/errors.hpp"

namespace ncwave {

using cplx = std::complex<double>;

struct SpacetimeGrid {
    int n_time = 0;
    int n_space = 0;
    double dt = 0.0;
    double dx = 0.0;
    double t0 = 0.0;
    double x0 = 0.0;
    int components = 1;

    double t(int j) const { return t0 + j * dt; }
    double x(int k) const { return x0 + k * dx; }
    double t_end() const { return t(n_time - 1); }
    double x_end() const { return x(n_space - 1); }
    double cell() const { return dt * dx; }
    double courant() const { return dt / dx; }

    std::size_t points() const { return static_cast<std::size_t>(n_time) * n_space; }
    std::size_t size() const { return points() * components; }
    std::size_t point_index(int j, int k) const {
        return static_cast<std::size_t>(j) * n_space + k;
    }
    bool contains(int j, int k) const { return j >= 0 && j < n_time && k >= 0 && k < n_space; }

    // Nearest time index to t, clamped to the grid.
    int time_index(double tt) const {
        return std::clamp(static_cast<int>(std::lround((tt - t0) / dt)), 0, n_time - 1);
    }
    int space_index(double xx) const {
        return std::clamp(static_cast<int>(std::lround((xx - x0) / dx)), 0, n_space - 1);
    }

    friend bool operator==(const SpacetimeGrid&, const SpacetimeGrid&) = default;
};

/// Validated grid. Requires n_time, n_space >= 3, positive spacings, N >= 1
/// and the CFL bound dt/dx <= 1.
inline SpacetimeGrid make_grid(int n_time, int n_space, double dt, double dx, double t0, double x0,
                               int components = 1) {
    if (n_time < 3 || n_space < 3) {
        throw GridError("grid needs at least 3 time levels and 3 spatial points");
    }
    if (!(dt > 0.0) || !(dx > 0.0) || !std::isfinite(dt) || !std::isfinite(dx)) {
        throw GridError("grid spacings must be positive and finite");
    }
    if (components < 1) {
        throw GridError("component count must be >= 1");
    }
    if (!std::isfinite(t0) || !std::isfinite(x0)) {
        throw GridError("grid origin must be finite");
    }
    if (dt / dx > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "CFL violation: dt/dx = " << dt / dx << " > 1";
        throw GridError(os.str());
    }
    return SpacetimeGrid{n_time, n_space, dt, dx, t0, x0, components};
}

inline void require_same_grid(const SpacetimeGrid& a, const SpacetimeGrid& b, const char* where) {
    if (!(a == b)) {
        throw GridError(std::string(where) + ": grid mismatch");
    }
}

// Inclusive index box [j0, j1] x [k0, k1].
struct IndexBox {
    int j0 = 0, j1 = -1, k0 = 0, k1 = -1;

    bool empty() const { return j1 < j0 || k1 < k0; }
    int n_time() const { return empty() ? 0 : j1 - j0 + 1; }
    int n_space() const { return empty() ? 0 : k1 - k0 + 1; }
    std::size_t points() const { return static_cast<std::size_t>(n_time()) * n_space(); }
    bool contains(int j, int k) const { return j >= j0 && j <= j1 && k >= k0 && k <= k1; }
    bool contains(const IndexBox& o) const {
        return o.empty() || (o.j0 >= j0 && o.j1 <= j1 && o.k0 >= k0 && o.k1 <= k1);
    }
    IndexBox hull(const IndexBox& o) const {
        if (empty()) return o;
        if (o.empty()) return *this;
        return {std::min(j0, o.j0), std::max(j1, o.j1), std::min(k0, o.k0), std::max(k1, o.k1)};
    }

    friend bool operator==(const IndexBox&, const IndexBox&) = default;
};

// Smallest index box containing the coordinate rectangle [ta,tb] x [xa,xb].
inline IndexBox box_from_coordinates(const SpacetimeGrid& g, double ta, double tb, double xa,
                                     double xb) {
    IndexBox b;
    b.j0 = std::max(0, static_cast<int>(std::ceil((ta - g.t0) / g.dt - 1e-9)));
    b.j1 = std::min(g.n_time - 1, static_cast<int>(std::floor((tb - g.t0) / g.dt + 1e-9)));
    b.k0 = std::max(0, static_cast<int>(std::ceil((xa - g.x0) / g.dx - 1e-9)));
    b.k1 = std::min(g.n_space - 1, static_cast<int>(std::floor((xb - g.x0) / g.dx + 1e-9)));
    return b;
}

/// Complex N-component field sampled on every grid point. Layout is
/// (time, space, component), row-major.
class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(const SpacetimeGrid& grid)
        : grid_(grid), values_(grid.size(), cplx{0.0, 0.0}) {}
    GridFunction(const SpacetimeGrid& grid, std::vector<cplx> values)
        : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) {
            throw GridError("GridFunction: value array does not match grid shape");
        }
    }

    // fn(t, x, component) -> value.
    template <typename Fn>
    static GridFunction sample(const SpacetimeGrid& grid, Fn&& fn) {
        GridFunction f(grid);
        for (int j = 0; j < grid.n_time; ++j) {
            for (int k = 0; k < grid.n_space; ++k) {
                for (int a = 0; a < grid.components; ++a) {
                    f.at(j, k, a) = fn(grid.t(j), grid.x(k), a);
                }
            }
        }
        return f;
    }

    const SpacetimeGrid& grid() const { return grid_; }
    int components() const { return grid_.components; }
    std::size_t size() const { return values_.size(); }

    cplx& at(int j, int k, int a = 0) { return values_[offset(j, k) + a]; }
    const cplx& at(int j, int k, int a = 0) const { return values_[offset(j, k) + a]; }

    std::span<cplx> point(int j, int k) {
        return {values_.data() + offset(j, k), static_cast<std::size_t>(grid_.components)};
    }
    std::span<const cplx> point(int j, int k) const {
        return {values_.data() + offset(j, k), static_cast<std::size_t>(grid_.components)};
    }
    std::span<cplx> row(int j) {
        return {values_.data() + offset(j, 0),
                static_cast<std::size_t>(grid_.n_space) * grid_.components};
    }
    std::span<const cplx> row(int j) const {
        return {values_.data() + offset(j, 0),
                static_cast<std::size_t>(grid_.n_space) * grid_.components};
    }

    std::vector<cplx>& values() { return values_; }
    const std::vector<cplx>& values() const { return values_; }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](const cplx& v) {
            return std::isfinite(v.real()) && std::isfinite(v.imag());
        });
    }
    bool is_zero() const {
        return std::all_of(values_.begin(), values_.end(),
                           [](const cplx& v) { return v == cplx{0.0, 0.0}; });
    }

    GridFunction& operator+=(const GridFunction& o) {
        require_same_grid(grid_, o.grid_, "GridFunction +=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
        return *this;
    }
    GridFunction& operator-=(const GridFunction& o) {
        require_same_grid(grid_, o.grid_, "GridFunction -=");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
        return *this;
    }
    GridFunction& operator*=(cplx s) {
        for (auto& v : values_) v *= s;
        return *this;
    }
    // this += s * o
    GridFunction& axpy(cplx s, const GridFunction& o) {
        require_same_grid(grid_, o.grid_, "GridFunction axpy");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
        return *this;
    }

    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(cplx s, GridFunction a) { return a *= s; }
    friend GridFunction operator-(GridFunction a) { return a *= cplx{-1.0, 0.0}; }

private:
    std::size_t offset(int j, int k) const {
        return grid_.point_index(j, k) * static_cast<std::size_t>(grid_.components);
    }

    SpacetimeGrid grid_{};
    std::vector<cplx> values_;
};

/// <f, g> = sum over points and components of conj(f_A) g_A dt dx.
inline cplx inner_product(const GridFunction& f, const GridFunction& g) {
    require_same_grid(f.grid(), g.grid(), "inner_product");
    cplx acc{0.0, 0.0};
    const auto& a = f.values();
    const auto& b = g.values();
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
    return acc * f.grid().cell();
}

inline double l2_norm(const GridFunction& f) {
    double acc = 0.0;
    for (const auto& v : f.values()) acc += std::norm(v);
    return std::sqrt(acc * f.grid().cell());
}

inline double sup_norm(const GridFunction& f) {
    double m = 0.0;
    for (const auto& v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

// Time reflection j -> n_time-1-j.
inline GridFunction time_reverse(const GridFunction& f) {
    const auto& g = f.grid();
    GridFunction out(g);
    for (int j = 0; j < g.n_time; ++j) {
        auto src = f.row(g.n_time - 1 - j);
        std::copy(src.begin(), src.end(), out.row(j).begin());
    }
    return out;
}

// Zero outside the box.
inline GridFunction restrict_to(const GridFunction& f, const IndexBox& box) {
    GridFunction out(f.grid());
    for (int j = std::max(0, box.j0); j <= std::min(box.j1, f.grid().n_time - 1); ++j) {
        for (int k = std::max(0, box.k0); k <= std::min(box.k1, f.grid().n_space - 1); ++k) {
            for (int a = 0; a < f.components(); ++a) out.at(j, k, a) = f.at(j, k, a);
        }
    }
    return out;
}

/// One flag per grid point.
class RegionMask {
public:
    RegionMask() = default;
    explicit RegionMask(const SpacetimeGrid& grid, bool value = false)
        : grid_(grid), flags_(grid.points(), value ? 1 : 0) {}

    const SpacetimeGrid& grid() const { return grid_; }
    bool operator()(int j, int k) const { return flags_[grid_.point_index(j, k)] != 0; }
    void set(int j, int k, bool v = true) { flags_[grid_.point_index(j, k)] = v ? 1 : 0; }

    std::size_t count() const {
        return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), 1));
    }
    bool empty() const { return count() == 0; }

    RegionMask operator|(const RegionMask& o) const {
        require_same_grid(grid_, o.grid_, "RegionMask |");
        RegionMask r(*this);
        for (std::size_t i = 0; i < flags_.size(); ++i) r.flags_[i] |= o.flags_[i];
        return r;
    }
    RegionMask operator&(const RegionMask& o) const {
        require_same_grid(grid_, o.grid_, "RegionMask &");
        RegionMask r(*this);
        for (std::size_t i = 0; i < flags_.size(); ++i) r.flags_[i] &= o.flags_[i];
        return r;
    }
    RegionMask operator~() const {
        RegionMask r(*this);
        for (auto& v : r.flags_) v = v ? 0 : 1;
        return r;
    }
    friend bool operator==(const RegionMask&, const RegionMask&) = default;

    // Tight index box around flagged points (empty box if none).
    IndexBox bounding_box() const {
        IndexBox b{grid_.n_time, -1, grid_.n_space, -1};
        for (int j = 0; j < grid_.n_time; ++j) {
            for (int k = 0; k < grid_.n_space; ++k) {
                if ((*this)(j, k)) {
                    b.j0 = std::min(b.j0, j);
                    b.j1 = std::max(b.j1, j);
                    b.k0 = std::min(b.k0, k);
                    b.k1 = std::max(b.k1, k);
                }
            }
        }
        if (b.j1 < 0) return IndexBox{};
        return b;
    }

private:
    SpacetimeGrid grid_{};
    std::vector<std::uint8_t> flags_;
};

inline RegionMask box_mask(const SpacetimeGrid& g, const IndexBox& box) {
    RegionMask m(g);
    for (int j = std::max(0, box.j0); j <= std::min(box.j1, g.n_time - 1); ++j)
        for (int k = std::max(0, box.k0); k <= std::min(box.k1, g.n_space - 1); ++k) m.set(j, k);
    return m;
}

// Points where any component is nonzero.
inline RegionMask support(const GridFunction& f) {
    const auto& g = f.grid();
    RegionMask m(g);
    for (int j = 0; j < g.n_time; ++j)
        for (int k = 0; k < g.n_space; ++k)
            for (const auto& v : f.point(j, k))
                if (v != cplx{0.0, 0.0}) {
                    m.set(j, k);
                    break;
                }
    return m;
}

// Points at least `margin` cells away from every edge of the grid.
inline RegionMask interior_mask(const SpacetimeGrid& g, int margin = 1) {
    return box_mask(g, IndexBox{margin, g.n_time - 1 - margin, margin, g.n_space - 1 - margin});
}

// Chebyshev dilation by `cells` lattice steps (the "one-cell halo").
inline RegionMask inflate(const RegionMask& m, int cells = 1) {
    const auto& g = m.grid();
    RegionMask out(g);
    for (int j = 0; j < g.n_time; ++j)
        for (int k = 0; k < g.n_space; ++k) {
            if (!m(j, k)) continue;
            for (int dj = -cells; dj <= cells; ++dj)
                for (int dk = -cells; dk <= cells; ++dk)
                    if (g.contains(j + dj, k + dk)) out.set(j + dj, k + dk);
        }
    return out;
}

enum class Causal { future, past };

/// Lattice J+(seed) or J-(seed): (t_j, x_k) is flagged iff some seed point
/// (t_i, x_l) has +-(t_j - t_i) >= |x_k - x_l|. Ties count as inside (closed
/// cones), with a relative slack of 1e-9 cell to absorb rounding.
inline RegionMask causal_cone(const RegionMask& seed, Causal direction) {
    const auto& g = seed.grid();
    const double eps = 1e-9 * std::min(g.dt, g.dx);
    const double inf = std::numeric_limits<double>::infinity();
    RegionMask out(g);
    // reach[k] = min over processed seeds of (|x_k - x_l| - |t_j - t_i|)
    std::vector<double> reach(g.n_space, inf);
    std::vector<double> row_dist(g.n_space);
    const int nt = g.n_time;
    for (int step = 0; step < nt; ++step) {
        const int j = direction == Causal::future ? step : nt - 1 - step;
        if (step > 0) {
            for (auto& r : reach) r -= g.dt;
        }
        // 1D distance (in cells) to the nearest seed in row j.
        int last = -1;
        for (int k = 0; k < g.n_space; ++k) {
            if (seed(j, k)) last = k;
            row_dist[k] = last < 0 ? inf : static_cast<double>(k - last);
        }
        last = -1;
        for (int k = g.n_space - 1; k >= 0; --k) {
            if (seed(j, k)) last = k;
            if (last >= 0) row_dist[k] = std::min(row_dist[k], static_cast<double>(last - k));
        }
        for (int k = 0; k < g.n_space; ++k) {
            if (std::isfinite(row_dist[k])) reach[k] = std::min(reach[k], row_dist[k] * g.dx);
            if (reach[k] <= eps) out.set(j, k);
        }
    }
    return out;
}

/// Max component modulus over flagged points; 0 on an empty region.
inline double mask_sup_norm(const GridFunction& f, const RegionMask& region) {
    require_same_grid(f.grid(), region.grid(), "mask_sup_norm");
    const auto& g = f.grid();
    double m = 0.0;
    for (int j = 0; j < g.n_time; ++j)
        for (int k = 0; k < g.n_space; ++k)
            if (region(j, k))
                for (const auto& v : f.point(j, k)) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace ncwave
