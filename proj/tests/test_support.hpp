#pragma once

// Shared generators for the unit suites.

#include <random>

#include "ncwave/lattice.hpp"
#include "ncwave/profiles.hpp"

namespace ncwave::test {

inline GridFunction random_function(const SpacetimeGrid& g, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    GridFunction f(g);
    for (auto& v : f.values()) v = {nd(rng), nd(rng)};
    return f;
}

// Random complex values on the index box, zero elsewhere.
inline GridFunction random_in_box(const SpacetimeGrid& g, const IndexBox& box, std::mt19937_64& rng,
                                  bool real = false) {
    std::normal_distribution<double> nd;
    GridFunction f(g);
    for (int j = box.j0; j <= box.j1; ++j)
        for (int k = box.k0; k <= box.k1; ++k)
            for (int a = 0; a < g.components; ++a) f.at(j, k, a) = {nd(rng), real ? 0.0 : nd(rng)};
    return f;
}

// Smooth source: a random bump inside the coordinate rectangle.
inline GridFunction random_bump(const SpacetimeGrid& g, std::mt19937_64& rng, double ta, double tb,
                                double xa, double xb, double r = 0.1, bool real = false) {
    std::uniform_real_distribution<double> ut(ta + r, tb - r), ux(xa + r, xb - r);
    std::normal_distribution<double> nd;
    BumpProfile b;
    b.t_c = ut(rng);
    b.x_c = ux(rng);
    b.r_t = r;
    b.r_x = r;
    b.amplitude.clear();
    for (int a = 0; a < g.components; ++a) b.amplitude.emplace_back(nd(rng), real ? 0.0 : nd(rng));
    return b.sample(g);
}

inline double max_abs_diff(const GridFunction& a, const GridFunction& b) { return sup_norm(a - b); }

// Sup norm over the interior band that keeps `margin` cells from the rim.
inline double interior_sup(const GridFunction& f, int margin) {
    return mask_sup_norm(f, interior_mask(f.grid(), margin));
}

}  // namespace ncwave::test
