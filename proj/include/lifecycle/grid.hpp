#pragma once

#include <cstddef>

namespace lifecycle {

// Uniform time grid t_i = i * dt on [0, tau_R].
struct TimeGrid {
    std::size_t n_t = 0;
    double t_end = 0.0;

    double dt() const { return t_end / static_cast<double>(n_t); }
    double at(std::size_t i) const { return static_cast<double>(i) * dt(); }
    std::size_t size() const { return n_t + 1; }
};

// Uniform lag grid zeta_j = -d + j * dz on [-d, 0]; zeta_0 = -d, zeta_{n_z} = 0.
struct LagGrid {
    std::size_t n_z = 0;
    double d = 0.0;

    double dz() const { return d / static_cast<double>(n_z); }
    double at(std::size_t j) const {
        return j == n_z ? 0.0 : -d + static_cast<double>(j) * dz();
    }
    std::size_t size() const { return n_z + 1; }

    bool operator==(const LagGrid& o) const { return n_z == o.n_z && d == o.d; }
};

struct AlignedGrids {
    TimeGrid time;
    LagGrid lag;
};

// Builds grids with dt == dz. Both tau_R / dt and d / dt must be integers up to
// a relative tolerance of 1e-9; GridMismatch otherwise.
AlignedGrids make_aligned_grids(double tau_R, double d, double dt);

// Composite trapezoid weight of node j out of n+1 nodes (spacing excluded).
inline double trapezoid_weight(std::size_t j, std::size_t n) {
    return (j == 0 || j == n) ? 0.5 : 1.0;
}

}  // namespace lifecycle
