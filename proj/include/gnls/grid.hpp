#pragma once

// Periodic uniform lattices in one or two spatial dimensions and the
// second-order discrete calculus used by every other module.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "gnls/error.hpp"

namespace gnls {

using Complex = std::complex<double>;

/// ħ, m, e, c. The covariant derivative couples through e/(ħc).
struct PhysicalConstants {
    double hbar = 1.0;
    double mass = 1.0;
    double charge = 1.0;
    double light = 1.0;

    double coupling() const { return charge / (hbar * light); }

    void validate() const {
        auto check = [](double v, const char* name) {
            if (!(std::isfinite(v) && v > 0.0))
                throw InvalidArgument(std::string("physical constant ") + name + " must be positive and finite");
        };
        check(hbar, "hbar");
        check(mass, "mass");
        check(charge, "charge");
        check(light, "light");
    }
};

/// Periodic lattice with spacing L_a / N_a per axis.
///
/// Sites are stored row-major with axis 0 (x) fastest:
/// site = ix + N_x * iy. Coordinates run over [0, L_a).
class Lattice {
public:
    static constexpr int kMinPoints = 8;

    Lattice() = default;

    static Lattice line(double length, int points) { return Lattice(1, {length, 1.0}, {points, 1}); }

    static Lattice plane(double length_x, double length_y, int points_x, int points_y) {
        return Lattice(2, {length_x, length_y}, {points_x, points_y});
    }

    Lattice(int dim, std::array<double, 2> lengths, std::array<int, 2> points)
        : dim_(dim), lengths_(lengths), points_(points) {
        if (dim != 1 && dim != 2)
            throw InvalidArgument("lattice dimension must be 1 or 2");
        for (int a = 0; a < dim; ++a) {
            if (!(std::isfinite(lengths[a]) && lengths[a] > 0.0))
                throw InvalidArgument("lattice length must be positive");
            if (points[a] < kMinPoints)
                throw InvalidArgument("lattice needs at least " + std::to_string(kMinPoints) + " points per axis");
            spacing_[a] = lengths[a] / points[a];
        }
        if (dim == 1) {
            points_[1] = 1;
            lengths_[1] = 1.0;
            spacing_[1] = 1.0;
        }
    }

    int dim() const { return dim_; }
    int points(int axis) const { return points_[static_cast<std::size_t>(axis)]; }
    double length(int axis) const { return lengths_[static_cast<std::size_t>(axis)]; }
    double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }
    std::size_t size() const { return static_cast<std::size_t>(points_[0]) * static_cast<std::size_t>(points_[1]); }

    double cell_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim_; ++a)
            v *= spacing_[static_cast<std::size_t>(a)];
        return v;
    }

    double min_spacing() const { return dim_ == 1 ? spacing_[0] : std::min(spacing_[0], spacing_[1]); }

    std::size_t index(int ix, int iy = 0) const {
        return static_cast<std::size_t>(wrap(ix, points_[0])) +
               static_cast<std::size_t>(points_[0]) * static_cast<std::size_t>(wrap(iy, points_[1]));
    }

    int coord_index(std::size_t site, int axis) const {
        return axis == 0 ? static_cast<int>(site % static_cast<std::size_t>(points_[0]))
                         : static_cast<int>(site / static_cast<std::size_t>(points_[0]));
    }

    double coordinate(std::size_t site, int axis) const { return coord_index(site, axis) * spacing(axis); }

    /// Neighbour of `site` displaced by `offset` sites along `axis`, with wraparound.
    std::size_t neighbor(std::size_t site, int axis, int offset) const {
        int ix = coord_index(site, 0);
        int iy = coord_index(site, 1);
        if (axis == 0)
            ix += offset;
        else
            iy += offset;
        return index(ix, iy);
    }

    bool operator==(const Lattice&) const = default;

private:
    static int wrap(int i, int n) {
        int r = i % n;
        return r < 0 ? r + n : r;
    }

    int dim_ = 1;
    std::array<double, 2> lengths_{1.0, 1.0};
    std::array<int, 2> points_{kMinPoints, 1};
    std::array<double, 2> spacing_{1.0 / kMinPoints, 1.0};
};

/// One value per lattice site.
template <class T>
class GridField {
public:
    using value_type = T;

    GridField() = default;
    explicit GridField(const Lattice& lattice, T fill = T{}) : lattice_(lattice), values_(lattice.size(), fill) {}
    GridField(const Lattice& lattice, std::vector<T> values) : lattice_(lattice), values_(std::move(values)) {
        if (values_.size() != lattice_.size())
            throw InvalidArgument("field value count does not match lattice");
    }

    /// Samples `f(x)` (1D) or `f(x, y)` (2D) at every site.
    template <class F>
    static GridField sample(const Lattice& lattice, F&& f) {
        GridField out(lattice);
        for (std::size_t s = 0; s < lattice.size(); ++s) {
            if constexpr (std::is_invocable_v<F, double, double>)
                out[s] = f(lattice.coordinate(s, 0), lattice.dim() > 1 ? lattice.coordinate(s, 1) : 0.0);
            else
                out[s] = f(lattice.coordinate(s, 0));
        }
        return out;
    }

    const Lattice& lattice() const { return lattice_; }
    std::size_t size() const { return values_.size(); }

    T& operator[](std::size_t s) { return values_[s]; }
    const T& operator[](std::size_t s) const { return values_[s]; }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    auto begin() { return values_.begin(); }
    auto end() { return values_.end(); }
    auto begin() const { return values_.begin(); }
    auto end() const { return values_.end(); }

    GridField& operator+=(const GridField& o) {
        for (std::size_t s = 0; s < size(); ++s)
            values_[s] += o.values_[s];
        return *this;
    }
    GridField& operator-=(const GridField& o) {
        for (std::size_t s = 0; s < size(); ++s)
            values_[s] -= o.values_[s];
        return *this;
    }
    GridField& operator*=(T k) {
        for (auto& v : values_)
            v *= k;
        return *this;
    }

    friend GridField operator+(GridField a, const GridField& b) { return a += b; }
    friend GridField operator-(GridField a, const GridField& b) { return a -= b; }
    friend GridField operator*(GridField a, T k) { return a *= k; }
    friend GridField operator*(T k, GridField a) { return a *= k; }

    /// Pointwise product.
    friend GridField operator*(const GridField& a, const GridField& b) {
        GridField out(a.lattice_);
        for (std::size_t s = 0; s < a.size(); ++s)
            out.values_[s] = a.values_[s] * b.values_[s];
        return out;
    }

    bool all_finite() const {
        for (const auto& v : values_) {
            if constexpr (std::is_same_v<T, Complex>) {
                if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
                    return false;
            } else if (!std::isfinite(v)) {
                return false;
            }
        }
        return true;
    }

private:
    Lattice lattice_;
    std::vector<T> values_;
};

using ScalarField = GridField<double>;
using ComplexField = GridField<Complex>;

/// n real components per site, one ScalarField per axis.
class VectorField {
public:
    VectorField() = default;
    explicit VectorField(const Lattice& lattice)
        : components_(static_cast<std::size_t>(lattice.dim()), ScalarField(lattice)) {}
    explicit VectorField(std::vector<ScalarField> components) : components_(std::move(components)) {}

    int dim() const { return static_cast<int>(components_.size()); }
    const Lattice& lattice() const { return components_.front().lattice(); }

    ScalarField& operator[](int axis) { return components_[static_cast<std::size_t>(axis)]; }
    const ScalarField& operator[](int axis) const { return components_[static_cast<std::size_t>(axis)]; }

    VectorField& operator+=(const VectorField& o) {
        for (std::size_t a = 0; a < components_.size(); ++a)
            components_[a] += o.components_[a];
        return *this;
    }
    VectorField& operator-=(const VectorField& o) {
        for (std::size_t a = 0; a < components_.size(); ++a)
            components_[a] -= o.components_[a];
        return *this;
    }
    VectorField& operator*=(double k) {
        for (auto& c : components_)
            c *= k;
        return *this;
    }
    friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
    friend VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
    friend VectorField operator*(double k, VectorField a) { return a *= k; }

    /// Site-wise dot product with another vector field.
    friend ScalarField dot(const VectorField& a, const VectorField& b) {
        ScalarField out(a.lattice());
        for (int ax = 0; ax < a.dim(); ++ax)
            for (std::size_t s = 0; s < out.size(); ++s)
                out[s] += a[ax][s] * b[ax][s];
        return out;
    }

    bool all_finite() const {
        for (const auto& c : components_)
            if (!c.all_finite())
                return false;
        return true;
    }

private:
    std::vector<ScalarField> components_;
};

// ---------------------------------------------------------------------------
// Discrete calculus. One stencil per operator:
//   partial    (f[i+1] - f[i-1]) / (2 dx)
//   laplacian  sum_a (f[i+1] - 2 f[i] + f[i-1]) / dx_a^2     (compact, not partial∘partial)
//   integrate  sum(f) * prod(dx_a)
// With periodic wraparound, sum(partial(f)) == 0 and sum(laplacian(f)) == 0 exactly.
// ---------------------------------------------------------------------------

template <class T>
GridField<T> partial(const GridField<T>& f, int axis) {
    const Lattice& lat = f.lattice();
    if (axis < 0 || axis >= lat.dim())
        throw InvalidArgument("partial: axis " + std::to_string(axis) + " out of range");
    const double inv = 1.0 / (2.0 * lat.spacing(axis));
    GridField<T> out(lat);
    for (std::size_t s = 0; s < f.size(); ++s)
        out[s] = (f[lat.neighbor(s, axis, 1)] - f[lat.neighbor(s, axis, -1)]) * inv;
    return out;
}

template <class T>
GridField<T> laplacian(const GridField<T>& f) {
    const Lattice& lat = f.lattice();
    GridField<T> out(lat);
    for (int a = 0; a < lat.dim(); ++a) {
        const double inv = 1.0 / (lat.spacing(a) * lat.spacing(a));
        for (std::size_t s = 0; s < f.size(); ++s)
            out[s] += (f[lat.neighbor(s, a, 1)] - 2.0 * f[s] + f[lat.neighbor(s, a, -1)]) * inv;
    }
    return out;
}

template <class T>
T integrate(const GridField<T>& f) {
    T sum{};
    for (const auto& v : f)
        sum += v;
    return sum * f.lattice().cell_volume();
}

inline VectorField gradient(const ScalarField& f) {
    VectorField out(f.lattice());
    for (int a = 0; a < f.lattice().dim(); ++a)
        out[a] = partial(f, a);
    return out;
}

/// Σ_a partial(v_a, a).
inline ScalarField divergence(const VectorField& v) {
    ScalarField out(v.lattice());
    for (int a = 0; a < v.dim(); ++a)
        out += partial(v[a], a);
    return out;
}

inline double max_abs(const ScalarField& f) {
    double m = 0.0;
    for (double v : f)
        m = std::max(m, std::abs(v));
    return m;
}

inline double max_abs(const VectorField& v) {
    double m = 0.0;
    for (int a = 0; a < v.dim(); ++a)
        m = std::max(m, max_abs(v[a]));
    return m;
}

/// sqrt(∫ |f|² dⁿx).
template <class T>
double l2_norm(const GridField<T>& f) {
    double sum = 0.0;
    for (const auto& v : f)
        sum += std::norm(v);
    return std::sqrt(sum * f.lattice().cell_volume());
}

inline double l2_norm(const VectorField& v) {
    double sum = 0.0;
    for (int a = 0; a < v.dim(); ++a) {
        const double n = l2_norm(v[a]);
        sum += n * n;
    }
    return std::sqrt(sum);
}

/// ||a - b|| / ||b||, or the absolute difference when b vanishes.
template <class T>
double relative_l2(const GridField<T>& a, const GridField<T>& b) {
    const double denom = l2_norm(b);
    const double num = l2_norm(a - b);
    return denom > 0.0 ? num / denom : num;
}

inline double relative_l2(const VectorField& a, const VectorField& b) {
    const double denom = l2_norm(b);
    const double num = l2_norm(a - b);
    return denom > 0.0 ? num / denom : num;
}

} // namespace gnls
