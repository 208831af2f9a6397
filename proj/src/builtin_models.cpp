// builtin_models.cpp

#include "ctoqw/builtin_models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ctoqw::builtin {

namespace {

CMatrix mat2(double a, double b, double c, double d)
{
    CMatrix m(2, 2);
    m << a, b, c, d;
    return m;
}

} // namespace

bool has_example(int index)
{
    return index >= 1 && index <= 3;
}

WalkModel example(int index)
{
    switch (index) {
    case 1: {
        const double s = 1.0 / std::sqrt(3.0);
        return WalkModel::from_drift(1, mat2(-0.5, 0.0, 0.0, -0.5),
                                     {s * mat2(1, 1, 0, 1), s * mat2(1, 0, -1, 1)});
    }
    case 2:
        return WalkModel::from_drift(1, mat2(-3.0 / 8.0, 0.0, 0.0, -0.25),
                                     {mat2(0, 0.5, 0.5, 0), mat2(0, 0.5, 1.0 / std::sqrt(2.0), 0)});
    case 3: {
        const double s6 = 1.0 / std::sqrt(6.0);
        return WalkModel::from_drift(2, mat2(-0.5, 0.0, 0.0, -3.0 / 8.0),
                                     {s6 * mat2(1, 1, 0, 1),
                                      (1.0 / (2.0 * std::sqrt(2.0))) * mat2(0, 1, 0, 1),
                                      s6 * mat2(1, 0, -1, 1),
                                      (1.0 / std::sqrt(2.0)) * mat2(1, 0, 0, 0)});
    }
    default:
        throw std::invalid_argument("unknown built-in example " + std::to_string(index) +
                                    " (expected 1, 2 or 3)");
    }
}

WalkModel classical_walk(double right, double left)
{
    if (!(right >= 0.0) || !(left >= 0.0)) {
        throw std::invalid_argument("classical_walk: rates must be non-negative");
    }
    CMatrix h = CMatrix::Zero(1, 1);
    CMatrix d1(1, 1), d2(1, 1);
    d1(0, 0) = std::sqrt(right);
    d2(0, 0) = std::sqrt(left);
    return WalkModel::from_hamiltonian(1, h, {d1, d2});
}

WalkModel diagonal_walk()
{
    return WalkModel::from_hamiltonian(1, mat2(0.3, 0.0, 0.0, -0.2),
                                       {mat2(0.8, 0, 0, 0.3), mat2(0.4, 0, 0, 0.9)});
}

} // namespace ctoqw::builtin
