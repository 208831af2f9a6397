// builtin_models.hpp: reference models used by the reproduction runs and the
// acceptance suite.

#pragma once

#include "ctoqw/walk_model.hpp"

namespace ctoqw::builtin {

// Two-level walks on Z (index 1, 2) and on Z^2 (index 3).
WalkModel example(int index);
bool has_example(int index);

// n = 1 walk: right jumps at rate `right`, left jumps at rate `left`.
WalkModel classical_walk(double right, double left);

// n = 2, d = 1 walk whose jump operators are all diagonal (reducible).
WalkModel diagonal_walk();

} // namespace ctoqw::builtin
