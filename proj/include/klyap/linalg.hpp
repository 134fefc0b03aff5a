#pragma once

// Dense kernels: symmetric eigendecomposition, real Schur form, Lyapunov
// solvers (Bartels–Stewart and the Kronecker reference), matrix text I/O.

#include "klyap/linalg/dense_lu.hpp"
#include "klyap/linalg/lyapunov.hpp"
#include "klyap/linalg/matrix_io.hpp"
#include "klyap/linalg/real_schur.hpp"
#include "klyap/linalg/sym_eig.hpp"
