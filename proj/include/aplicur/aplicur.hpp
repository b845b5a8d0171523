#ifndef APLICUR_APLICUR_HPP
#define APLICUR_APLICUR_HPP

#include "aplicur/bench.hpp"
#include "aplicur/bounds.hpp"
#include "aplicur/cur.hpp"
#include "aplicur/dense_factor.hpp"
#include "aplicur/error.hpp"
#include "aplicur/lsqr.hpp"
#include "aplicur/matrix.hpp"
#include "aplicur/matrix_market.hpp"
#include "aplicur/operators.hpp"
#include "aplicur/preconditioner.hpp"
#include "aplicur/problems.hpp"
#include "aplicur/report_io.hpp"
#include "aplicur/rng.hpp"
#include "aplicur/sketch.hpp"
#include "aplicur/solver.hpp"

#endif
