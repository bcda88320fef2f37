#pragma once

#include "temporal_mesh.hpp"
#include "kernel.hpp"
#include "l2_operator.hpp"
#include "monotonicity.hpp"
#include "solvers.hpp"
#include "analysis.hpp"
#include "io.hpp"
