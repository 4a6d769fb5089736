#pragma once

#include "mkflow/error.hpp"
#include "mkflow/parallel.hpp"
#include "mkflow/grid.hpp"
#include "mkflow/field_io.hpp"
#include "mkflow/cost.hpp"
#include "mkflow/ctransform.hpp"
#include "mkflow/hj.hpp"
#include "mkflow/transport.hpp"
#include "mkflow/monge.hpp"
#include "mkflow/oracle.hpp"
#include "mkflow/dual_solver.hpp"
