#pragma once

#include "csdflow/error.hpp"
#include "csdflow/mesh.hpp"
#include "csdflow/profile_curve.hpp"
#include "csdflow/primitives.hpp"
#include "csdflow/operators.hpp"
#include "csdflow/analytic.hpp"
#include "csdflow/constraints.hpp"
#include "csdflow/monitor.hpp"
#include "csdflow/integrator.hpp"
#include "csdflow/axisym.hpp"
#include "csdflow/diagnostics.hpp"
#include "csdflow/obj_io.hpp"
#include "csdflow/config.hpp"
#include "csdflow/trajectory.hpp"
#include "csdflow/inequality_suite.hpp"
