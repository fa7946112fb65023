#pragma once
// Everything except the command-line front end.

#include "cemnet/baselines.hpp"
#include "cemnet/community.hpp"
#include "cemnet/constraints.hpp"
#include "cemnet/em.hpp"
#include "cemnet/graph.hpp"
#include "cemnet/io.hpp"
#include "cemnet/log.hpp"
#include "cemnet/lp.hpp"
#include "cemnet/metrics.hpp"
#include "cemnet/simulate.hpp"
#include "cemnet/trace.hpp"
