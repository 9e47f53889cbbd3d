#pragma once

#include "retrofit/tolerances.hpp"
#include "retrofit/linalg.hpp"
#include "retrofit/ratpoly.hpp"
#include "retrofit/transfer_matrix.hpp"
#include "retrofit/state_space.hpp"
#include "retrofit/lti.hpp"
#include "retrofit/rectifier.hpp"
#include "retrofit/synthesis.hpp"
#include "retrofit/network.hpp"
#include "retrofit/io.hpp"
#include "retrofit/cli.hpp"
