#pragma once

#include "dsj/errors.hpp"
#include "dsj/linalg.hpp"
#include "dsj/format.hpp"
#include "dsj/model.hpp"
#include "dsj/stiffness.hpp"
#include "dsj/synthesis.hpp"
#include "dsj/kinematics.hpp"
#include "dsj/sim.hpp"
#include "dsj/io.hpp"
#include "dsj/cli.hpp"
