#pragma once

#include "srn/barrier.hpp"
#include "srn/controller.hpp"
#include "srn/format.hpp"
#include "srn/kinematics.hpp"
#include "srn/qp.hpp"
#include "srn/scenario.hpp"
#include "srn/simulator.hpp"
#include "srn/social_fov.hpp"
#include "srn/stl.hpp"
#include "srn/trace.hpp"
