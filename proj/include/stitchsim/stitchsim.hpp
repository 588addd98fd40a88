#pragma once

#include "stitchsim/error.hpp"
#include "stitchsim/geometry.hpp"
#include "stitchsim/dxf.hpp"
#include "stitchsim/digital_thread.hpp"
#include "stitchsim/trajectory.hpp"
#include "stitchsim/image.hpp"
#include "stitchsim/perception.hpp"
#include "stitchsim/workcell.hpp"
#include "stitchsim/controller.hpp"
#include "stitchsim/eval.hpp"
#include "stitchsim/config.hpp"
