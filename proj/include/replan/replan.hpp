#pragma once

#include "replan/correction.hpp"
#include "replan/engine.hpp"
#include "replan/error.hpp"
#include "replan/geometry.hpp"
#include "replan/harness.hpp"
#include "replan/lang.hpp"
#include "replan/reasoner.hpp"
#include "replan/remote.hpp"
#include "replan/rng.hpp"
#include "replan/scenario.hpp"
#include "replan/scene.hpp"
#include "replan/targets.hpp"
