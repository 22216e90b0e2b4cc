// Everything in one include.
#pragma once

#include "aevac/crowd.hpp"
#include "aevac/delaunay.hpp"
#include "aevac/engine.hpp"
#include "aevac/error.hpp"
#include "aevac/fireenv.hpp"
#include "aevac/funnel.hpp"
#include "aevac/geometry.hpp"
#include "aevac/navmesh.hpp"
#include "aevac/project.hpp"
#include "aevac/results.hpp"
#include "aevac/sampler.hpp"
#include "aevac/vec2.hpp"
