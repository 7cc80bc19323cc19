#pragma once

#include "bmeig/error.hpp"
#include "bmeig/geometry.hpp"
#include "bmeig/grid.hpp"
#include "bmeig/io.hpp"
#include "bmeig/parallel.hpp"
#include "bmeig/potential.hpp"
#include "bmeig/shapes.hpp"
#include "bmeig/spectral.hpp"
#include "bmeig/supconv.hpp"
#include "bmeig/verify.hpp"
