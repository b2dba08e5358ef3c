#pragma once

// Umbrella header.

#include "shapeid/geometry.hpp"
#include "shapeid/mesh.hpp"
#include "shapeid/fem.hpp"
#include "shapeid/pde.hpp"
#include "shapeid/shape_calculus.hpp"
#include "shapeid/deformation.hpp"
#include "shapeid/problem.hpp"
#include "shapeid/riemannian_opt.hpp"
#include "shapeid/io.hpp"
#include "shapeid/experiment.hpp"
