#pragma once

#include "ngp/geometry/camera.hpp"
#include "ngp/geometry/maps.hpp"
#include "ngp/geometry/mesh.hpp"
#include "ngp/geometry/raster.hpp"
#include "ngp/geometry/shapes.hpp"
