#pragma once

#include "ngp/shading/lights.hpp"
#include "ngp/shading/render.hpp"
