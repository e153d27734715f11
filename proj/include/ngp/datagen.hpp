#pragma once

#include "ngp/datagen/datasets.hpp"
#include "ngp/datagen/generate.hpp"
