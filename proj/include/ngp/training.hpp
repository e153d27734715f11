#pragma once

#include "ngp/training/adam.hpp"
#include "ngp/training/config.hpp"
#include "ngp/training/pipeline.hpp"
#include "ngp/training/stages.hpp"
