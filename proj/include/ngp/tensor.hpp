#pragma once

#include "ngp/tensor/autodiff.hpp"
#include "ngp/tensor/ops.hpp"
#include "ngp/tensor/serialize.hpp"
#include "ngp/core/rng.hpp"
#include "ngp/tensor/tensor.hpp"
