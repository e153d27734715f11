#pragma once

#include "ngp/nets/layers.hpp"
#include "ngp/nets/model.hpp"
#include "ngp/nets/networks.hpp"
