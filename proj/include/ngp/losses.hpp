#pragma once

#include "ngp/losses/losses.hpp"
#include "ngp/losses/objectives.hpp"
