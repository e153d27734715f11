#pragma once

#include "ngp/metrics/frechet.hpp"
