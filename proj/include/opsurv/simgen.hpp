#pragma once

#include "opsurv/simgen/simgen.hpp"
