#pragma once

#include "opsurv/deeponet/hyper.hpp"
#include "opsurv/deeponet/model.hpp"
#include "opsurv/deeponet/network.hpp"
#include "opsurv/deeponet/serialize.hpp"
