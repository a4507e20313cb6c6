#pragma once

#include "mklnet/core.hpp"
#include "mklnet/kernel.hpp"
#include "mklnet/function.hpp"
#include "mklnet/data.hpp"
#include "mklnet/solver.hpp"
#include "mklnet/selection.hpp"
#include "mklnet/geometry.hpp"
#include "mklnet/rates.hpp"
#include "mklnet/io.hpp"
