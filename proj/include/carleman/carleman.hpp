#pragma once

#include "carleman/basis.hpp"
#include "carleman/contraction.hpp"
#include "carleman/error.hpp"
#include "carleman/forward.hpp"
#include "carleman/grid.hpp"
#include "carleman/least_squares.hpp"
#include "carleman/phantom.hpp"
#include "carleman/preprocess.hpp"
#include "carleman/reconstruct.hpp"
#include "carleman/stencil.hpp"
