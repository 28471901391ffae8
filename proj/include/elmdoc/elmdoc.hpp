#pragma once

#include "elmdoc/dataset.hpp"
#include "elmdoc/elm.hpp"
#include "elmdoc/elm_io.hpp"
#include "elmdoc/error.hpp"
#include "elmdoc/evaluation.hpp"
#include "elmdoc/featx.hpp"
#include "elmdoc/image.hpp"
#include "elmdoc/linalg.hpp"
#include "elmdoc/netspec_io.hpp"
#include "elmdoc/parallel.hpp"
#include "elmdoc/random.hpp"
