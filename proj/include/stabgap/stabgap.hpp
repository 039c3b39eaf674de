#pragma once

#include "stabgap/core.hpp"
#include "stabgap/data.hpp"
#include "stabgap/evaluation.hpp"
#include "stabgap/experiment.hpp"
#include "stabgap/methods.hpp"
#include "stabgap/nn.hpp"
#include "stabgap/projection.hpp"
#include "stabgap/replay.hpp"
