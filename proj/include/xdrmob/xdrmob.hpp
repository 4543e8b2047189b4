#pragma once

#include "xdrmob/config.hpp"
#include "xdrmob/entropy.hpp"
#include "xdrmob/error.hpp"
#include "xdrmob/eval.hpp"
#include "xdrmob/features.hpp"
#include "xdrmob/forest.hpp"
#include "xdrmob/geo.hpp"
#include "xdrmob/ingest.hpp"
#include "xdrmob/markov.hpp"
#include "xdrmob/pipeline.hpp"
#include "xdrmob/profiles.hpp"
#include "xdrmob/step.hpp"
#include "xdrmob/synthgen.hpp"
