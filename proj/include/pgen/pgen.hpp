#pragma once

#include "pgen/array.hpp"
#include "pgen/autodiff.hpp"
#include "pgen/checkpoint.hpp"
#include "pgen/config.hpp"
#include "pgen/corpus.hpp"
#include "pgen/decoding.hpp"
#include "pgen/error.hpp"
#include "pgen/gradcheck.hpp"
#include "pgen/learner.hpp"
#include "pgen/metrics.hpp"
#include "pgen/model.hpp"
#include "pgen/optimizer.hpp"
#include "pgen/rng.hpp"
#include "pgen/schedule.hpp"
#include "pgen/synth.hpp"
#include "pgen/trainer.hpp"
