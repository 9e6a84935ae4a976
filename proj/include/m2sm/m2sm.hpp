#pragma once

#include "m2sm/attention.hpp"
#include "m2sm/autodiff.hpp"
#include "m2sm/checkpoint.hpp"
#include "m2sm/commands.hpp"
#include "m2sm/config.hpp"
#include "m2sm/data.hpp"
#include "m2sm/encoders.hpp"
#include "m2sm/errors.hpp"
#include "m2sm/evaluation.hpp"
#include "m2sm/features.hpp"
#include "m2sm/fusion.hpp"
#include "m2sm/gradcheck.hpp"
#include "m2sm/labels.hpp"
#include "m2sm/losses.hpp"
#include "m2sm/model.hpp"
#include "m2sm/params.hpp"
#include "m2sm/rng.hpp"
#include "m2sm/rouge.hpp"
#include "m2sm/synth.hpp"
#include "m2sm/text.hpp"
#include "m2sm/training.hpp"
