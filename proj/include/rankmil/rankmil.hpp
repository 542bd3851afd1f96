#pragma once

#include "rankmil/data.hpp"
#include "rankmil/errors.hpp"
#include "rankmil/losses.hpp"
#include "rankmil/metrics.hpp"
#include "rankmil/model.hpp"
#include "rankmil/numerics.hpp"
#include "rankmil/synth.hpp"
#include "rankmil/trainer.hpp"
