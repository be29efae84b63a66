#pragma once

#include "fedres/bandit.hpp"
#include "fedres/baselines.hpp"
#include "fedres/constrained_ls.hpp"
#include "fedres/data.hpp"
#include "fedres/datagen.hpp"
#include "fedres/delay.hpp"
#include "fedres/erm.hpp"
#include "fedres/errors.hpp"
#include "fedres/harness.hpp"
#include "fedres/io.hpp"
#include "fedres/linalg.hpp"
#include "fedres/minibatch.hpp"
#include "fedres/model.hpp"
#include "fedres/regret.hpp"
#include "fedres/rng.hpp"
#include "fedres/sgd.hpp"
