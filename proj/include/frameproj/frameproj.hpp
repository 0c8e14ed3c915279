#pragma once

// Umbrella header for the frameproj library: augmentation-free
// self-supervised learning on orthonormal and overcomplete signal
// projections, with a self-contained f64 autodiff engine.

#include "frameproj/config.hpp"
#include "frameproj/data.hpp"
#include "frameproj/errors.hpp"
#include "frameproj/frames.hpp"
#include "frameproj/gradcheck.hpp"
#include "frameproj/io.hpp"
#include "frameproj/models.hpp"
#include "frameproj/objectives.hpp"
#include "frameproj/probe.hpp"
#include "frameproj/rng.hpp"
#include "frameproj/sha256.hpp"
#include "frameproj/signal.hpp"
#include "frameproj/tensor.hpp"
#include "frameproj/theory.hpp"
#include "frameproj/trainer.hpp"
