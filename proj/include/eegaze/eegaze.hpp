#pragma once

// Umbrella header for the whole library.

#include "eegaze/checkpoint.hpp"
#include "eegaze/dataset.hpp"
#include "eegaze/error.hpp"
#include "eegaze/gradcheck.hpp"
#include "eegaze/harness.hpp"
#include "eegaze/layers.hpp"
#include "eegaze/model.hpp"
#include "eegaze/optim.hpp"
#include "eegaze/rng.hpp"
#include "eegaze/serial.hpp"
#include "eegaze/tensor.hpp"
