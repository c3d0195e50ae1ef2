#pragma once

// Umbrella header: the whole library.

#include "grn/adam.hpp"
#include "grn/checkpoint.hpp"
#include "grn/conv.hpp"
#include "grn/data.hpp"
#include "grn/dataset_io.hpp"
#include "grn/dsp.hpp"
#include "grn/error.hpp"
#include "grn/eval.hpp"
#include "grn/fft.hpp"
#include "grn/gradcheck.hpp"
#include "grn/layers.hpp"
#include "grn/model.hpp"
#include "grn/online.hpp"
#include "grn/preprocess.hpp"
#include "grn/rng.hpp"
#include "grn/tensor.hpp"
#include "grn/train.hpp"
